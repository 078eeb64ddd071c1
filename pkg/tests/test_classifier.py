import json

import numpy as np
import pytest

from src.classifier.emotion import GroupedEmotionExtractor, default_joint_groups, emotion_features
from src.classifier.model_io import check_model_matches_dataset, load_model, save_model
from src.classifier.models import LinearClassifier, build_classifier, forward, input_gradient, softmax
from src.classifier.network import DenseLayer
from src.classifier.training import train_classifier
from src.exceptions import ModelFormatError, ValidationError
from src.loss.gradient_check import finite_difference_gradient, relative_errors


def test_softmax_examples():
    np.testing.assert_allclose(softmax([3.0, 3.0, 3.0, 3.0]), 0.25, atol=1e-12)
    np.testing.assert_allclose(softmax([0.0, np.log(3.0)]), [0.25, 0.75], atol=1e-12)
    logits = np.array([1.0, -2.0, 0.5])
    np.testing.assert_allclose(softmax(logits + 1000.0), softmax(logits), atol=1e-12)
    assert softmax(logits).sum() == pytest.approx(1.0, abs=1e-12)


def test_linear_forward_and_gradient(rng):
    model = LinearClassifier(np.zeros((2, 6)), [1.0, 2.0], frames=1, joints=2)
    assert forward(model, np.zeros((1, 2, 3))).tolist() == [1.0, 2.0]

    weight = rng.normal(size=(3, 12))
    bias = rng.normal(size=3)
    model = LinearClassifier(weight, bias, frames=2, joints=2)
    motion = rng.uniform(size=(2, 2, 3))
    np.testing.assert_allclose(forward(model, motion), weight @ motion.ravel() + bias, atol=1e-12)
    np.testing.assert_array_equal(input_gradient(model, motion, [0.0, 1.0, 0.0]), weight[1].reshape(2, 2, 3))
    assert not input_gradient(model, motion, np.zeros(3)).any()


def test_mlp_zero_motion_gives_zero_logits():
    model = build_classifier("mlp", class_count=3, frames=2, joints=2, seed=5, hidden=(8, 8))
    assert not forward(model, np.zeros((2, 2, 3))).any()


def test_forward_rejects_wrong_shape():
    model = build_classifier("linear", class_count=2, frames=2, joints=2, seed=0)
    with pytest.raises(ValidationError):
        forward(model, np.zeros((3, 2, 3)))
    with pytest.raises(ValidationError):
        input_gradient(model, np.zeros((2, 2, 3)), np.zeros(3))


@pytest.mark.parametrize("architecture", ["mlp", "linear"])
def test_input_gradient_matches_finite_differences(architecture, rng):
    model = build_classifier(architecture, class_count=4, frames=5, joints=4, seed=2, hidden=(12, 8))
    errors = []
    for _ in range(100):
        motion = rng.uniform(size=model.input_shape)
        cotangent = rng.normal(size=4)
        analytic = input_gradient(model, motion, cotangent)
        coordinates = [tuple(rng.integers(0, n) for n in model.input_shape) for _ in range(20)]
        numeric = finite_difference_gradient(lambda x: float(forward(model, x) @ cotangent), motion, coordinates=coordinates)
        index = tuple(np.array(coordinates).T)
        errors.append(relative_errors(analytic[index], numeric[index]).max())
    assert max(errors) <= 1e-4


def test_emotion_extractor_gradient_and_zero_weights(rng, toy_extractor):
    for _ in range(100):
        motion = rng.uniform(size=toy_extractor.input_shape)
        cotangent = rng.normal(size=toy_extractor.feature_dim)
        analytic = toy_extractor.input_gradient(motion, cotangent)
        coordinates = [tuple(rng.integers(0, n) for n in toy_extractor.input_shape) for _ in range(20)]
        numeric = finite_difference_gradient(
            lambda x: float(toy_extractor.features(x) @ cotangent), motion, coordinates=coordinates
        )
        index = tuple(np.array(coordinates).T)
        assert relative_errors(analytic[index], numeric[index]).max() <= 1e-4
    np.testing.assert_array_equal(emotion_features(toy_extractor, motion), emotion_features(toy_extractor, motion.copy()))

    groups = default_joint_groups(5, 2)
    layers = [DenseLayer(np.zeros((3, 3 * len(g))), np.zeros(3)) for g in groups]
    silent = GroupedEmotionExtractor(groups, layers, frames=8, joints=5)
    assert not silent.features(motion).any()


def test_emotion_groups_must_partition_joints():
    with pytest.raises(ValidationError):
        GroupedEmotionExtractor([[0, 1], [1, 2]], [DenseLayer(np.zeros((2, 6)), np.zeros(2))] * 2, frames=2, joints=3)


def test_training_descends_and_generalizes(toy_dataset, toy_mlp):
    _, report = train_classifier(toy_dataset, architecture="mlp", seed=0, epochs=150, lr=1e-2, hidden=(16,))
    assert report.loss_history[50] < report.loss_history[0]
    assert report.train_accuracy >= 0.9
    assert report.test_count == 15

    positions, _ = toy_dataset.stacked()
    retrained, _ = train_classifier(toy_dataset, architecture="mlp", seed=0, epochs=150, lr=1e-2, hidden=(16,))
    np.testing.assert_array_equal(retrained.forward_batch(positions), toy_mlp.forward_batch(positions))


def test_training_linear_architecture(toy_dataset):
    model, report = train_classifier(toy_dataset, architecture="linear", seed=1, epochs=20, lr=1e-2)
    assert isinstance(model, LinearClassifier)
    assert report.architecture == "linear"


def test_model_round_trip(tmp_path, toy_mlp, toy_extractor, rng):
    probes = rng.uniform(size=(10,) + toy_mlp.input_shape)
    loaded = load_model(save_model(toy_mlp, tmp_path / "model.json"))
    np.testing.assert_array_equal(loaded.forward_batch(probes), toy_mlp.forward_batch(probes))

    extractor = load_model(save_model(toy_extractor, tmp_path / "emotion.json"))
    np.testing.assert_array_equal(extractor.features(probes[0]), toy_extractor.features(probes[0]))


def test_load_model_errors(tmp_path, toy_mlp):
    path = save_model(toy_mlp, tmp_path / "model.json")
    text = path.read_text(encoding="utf-8")

    truncated = tmp_path / "truncated.json"
    truncated.write_text(text[: len(text) // 2], encoding="utf-8")
    with pytest.raises(ModelFormatError, match="malformed JSON"):
        load_model(truncated)

    payload = json.loads(text)
    payload["class_count"] = 7
    wrong = tmp_path / "wrong.json"
    wrong.write_text(json.dumps(payload), encoding="utf-8")
    with pytest.raises(ModelFormatError) as info:
        load_model(wrong)
    assert info.value.field == "class_count"


def test_model_must_match_dataset(toy_dataset):
    model = build_classifier("linear", class_count=4, frames=8, joints=5, seed=0)
    with pytest.raises(ValidationError):
        check_model_matches_dataset(model, toy_dataset)
