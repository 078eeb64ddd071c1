import numpy as np
import pytest

from src.classifier.emotion import GroupedEmotionExtractor
from src.classifier.models import LinearClassifier
from src.classifier.network import DenseLayer
from src.exceptions import ValidationError
from src.loss.constraint import AttackMode, ConstraintSpec, classification_constraint, goal_reached, hinge_from_logits
from src.loss.dynamics_loss import angle_loss, bone_length_loss, relative_deviation, speed_loss
from src.loss.gradient_check import finite_difference_gradient, relative_errors
from src.loss.objective import (
    DistanceModel,
    LossWeights,
    augmented_lagrangian,
    emotion_loss,
    total_distance,
)
from src.metrics.imperceptibility import is_success
from src.motion.dynamics import bone_angles_from_positions, bone_lengths_from_positions, joint_speeds_from_positions
from src.motion.skeleton import SkeletonMotion
from src.motion.topology import SkeletonTopology, chain_topology, humanoid_topology, star_topology
from tests.conftest import perturbed, random_motion

H = 1e-5
PROBES = 100


def _kink_free(original, adversarial):
    topology = original.topology
    gaps = [
        np.abs(bone_lengths_from_positions(original.positions, topology) - bone_lengths_from_positions(adversarial, topology)),
        np.abs(bone_angles_from_positions(original.positions, topology)[0] - bone_angles_from_positions(adversarial, topology)[0]),
        np.abs(joint_speeds_from_positions(original.positions) - joint_speeds_from_positions(adversarial)),
    ]
    return min(g.min() for g in gaps) > 100 * H


def _kink_free_pairs(count=PROBES, seed=0):
    """(original, adversarial) pairs whose |Q - Q'| entries all stay clear of 0."""
    topology = chain_topology(5)
    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(50 * count):
        original = random_motion(rng, topology, frames=8, label=0)
        adversarial = perturbed(original, rng, scale=0.05).positions
        if _kink_free(original, adversarial):
            pairs.append((original, adversarial))
            if len(pairs) == count:
                return pairs
    raise AssertionError("not enough kink-free pairs")


def _random_coordinates(rng, shape, count=24):
    return [tuple(int(rng.integers(0, n)) for n in shape) for _ in range(count)]


def _max_relative_error(func, gradient, point, coordinates=None):
    numeric = finite_difference_gradient(func, point, h=H, coordinates=coordinates)
    if coordinates is None:
        return relative_errors(gradient, numeric).max()
    index = tuple(np.array(coordinates).T)
    return relative_errors(gradient[index], numeric[index]).max()


def test_identity_gives_zero_terms(rng, toy_extractor):
    original = random_motion(rng, chain_topology(5), frames=8)
    for loss in (bone_length_loss, angle_loss, speed_loss):
        value, gradient = loss(original, original)
        assert value == 0.0
        assert not gradient.any()
    value, gradient = emotion_loss(original, original, toy_extractor)
    assert value == 0.0 and not gradient.any()

    distance, gradient, breakdown = total_distance(original, original.positions, LossWeights(w_l2=1.0), toy_extractor)
    assert distance == 0.0 and not gradient.any()
    assert breakdown.b == breakdown.a == breakdown.s == breakdown.e == 0.0


def test_relative_deviation_scalar_examples():
    assert relative_deviation(np.array([2.0]), np.array([1.9]))[0] == pytest.approx(0.05)
    assert relative_deviation(np.array([np.pi / 2]), np.array([np.pi / 4]))[0] == pytest.approx(0.5)
    assert relative_deviation(np.array([0.2]), np.array([0.1]))[0] == pytest.approx(0.5)


def test_bone_length_loss_single_bone():
    topology = chain_topology(2)
    original = SkeletonMotion(topology, [[[0, 0, 0], [2, 0, 0]]])
    value, _ = bone_length_loss(original, np.array([[[0, 0, 0], [1.9, 0, 0]]]))
    assert value == pytest.approx(0.05)


def test_angle_loss_single_pair():
    topology = chain_topology(3)
    original = SkeletonMotion(topology, [[[1, 0, 0], [0, 0, 0], [0, 1, 0]]])
    adversarial = np.array([[[1, 0, 0], [0, 0, 0], [1, 1, 0]]], dtype=float)
    value, _ = angle_loss(original, adversarial)
    assert value == pytest.approx(0.5)


def test_speed_loss_single_joint():
    original = SkeletonMotion(SkeletonTopology(1, []), [[[0, 0, 0]], [[0.2, 0, 0]]])
    value, _ = speed_loss(original, np.array([[[0, 0, 0]], [[0.1, 0, 0]]]))
    assert value == pytest.approx(0.5)


def test_emotion_loss_closed_form():
    groups = [[0], [1]]
    layers = [DenseLayer([[1.0, 0.0, 0.0]], [0.0]), DenseLayer([[1.0, 0.0, 0.0]], [0.0])]
    extractor = GroupedEmotionExtractor(groups, layers, frames=1, joints=2)
    original = SkeletonMotion(chain_topology(2), [[[1, 0, 0], [0, 0, 0]]])
    value, _ = emotion_loss(original, np.array([[[0, 0, 0], [1, 0, 0]]], dtype=float), extractor)
    assert value == pytest.approx(np.sqrt(2.0))


def test_total_distance_examples(rng, toy_extractor):
    original = random_motion(rng, chain_topology(5), frames=8)
    adversarial = np.array(original.positions)
    adversarial[3, 2, 1] += 0.1
    distance, _, _ = total_distance(original, adversarial, LossWeights.l2_only())
    assert distance == pytest.approx(0.01, abs=1e-15)

    adversarial = perturbed(original, rng).positions
    distance, _, breakdown = total_distance(original, adversarial, LossWeights(), toy_extractor)
    parts = (
        bone_length_loss(original, adversarial).value
        + angle_loss(original, adversarial).value
        + speed_loss(original, adversarial).value
        + emotion_loss(original, adversarial, toy_extractor).value
    )
    assert distance == pytest.approx(parts, abs=1e-12)
    assert breakdown.l2_term == 0.0


def test_distance_needs_extractor_for_emotion(rng):
    original = random_motion(rng, chain_topology(3), frames=3)
    with pytest.raises(ValidationError):
        DistanceModel(original, LossWeights(), None)


def test_weights_parse():
    assert LossWeights.parse("1,0.5,2,0,3") == LossWeights(w_b=1, w_a=0.5, w_s=2, w_e=0, w_l2=3)
    with pytest.raises(ValidationError):
        LossWeights.parse("1,2")


def test_hinge_examples():
    logits = np.array([2.0, 5.0])
    assert hinge_from_logits(logits, ConstraintSpec(true_label=1))[0] == 3.0
    assert hinge_from_logits(logits, ConstraintSpec(true_label=0))[0] == 0.0
    targeted = ConstraintSpec(mode=AttackMode.TARGETED, true_label=1, target_label=0, conf=1.0)
    assert hinge_from_logits(logits, targeted)[0] == 4.0


def test_hinge_ties_pick_lowest_rival():
    _, cotangent, rival = hinge_from_logits(np.array([1.0, 3.0, 3.0]), ConstraintSpec(true_label=0, conf=3.0))
    assert rival == 1
    assert cotangent.tolist() == [1.0, -1.0, 0.0]


def test_goal_follows_argmax_on_ties():
    tied = np.array([3.0, 3.0, 1.0])
    # C is already 0 at the tie for either labelling
    assert hinge_from_logits(tied, ConstraintSpec(true_label=0))[0] == 0.0
    assert hinge_from_logits(tied, ConstraintSpec(true_label=1))[0] == 0.0
    assert not goal_reached(tied, ConstraintSpec(true_label=0))
    assert goal_reached(tied, ConstraintSpec(true_label=1))
    assert goal_reached(tied, ConstraintSpec(mode=AttackMode.TARGETED, true_label=2, target_label=0))
    assert not goal_reached(tied, ConstraintSpec(mode=AttackMode.TARGETED, true_label=2, target_label=1))

    for true_label in (0, 1):
        assert goal_reached(tied, ConstraintSpec(true_label=true_label)) == is_success(int(np.argmax(tied)), true_label, "untargeted")


def test_constraint_spec_validation():
    with pytest.raises(ValueError, match="requires a target"):
        ConstraintSpec(mode="targeted", true_label=1)
    with pytest.raises(ValueError, match="target equals true label"):
        ConstraintSpec(mode="targeted", true_label=1, target_label=1)


def test_constraint_gradient_is_zero_when_satisfied(rng):
    model = LinearClassifier(rng.normal(size=(2, 6)), [0.0, 100.0], frames=1, joints=2)
    value = classification_constraint(np.zeros((1, 2, 3)), model, ConstraintSpec(true_label=0))
    assert value.value == 0.0
    assert not value.gradient.any()


def test_augmented_lagrangian_arithmetic(rng):
    model = LinearClassifier(np.zeros((2, 6)), [0.2, 0.0], frames=1, joints=2)
    original = random_motion(rng, chain_topology(2), frames=1)
    adversarial = np.array(original.positions)
    adversarial[0, 0, 0] += np.sqrt(0.3)
    state = augmented_lagrangian(original, adversarial, 0.5, 1.0, LossWeights.l2_only(), ConstraintSpec(true_label=0), model)
    assert state.D == pytest.approx(0.3)
    assert state.C == pytest.approx(0.2)
    assert state.L == pytest.approx(0.42)

    inactive = augmented_lagrangian(original, adversarial, 0.5, 1.0, LossWeights.l2_only(), ConstraintSpec(true_label=1), model)
    assert inactive.L == inactive.D
    np.testing.assert_array_equal(inactive.gradient, inactive.distance_gradient)


def test_finite_difference_examples(rng):
    x = rng.normal(size=(2, 3, 3))
    assert not finite_difference_gradient(lambda _: 4.2, x).any()
    indicator = finite_difference_gradient(lambda y: y[1, 2, 0], x)
    expected = np.zeros_like(x)
    expected[1, 2, 0] = 1.0
    np.testing.assert_allclose(indicator, expected, atol=1e-9)
    np.testing.assert_allclose(finite_difference_gradient(lambda y: float(np.sum(y * y)), x), 2 * x, atol=1e-8)




def _brute_force_goal(logits, mode, true_label, target_label, conf):
    """Whether the attack goal holds with margin >= conf, by scanning every class."""
    anchor = true_label if mode == AttackMode.UNTARGETED else target_label
    best_other = max(logits[k] for k in range(len(logits)) if k != anchor)
    if mode == AttackMode.UNTARGETED:
        return best_other - logits[anchor] >= conf
    return logits[anchor] - best_other >= conf


def test_hinge_is_zero_exactly_when_goal_holds_with_margin():
    rng = np.random.default_rng(7)
    for _ in range(5000):
        class_count = int(rng.integers(2, 6))
        logits = rng.normal(0.0, 2.0, size=class_count)
        conf = float(rng.choice([0.0, rng.uniform(0.0, 2.0)]))
        true_label = int(rng.integers(0, class_count))
        if rng.random() < 0.5:
            spec = ConstraintSpec(true_label=true_label, conf=conf)
        else:
            target = int((true_label + rng.integers(1, class_count)) % class_count)
            spec = ConstraintSpec(mode=AttackMode.TARGETED, true_label=true_label, target_label=target, conf=conf)
        value = hinge_from_logits(logits, spec)[0]
        assert value >= 0.0
        assert (value == 0.0) == _brute_force_goal(logits, spec.mode, spec.true_label, spec.target_label, conf)


def test_lagrangian_grows_with_multiplier_and_gamma(rng, toy_mlp, toy_extractor):
    original = random_motion(rng, chain_topology(5), frames=8, label=0)
    adversarial = perturbed(original, rng).positions
    top = int(np.argmax(toy_mlp.forward(adversarial)))
    spec = ConstraintSpec(true_label=top, conf=0.5)
    weights = LossWeights()

    by_multiplier = [
        augmented_lagrangian(original, adversarial, m, 1.0, weights, spec, toy_mlp, toy_extractor)
        for m in (0.0, 0.1, 1.0, 10.0)
    ]
    assert all(state.C > 0.0 for state in by_multiplier)
    values = [state.L for state in by_multiplier]
    assert values == sorted(values) and values[-1] > values[0]

    values = [
        augmented_lagrangian(original, adversarial, 0.5, g, weights, spec, toy_mlp, toy_extractor).L
        for g in (0.01, 0.1, 1.0, 10.0)
    ]
    assert values == sorted(values) and values[-1] > values[0]


def _relabeled(motion, positions, rng):
    """The same motion and candidate with bones shuffled and joints renumbered."""
    joints = motion.joint_count
    order = rng.permutation(joints)
    new_index = np.empty(joints, dtype=int)
    new_index[order] = np.arange(joints)
    bones = [(int(new_index[a]), int(new_index[b])) for a, b in motion.topology.bones]
    bones = [bones[k] for k in rng.permutation(len(bones))]
    topology = SkeletonTopology(joints, bones)
    return SkeletonMotion(topology, motion.positions[:, order]), positions[:, order]


def test_dynamic_terms_ignore_bone_and_joint_order(rng):
    for topology in (humanoid_topology(), star_topology(5), chain_topology(6)):
        original = random_motion(rng, topology, frames=6)
        adversarial = perturbed(original, rng).positions
        relabeled, relabeled_adversarial = _relabeled(original, adversarial, rng)
        assert relabeled.topology.angle_count == topology.angle_count
        for loss in (bone_length_loss, angle_loss, speed_loss):
            expected = loss(original, adversarial).value
            assert loss(relabeled, relabeled_adversarial).value == pytest.approx(expected, rel=1e-12, abs=1e-15)


class TestGradientFidelity:
    """Analytic gradients against central differences over 100 random perturbed pairs per term."""

    def test_dynamic_terms(self):
        for original, adversarial in _kink_free_pairs(seed=0):
            for loss in (bone_length_loss, angle_loss, speed_loss):
                _, gradient = loss(original, adversarial)
                assert _max_relative_error(lambda y: loss(original, y).value, gradient, adversarial) <= 1e-4

    def test_emotion_term(self, toy_extractor):
        for original, adversarial in _kink_free_pairs(seed=1000):
            _, gradient = emotion_loss(original, adversarial, toy_extractor)
            error = _max_relative_error(lambda y: emotion_loss(original, y, toy_extractor).value, gradient, adversarial)
            assert error <= 1e-4

    def _active_spec(self, model, point, mode):
        logits = model.forward(point)
        order = np.argsort(logits)
        if mode == AttackMode.UNTARGETED:
            return ConstraintSpec(true_label=int(order[-1]), conf=0.5)
        return ConstraintSpec(mode=mode, true_label=int(order[-1]), target_label=int(order[0]), conf=0.5)

    @staticmethod
    def _clear_logits(model, point):
        # the strongest rival must not switch within one finite-difference step
        return np.diff(np.sort(model.forward(point))).min() > 1e-3

    @pytest.mark.parametrize("mode", [AttackMode.UNTARGETED, AttackMode.TARGETED])
    def test_constraint(self, toy_mlp, mode):
        rng = np.random.default_rng(20)
        probes = [(o, a) for o, a in _kink_free_pairs(count=150, seed=2000) if self._clear_logits(toy_mlp, a)]
        assert len(probes) >= PROBES
        for _, adversarial in probes[:PROBES]:
            spec = self._active_spec(toy_mlp, adversarial, mode)
            value = classification_constraint(adversarial, toy_mlp, spec)
            assert value.value > 0.0
            coordinates = _random_coordinates(rng, adversarial.shape)
            error = _max_relative_error(
                lambda y: classification_constraint(y, toy_mlp, spec).value, value.gradient, adversarial, coordinates
            )
            assert error <= 1e-4

    def test_lagrangian(self, toy_mlp, toy_extractor):
        rng = np.random.default_rng(30)
        weights = LossWeights(w_l2=0.5)
        probes = [(o, a) for o, a in _kink_free_pairs(count=150, seed=3000) if self._clear_logits(toy_mlp, a)]
        assert len(probes) >= PROBES
        for original, adversarial in probes[:PROBES]:
            spec = self._active_spec(toy_mlp, adversarial, AttackMode.UNTARGETED)

            def lagrangian(y):
                return augmented_lagrangian(original, y, 0.3, 2.0, weights, spec, toy_mlp, toy_extractor)

            state = lagrangian(adversarial)
            assert state.C > 0.0
            coordinates = _random_coordinates(rng, adversarial.shape)
            assert _max_relative_error(lambda y: lagrangian(y).L, state.gradient, adversarial, coordinates) <= 1e-4
