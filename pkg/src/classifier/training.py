"""
Full-batch classifier training by Adam on softmax cross-entropy.
"""

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

from src.attack.adam import AdamOptimizer
from src.classifier.models import DenseClassifier, LinearClassifier, MlpClassifier, build_classifier, log_softmax, softmax
from src.classifier.network import DenseLayer, backward, forward_with_cache
from src.exceptions import ValidationError
from src.motion.dataset import MotionDataset

logger = logging.getLogger(__name__)


class TrainingReport(BaseModel):
    architecture: str = Field(..., description="'mlp' or 'linear'")
    seed: int = Field(..., description="Initialization seed")
    epochs: int = Field(..., description="Full-batch Adam steps")
    lr: float = Field(..., description="Adam step size")
    train_accuracy: float = Field(..., description="Accuracy on the train split")
    test_accuracy: Optional[float] = Field(None, description="Accuracy on the test split, if any")
    train_count: int
    test_count: int
    loss_history: List[float] = Field(default_factory=list, description="Cross-entropy before each step")


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> float:
    """Mean negative log-likelihood, computed in log space."""
    return float(-np.mean(log_softmax(logits)[np.arange(len(labels)), labels]))


def accuracy(model: DenseClassifier, positions: np.ndarray, labels: np.ndarray) -> Optional[float]:
    if len(labels) == 0:
        return None
    return float(np.mean(model.predict_batch(positions) == labels))


def _rebuild(template: DenseClassifier, params: dict) -> DenseClassifier:
    layers = [
        DenseLayer(params[f"w{index}"], params[f"b{index}"], layer.activation)
        for index, layer in enumerate(template.layers)
    ]
    if isinstance(template, LinearClassifier):
        return LinearClassifier(layers[0].weight, layers[0].bias, template.frames, template.joints, template.seed)
    return MlpClassifier(layers, template.frames, template.joints, template.seed)


def train_classifier(
    dataset: MotionDataset,
    architecture: str = "mlp",
    seed: int = 0,
    epochs: int = 200,
    lr: float = 1e-3,
    hidden: Sequence[int] = (64, 64),
) -> Tuple[DenseClassifier, TrainingReport]:
    """
    Train a victim classifier on the train split.

    Args:
        dataset: Normalized dataset with train (and optionally test) split
        architecture: 'mlp' or 'linear'
        seed: Weight-initialization seed; training itself is deterministic
        epochs: Number of full-batch Adam steps
        lr: Adam step size
        hidden: MLP hidden widths

    Returns:
        (trained model, TrainingReport with train/test accuracy)
    """
    train_x, train_y = dataset.stacked("train")
    if len(train_y) == 0:
        raise ValidationError("cannot train on an empty train split")
    if np.any(train_y < 0):
        raise ValidationError("every training motion needs a label")
    test_x, test_y = dataset.stacked("test")
    frames, joints = train_x.shape[1], train_x.shape[2]

    model = build_classifier(architecture, dataset.class_count, frames, joints, seed, hidden)
    params = {}
    for index, layer in enumerate(model.layers):
        params[f"w{index}"] = np.array(layer.weight)
        params[f"b{index}"] = np.array(layer.bias)

    inputs = train_x.reshape(len(train_y), -1)
    onehot = np.eye(dataset.class_count)[train_y]
    optimizer = AdamOptimizer(lr=lr)
    history = []
    logger.info(f"Training {architecture} classifier on {len(train_y)} motions for {epochs} epochs")

    for epoch in range(epochs):
        current = _rebuild(model, params)
        activations = forward_with_cache(current.layers, inputs)
        logits = activations[-1]
        history.append(cross_entropy(logits, train_y))
        output_grad = (softmax(logits) - onehot) / len(train_y)
        _, layer_grads = backward(current.layers, activations, output_grad)
        grads = {}
        for index, (weight_grad, bias_grad) in enumerate(layer_grads):
            grads[f"w{index}"] = weight_grad
            grads[f"b{index}"] = bias_grad
        params = optimizer.update(params, grads)
        if epoch % 50 == 0:
            logger.debug(f"epoch {epoch}: cross-entropy {history[-1]:.6f}")

    trained = _rebuild(model, params)
    report = TrainingReport(
        architecture=architecture,
        seed=seed,
        epochs=epochs,
        lr=lr,
        train_accuracy=accuracy(trained, train_x, train_y),
        test_accuracy=accuracy(trained, test_x, test_y),
        train_count=len(train_y),
        test_count=len(test_y),
        loss_history=history,
    )
    logger.info(f"Trained {architecture}: train accuracy {report.train_accuracy:.3f}, test accuracy {report.test_accuracy}")
    return trained, report
