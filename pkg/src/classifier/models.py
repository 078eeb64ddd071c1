"""
Victim classifiers: differentiable maps from a motion to pre-softmax logits.
"""

import logging
from abc import ABC, abstractmethod
from typing import List, Optional, Sequence

import numpy as np

from src.classifier.network import DenseLayer, backward, check_chain, forward_with_cache
from src.exceptions import ValidationError
from src.motion.skeleton import MotionLike, as_positions

logger = logging.getLogger(__name__)


def softmax(logits) -> np.ndarray:
    """
    Probabilities from logits, stabilized by subtracting the maximum.

    Works on a vector or on the last axis of a batch.
    """
    z = np.asarray(logits, dtype=np.float64)
    shifted = np.exp(z - z.max(axis=-1, keepdims=True))
    return shifted / shifted.sum(axis=-1, keepdims=True)


def log_softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    shifted = z - z.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


class ClassifierModel(ABC):
    """
    Contract of every victim model.

    forward() is deterministic and input_gradient() returns the exact
    gradient of <forward(x), cotangent> with respect to all T x J x 3
    coordinates.
    """

    kind = "abstract"

    def __init__(self, class_count: int, frames: int, joints: int, seed: Optional[int] = None):
        if class_count < 2:
            raise ValidationError(f"a classifier needs at least 2 classes, got {class_count}")
        self.class_count = int(class_count)
        self.frames = int(frames)
        self.joints = int(joints)
        self.seed = seed

    @property
    def input_shape(self):
        return (self.frames, self.joints, 3)

    def _flatten(self, motion: MotionLike) -> np.ndarray:
        positions = as_positions(motion)
        if positions.shape != self.input_shape:
            raise ValidationError(f"motion shape {positions.shape} does not match model input {self.input_shape}")
        return positions.reshape(1, -1)

    def _flatten_batch(self, batch: np.ndarray) -> np.ndarray:
        batch = np.asarray(batch, dtype=np.float64)
        if batch.shape[1:] != self.input_shape:
            raise ValidationError(f"batch shape {batch.shape} does not match model input {self.input_shape}")
        return batch.reshape(batch.shape[0], -1)

    def _check_cotangent(self, cotangent) -> np.ndarray:
        cotangent = np.asarray(cotangent, dtype=np.float64)
        if cotangent.shape != (self.class_count,):
            raise ValidationError(f"cotangent must have length {self.class_count}, got shape {cotangent.shape}")
        return cotangent

    @abstractmethod
    def forward_batch(self, batch: np.ndarray) -> np.ndarray:
        """Logits of shape (N, class_count) for a batch of shape (N, T, J, 3)."""

    @abstractmethod
    def input_gradient(self, motion: MotionLike, cotangent) -> np.ndarray:
        """Gradient of <logits, cotangent> with respect to the coordinates."""

    def forward(self, motion: MotionLike) -> np.ndarray:
        return self.forward_batch(self._flatten(motion).reshape((1,) + self.input_shape))[0]

    def predict(self, motion: MotionLike) -> int:
        return int(np.argmax(self.forward(motion)))

    def predict_batch(self, batch: np.ndarray) -> np.ndarray:
        return np.argmax(self.forward_batch(batch), axis=1)


class DenseClassifier(ClassifierModel):
    """A classifier whose logits come from a stack of dense layers on flattened coordinates."""

    def __init__(self, layers: Sequence[DenseLayer], frames: int, joints: int, seed: Optional[int] = None):
        layers = list(layers)
        check_chain(layers)
        super().__init__(layers[-1].output_size, frames, joints, seed)
        if layers[0].input_size != frames * joints * 3:
            raise ValidationError(
                f"first layer expects {layers[0].input_size} inputs, motion has {frames * joints * 3} coordinates"
            )
        if layers[-1].activation != "none":
            raise ValidationError("the logit layer must not have an activation")
        self.layers = layers

    def forward_batch(self, batch: np.ndarray) -> np.ndarray:
        inputs = self._flatten_batch(batch)
        return forward_with_cache(self.layers, inputs)[-1]

    def input_gradient(self, motion: MotionLike, cotangent) -> np.ndarray:
        cotangent = self._check_cotangent(cotangent)
        activations = forward_with_cache(self.layers, self._flatten(motion))
        input_grad, _ = backward(self.layers, activations, cotangent.reshape(1, -1))
        return input_grad.reshape(self.input_shape)


class LinearClassifier(DenseClassifier):
    """Logits are an affine function W v + b of the flattened coordinates v."""

    kind = "linear"

    def __init__(self, weight, bias, frames: int, joints: int, seed: Optional[int] = None):
        super().__init__([DenseLayer(weight, bias, "none")], frames, joints, seed)

    @property
    def weight(self) -> np.ndarray:
        return self.layers[0].weight

    @property
    def bias(self) -> np.ndarray:
        return self.layers[0].bias

    def input_gradient(self, motion: MotionLike, cotangent) -> np.ndarray:
        self._flatten(motion)
        return (self._check_cotangent(cotangent) @ self.weight).reshape(self.input_shape)


class MlpClassifier(DenseClassifier):
    """Tanh multilayer perceptron on flattened coordinates."""

    kind = "mlp"

    def __init__(self, layers: Sequence[DenseLayer], frames: int, joints: int, seed: Optional[int] = None):
        layers = list(layers)
        for index, layer in enumerate(layers[:-1]):
            if layer.activation != "tanh":
                raise ValidationError(f"hidden layer {index} must use tanh")
        super().__init__(layers, frames, joints, seed)


def init_layers(rng: np.random.Generator, widths: Sequence[int], hidden_activation: str = "tanh") -> List[DenseLayer]:
    """Glorot-normal weights and zero biases for a dense stack of the given widths."""
    layers = []
    for index in range(len(widths) - 1):
        fan_in, fan_out = widths[index], widths[index + 1]
        weight = rng.normal(0.0, np.sqrt(2.0 / (fan_in + fan_out)), size=(fan_out, fan_in))
        activation = hidden_activation if index < len(widths) - 2 else "none"
        layers.append(DenseLayer(weight, np.zeros(fan_out), activation))
    return layers


def build_classifier(
    architecture: str,
    class_count: int,
    frames: int,
    joints: int,
    seed: int,
    hidden: Sequence[int] = (64, 64),
) -> DenseClassifier:
    """
    Freshly initialized classifier.

    Args:
        architecture: 'mlp' or 'linear'
        class_count: Number of output logits
        frames, joints: Input motion shape
        seed: Seed for weight initialization
        hidden: Hidden widths of the MLP
    """
    rng = np.random.default_rng(seed)
    inputs = frames * joints * 3
    if architecture == "linear":
        layer = init_layers(rng, [inputs, class_count])[0]
        return LinearClassifier(layer.weight, layer.bias, frames, joints, seed)
    if architecture == "mlp":
        return MlpClassifier(init_layers(rng, [inputs, *hidden, class_count]), frames, joints, seed)
    raise ValidationError(f"unknown architecture '{architecture}' (expected 'mlp' or 'linear')")


def forward(model: ClassifierModel, motion: MotionLike) -> np.ndarray:
    """Logits Θ(x) of a motion."""
    return model.forward(motion)


def input_gradient(model: ClassifierModel, motion: MotionLike, cotangent) -> np.ndarray:
    """Exact T x J x 3 gradient of <Θ(x), cotangent>."""
    return model.input_gradient(motion, cotangent)
