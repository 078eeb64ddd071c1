"""
Emotion feature extractors E(x).

The grouped extractor keeps the group structure of a group-convolution
emotion recognizer: the joints are partitioned into body-part groups and
every group is summarized independently (temporal mean pooling followed by
its own projection), then the group features are concatenated.
"""

import logging
from abc import ABC, abstractmethod
from typing import List, Optional, Sequence

import numpy as np

from src.classifier.network import DenseLayer
from src.exceptions import ValidationError
from src.motion.skeleton import MotionLike, as_positions

logger = logging.getLogger(__name__)


class EmotionExtractor(ABC):
    """Deterministic feature map with exact input gradients."""

    kind = "emotion"

    def __init__(self, frames: int, joints: int, seed: Optional[int] = None):
        self.frames = int(frames)
        self.joints = int(joints)
        self.seed = seed

    @property
    def input_shape(self):
        return (self.frames, self.joints, 3)

    def _check(self, motion: MotionLike) -> np.ndarray:
        positions = as_positions(motion)
        if positions.shape != self.input_shape:
            raise ValidationError(f"motion shape {positions.shape} does not match extractor input {self.input_shape}")
        return positions

    @property
    @abstractmethod
    def feature_dim(self) -> int:
        """Length of the feature vector."""

    @abstractmethod
    def features(self, motion: MotionLike) -> np.ndarray:
        """E(x)."""

    @abstractmethod
    def input_gradient(self, motion: MotionLike, cotangent) -> np.ndarray:
        """Gradient of <E(x), cotangent> with respect to the coordinates."""


def default_joint_groups(joint_count: int, group_count: int = 4) -> List[List[int]]:
    """Split joints 0..J-1 into contiguous, nearly equal groups."""
    group_count = min(group_count, joint_count)
    return [chunk.tolist() for chunk in np.array_split(np.arange(joint_count), group_count)]


class GroupedEmotionExtractor(EmotionExtractor):
    """
    Per-group temporal mean pooling followed by a per-group projection.

    For group g with joints J_g: p_g = mean_t x[t, J_g, :] (flattened to
    3|J_g| values), f_g = act(W_g p_g + b_g), E(x) = concat_g f_g.
    """

    def __init__(self, groups: Sequence[Sequence[int]], layers: Sequence[DenseLayer], frames: int, joints: int, seed: Optional[int] = None):
        super().__init__(frames, joints, seed)
        groups = [[int(j) for j in group] for group in groups]
        flat = sorted(j for group in groups for j in group)
        if flat != list(range(joints)):
            raise ValidationError(f"joint groups must partition [0, {joints})")
        if len(layers) != len(groups):
            raise ValidationError(f"{len(layers)} projection layers for {len(groups)} groups")
        for index, (group, layer) in enumerate(zip(groups, layers)):
            if layer.input_size != 3 * len(group):
                raise ValidationError(f"group {index} projection expects {layer.input_size} inputs, group has {3 * len(group)}")
        self.groups = groups
        self.layers = list(layers)
        self._group_index = [np.array(group, dtype=np.intp) for group in groups]

    @classmethod
    def seeded(
        cls,
        frames: int,
        joints: int,
        seed: int,
        groups: Optional[Sequence[Sequence[int]]] = None,
        features_per_group: int = 4,
        activation: str = "none",
    ) -> "GroupedEmotionExtractor":
        """Extractor with deterministic Gaussian projection weights."""
        rng = np.random.default_rng(seed)
        groups = groups if groups is not None else default_joint_groups(joints)
        layers = []
        for group in groups:
            fan_in = 3 * len(group)
            weight = rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=(features_per_group, fan_in))
            layers.append(DenseLayer(weight, np.zeros(features_per_group), activation))
        return cls(groups, layers, frames, joints, seed)

    @property
    def feature_dim(self) -> int:
        return sum(layer.output_size for layer in self.layers)

    def features(self, motion: MotionLike) -> np.ndarray:
        pooled = self._check(motion).mean(axis=0)
        outputs = [
            layer.forward(pooled[index].reshape(1, -1))[0]
            for index, layer in zip(self._group_index, self.layers)
        ]
        return np.concatenate(outputs)

    def input_gradient(self, motion: MotionLike, cotangent) -> np.ndarray:
        positions = self._check(motion)
        cotangent = np.asarray(cotangent, dtype=np.float64)
        if cotangent.shape != (self.feature_dim,):
            raise ValidationError(f"cotangent must have length {self.feature_dim}, got shape {cotangent.shape}")
        pooled = positions.mean(axis=0)
        pooled_grad = np.zeros((self.joints, 3))
        start = 0
        for index, layer in zip(self._group_index, self.layers):
            upstream = cotangent[start:start + layer.output_size]
            start += layer.output_size
            if layer.activation == "tanh":
                output = layer.forward(pooled[index].reshape(1, -1))[0]
                upstream = upstream * (1.0 - output ** 2)
            pooled_grad[index] += (upstream @ layer.weight).reshape(len(index), 3)
        return np.broadcast_to(pooled_grad / self.frames, positions.shape).copy()


def emotion_features(extractor: EmotionExtractor, motion: MotionLike) -> np.ndarray:
    return extractor.features(motion)


def emotion_input_gradient(extractor: EmotionExtractor, motion: MotionLike, cotangent) -> np.ndarray:
    return extractor.input_gradient(motion, cotangent)
