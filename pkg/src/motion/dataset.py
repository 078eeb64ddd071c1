"""
Motion datasets and the dataset-level min-max normalization into [0, 1].
"""

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.exceptions import ValidationError
from src.motion.skeleton import SkeletonMotion

logger = logging.getLogger(__name__)

SPLITS = ("train", "test")


class NormalizationTransform:
    """Per-axis affine map x -> (x - offset) / scale."""

    def __init__(self, offset: Sequence[float], scale: Sequence[float]):
        offset = np.array(offset, dtype=np.float64).reshape(3)
        scale = np.array(scale, dtype=np.float64).reshape(3)
        if not (np.all(np.isfinite(offset)) and np.all(np.isfinite(scale))):
            raise ValidationError("normalization offset and scale must be finite")
        if np.any(scale <= 0.0):
            raise ValidationError(f"normalization scale must be strictly positive, got {scale.tolist()}")
        offset.setflags(write=False)
        scale.setflags(write=False)
        self.offset = offset
        self.scale = scale

    @classmethod
    def identity(cls) -> "NormalizationTransform":
        return cls(np.zeros(3), np.ones(3))

    def normalize(self, positions: np.ndarray) -> np.ndarray:
        return (np.asarray(positions, dtype=np.float64) - self.offset) / self.scale

    def denormalize(self, positions: np.ndarray) -> np.ndarray:
        return np.asarray(positions, dtype=np.float64) * self.scale + self.offset

    def to_dict(self) -> dict:
        return {"offset": self.offset.tolist(), "scale": self.scale.tolist()}

    def __eq__(self, other) -> bool:
        if not isinstance(other, NormalizationTransform):
            return NotImplemented
        return np.array_equal(self.offset, other.offset) and np.array_equal(self.scale, other.scale)

    def __repr__(self) -> str:
        return f"NormalizationTransform(offset={self.offset.tolist()}, scale={self.scale.tolist()})"


class MotionDataset:
    """
    Labelled motions sharing one topology, with a split tag per motion.
    """

    def __init__(
        self,
        motions: List[SkeletonMotion],
        class_count: int,
        normalization: Optional[NormalizationTransform] = None,
        splits: Optional[List[str]] = None,
    ):
        if int(class_count) < 1:
            raise ValidationError(f"class count must be positive, got {class_count}")
        motions = list(motions)
        splits = list(splits) if splits is not None else ["train"] * len(motions)
        if len(splits) != len(motions):
            raise ValidationError(f"{len(splits)} split tags for {len(motions)} motions")
        for index, (motion, split) in enumerate(zip(motions, splits)):
            if split not in SPLITS:
                raise ValidationError(f"motion {index}: unknown split '{split}'")
            if motion.topology != motions[0].topology:
                raise ValidationError(f"motion {index} does not share the dataset topology")
            if motion.label is not None and motion.label >= class_count:
                raise ValidationError(f"motion {index}: label {motion.label} outside [0, {class_count})")

        self.motions = motions
        self.class_count = int(class_count)
        self.normalization = normalization or NormalizationTransform.identity()
        self.splits = splits

    def __len__(self) -> int:
        return len(self.motions)

    @property
    def topology(self):
        if not self.motions:
            raise ValidationError("empty dataset has no topology")
        return self.motions[0].topology

    def split(self, tag: str) -> List[SkeletonMotion]:
        """Motions carrying the given split tag, in dataset order."""
        if tag not in SPLITS:
            raise ValidationError(f"unknown split '{tag}'")
        return [m for m, s in zip(self.motions, self.splits) if s == tag]

    def stacked(self, tag: Optional[str] = None) -> Tuple[np.ndarray, np.ndarray]:
        """
        Positions and labels as arrays.

        Returns:
            (N x T x J x 3 positions, N labels)
        """
        motions = self.motions if tag is None else self.split(tag)
        if not motions:
            return np.zeros((0,) + (self.motions[0].shape if self.motions else (0, 0, 3))), np.zeros(0, dtype=int)
        positions = np.stack([m.positions for m in motions])
        labels = np.array([-1 if m.label is None else m.label for m in motions], dtype=int)
        return positions, labels


def normalize_dataset(dataset: MotionDataset) -> Tuple[MotionDataset, NormalizationTransform]:
    """
    Fit one per-axis min-max transform over the whole dataset and apply it.

    A constant axis gets scale 1 and offset equal to its value, mapping it to 0.

    Args:
        dataset: Non-empty dataset in raw coordinates

    Returns:
        (normalized dataset, fitted transform)
    """
    if len(dataset) == 0:
        raise ValidationError("cannot normalize an empty dataset")
    stacked = np.concatenate([m.positions.reshape(-1, 3) for m in dataset.motions])
    low = stacked.min(axis=0)
    high = stacked.max(axis=0)
    span = high - low
    degenerate = span <= 0.0
    if degenerate.any():
        logger.warning(f"Degenerate axes {np.flatnonzero(degenerate).tolist()} map to constant 0")
    scale = np.where(degenerate, 1.0, span)
    transform = NormalizationTransform(low, scale)

    # clip only absorbs the last-ulp rounding of (x - min) / span
    motions = [m.with_positions(np.clip(transform.normalize(m.positions), 0.0, 1.0)) for m in dataset.motions]
    logger.info(f"Normalized {len(motions)} motions with offset {low.tolist()} and scale {scale.tolist()}")
    return MotionDataset(motions, dataset.class_count, transform, dataset.splits), transform
