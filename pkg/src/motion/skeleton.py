"""
Skeletal motion: a T x J x 3 coordinate sequence over a fixed topology.
"""

from typing import Optional, Union

import numpy as np

from src.exceptions import ValidationError
from src.motion.topology import SkeletonTopology


class SkeletonMotion:
    """
    Immutable motion sample.

    Positions are stored as a read-only float64 copy of shape
    (frame_count, joint_count, 3).
    """

    def __init__(
        self,
        topology: SkeletonTopology,
        positions,
        label: Optional[int] = None,
        name: Optional[str] = None,
    ):
        array = np.array(positions, dtype=np.float64)
        if array.ndim != 3 or array.shape[1] != topology.joint_count or array.shape[2] != 3:
            raise ValidationError(
                f"positions must have shape (T, {topology.joint_count}, 3), got {array.shape}"
            )
        if array.shape[0] < 1:
            raise ValidationError("motion must have at least one frame")
        if not np.all(np.isfinite(array)):
            raise ValidationError("motion coordinates must be finite")
        if label is not None and int(label) < 0:
            raise ValidationError(f"label must be a nonnegative class index, got {label}")
        array.setflags(write=False)

        self.topology = topology
        self.positions = array
        self.label = None if label is None else int(label)
        self.name = name

    @property
    def frame_count(self) -> int:
        return self.positions.shape[0]

    @property
    def joint_count(self) -> int:
        return self.topology.joint_count

    @property
    def shape(self):
        return self.positions.shape

    def with_positions(self, positions) -> "SkeletonMotion":
        """Same topology, label and name with new coordinates."""
        return SkeletonMotion(self.topology, positions, label=self.label, name=self.name)

    def in_unit_box(self) -> bool:
        return bool(np.all(self.positions >= 0.0) and np.all(self.positions <= 1.0))

    def __repr__(self) -> str:
        return f"SkeletonMotion(name={self.name!r}, label={self.label}, frames={self.frame_count}, joints={self.joint_count})"


MotionLike = Union[SkeletonMotion, np.ndarray]


def as_positions(motion: MotionLike) -> np.ndarray:
    """Coordinates of a motion, or the array itself."""
    if isinstance(motion, SkeletonMotion):
        return motion.positions
    return np.asarray(motion, dtype=np.float64)
