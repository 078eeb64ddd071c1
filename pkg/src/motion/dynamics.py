"""
Dynamics of a skeletal motion: bone lengths, bone angles and joint speeds.

The array-level helpers (`*_from_positions`) are shared with the loss
package, which differentiates through the same quantities.
"""

import logging
from typing import Tuple

import numpy as np

from config.settings import EPS_CLAMP, EPS_LEN
from src.exceptions import ValidationError
from src.motion.skeleton import SkeletonMotion
from src.motion.topology import SkeletonTopology

logger = logging.getLogger(__name__)


def bone_vectors(positions: np.ndarray, topology: SkeletonTopology) -> np.ndarray:
    """T x E x 3 vectors from each bone's source joint to its target joint."""
    return positions[:, topology.bone_targets] - positions[:, topology.bone_sources]


def bone_lengths_from_positions(positions: np.ndarray, topology: SkeletonTopology) -> np.ndarray:
    return np.linalg.norm(bone_vectors(positions, topology), axis=-1)


def angle_vectors(positions: np.ndarray, topology: SkeletonTopology) -> Tuple[np.ndarray, np.ndarray]:
    """Both bone vectors of every angle pair, pointing away from the shared joint."""
    center = positions[:, topology.angle_centers]
    return positions[:, topology.angle_first] - center, positions[:, topology.angle_second] - center


def bone_angles_from_positions(
    positions: np.ndarray, topology: SkeletonTopology
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Clamped-arccos angles and the mask of degenerate entries.

    Returns:
        (angles, degenerate) both of shape T x P; degenerate entries have an
        angle of exactly 0
    """
    u, v = angle_vectors(positions, topology)
    norm_u = np.linalg.norm(u, axis=-1)
    norm_v = np.linalg.norm(v, axis=-1)
    degenerate = (norm_u < EPS_LEN) | (norm_v < EPS_LEN)
    denominator = np.where(degenerate, 1.0, norm_u * norm_v)
    cosine = np.clip(np.sum(u * v, axis=-1) / denominator, -1.0 + EPS_CLAMP, 1.0 - EPS_CLAMP)
    angles = np.where(degenerate, 0.0, np.arccos(cosine))
    return angles, degenerate


def joint_speeds_from_positions(positions: np.ndarray) -> np.ndarray:
    if positions.shape[0] < 2:
        raise ValidationError("motion too short for speed: need at least 2 frames")
    return np.linalg.norm(np.diff(positions, axis=0), axis=-1)


def bone_lengths(motion: SkeletonMotion) -> np.ndarray:
    """
    Euclidean length of every bone at every frame.

    Args:
        motion: Motion sample

    Returns:
        Array of shape (T, bone_count)
    """
    return bone_lengths_from_positions(motion.positions, motion.topology)


def bone_angles(motion: SkeletonMotion, return_flags: bool = False):
    """
    Interior angle (radians) of every angle pair at every frame.

    Angles of pairs with a bone shorter than EPS_LEN are 0 and flagged.

    Args:
        motion: Motion sample
        return_flags: Also return the boolean mask of degenerate entries

    Returns:
        Array of shape (T, angle_count), or (angles, flags) when requested
    """
    angles, degenerate = bone_angles_from_positions(motion.positions, motion.topology)
    if degenerate.any():
        logger.warning(f"{int(degenerate.sum())} angle entries of {motion.name or 'motion'} involve near-zero bones")
    return (angles, degenerate) if return_flags else angles


def joint_speeds(motion: SkeletonMotion) -> np.ndarray:
    """
    Per-joint displacement between consecutive frames.

    Returns:
        Array of shape (T - 1, joint_count)
    """
    return joint_speeds_from_positions(motion.positions)
