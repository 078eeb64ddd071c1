"""
Dynamic distance terms between an original motion x and a candidate x'.

Each term is the mean relative deviation |Q - Q'| / max(Q, EPS_DEN) of one
dynamic quantity Q (bone length, bone angle, joint speed) over all
(frame, element) entries, returned with its exact gradient with respect
to x'. The subgradient of |.| at 0 is taken as 0.
"""

from typing import NamedTuple, Tuple

import numpy as np

from config.settings import EPS_CLAMP, EPS_DEN, EPS_LEN
from src.exceptions import ValidationError
from src.motion.dynamics import (
    angle_vectors,
    bone_angles_from_positions,
    bone_lengths_from_positions,
    bone_vectors,
    joint_speeds_from_positions,
)
from src.motion.skeleton import MotionLike, SkeletonMotion, as_positions
from src.motion.topology import SkeletonTopology


class LossTerm(NamedTuple):
    value: float
    gradient: np.ndarray


def relative_deviation(reference: np.ndarray, current: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    Mean of |current - reference| / max(reference, EPS_DEN) and its derivative in current.
    """
    if current.size == 0:
        return 0.0, np.zeros_like(current)
    denominator = np.maximum(reference, EPS_DEN)
    difference = current - reference
    value = float(np.mean(np.abs(difference) / denominator))
    return value, np.sign(difference) / denominator / difference.size


def _safe_unit(vectors: np.ndarray, norms: np.ndarray) -> np.ndarray:
    positive = norms > 0.0
    return np.where(positive[..., None], vectors / np.where(positive, norms, 1.0)[..., None], 0.0)


def bone_length_term(reference_lengths: np.ndarray, positions: np.ndarray, topology: SkeletonTopology) -> LossTerm:
    vectors = bone_vectors(positions, topology)
    lengths = np.linalg.norm(vectors, axis=-1)
    value, length_grad = relative_deviation(reference_lengths, lengths)
    vector_grad = length_grad[..., None] * _safe_unit(vectors, lengths)

    gradient = np.zeros_like(positions)
    np.add.at(gradient, (slice(None), topology.bone_targets), vector_grad)
    np.add.at(gradient, (slice(None), topology.bone_sources), -vector_grad)
    return LossTerm(value, gradient)


def angle_term(reference_angles: np.ndarray, positions: np.ndarray, topology: SkeletonTopology) -> LossTerm:
    u, v = angle_vectors(positions, topology)
    norm_u = np.linalg.norm(u, axis=-1)
    norm_v = np.linalg.norm(v, axis=-1)
    degenerate = (norm_u < EPS_LEN) | (norm_v < EPS_LEN)
    safe_u = np.where(degenerate, 1.0, norm_u)
    safe_v = np.where(degenerate, 1.0, norm_v)

    raw_cosine = np.sum(u * v, axis=-1) / (safe_u * safe_v)
    low, high = -1.0 + EPS_CLAMP, 1.0 - EPS_CLAMP
    cosine = np.clip(raw_cosine, low, high)
    angles = np.where(degenerate, 0.0, np.arccos(cosine))
    value, angle_grad = relative_deviation(reference_angles, angles)

    # the clamp has zero derivative once saturated
    active = ~degenerate & (raw_cosine > low) & (raw_cosine < high)
    cosine_grad = np.where(active, -angle_grad / np.sqrt(1.0 - cosine ** 2), 0.0)[..., None]
    inverse = 1.0 / (safe_u * safe_v)
    grad_u = cosine_grad * (v * inverse[..., None] - (raw_cosine / safe_u ** 2)[..., None] * u)
    grad_v = cosine_grad * (u * inverse[..., None] - (raw_cosine / safe_v ** 2)[..., None] * v)

    gradient = np.zeros_like(positions)
    np.add.at(gradient, (slice(None), topology.angle_first), grad_u)
    np.add.at(gradient, (slice(None), topology.angle_second), grad_v)
    np.add.at(gradient, (slice(None), topology.angle_centers), -(grad_u + grad_v))
    return LossTerm(value, gradient)


def speed_term(reference_speeds: np.ndarray, positions: np.ndarray) -> LossTerm:
    if positions.shape[0] < 2:
        raise ValidationError("motion too short for speed: need at least 2 frames")
    deltas = np.diff(positions, axis=0)
    speeds = np.linalg.norm(deltas, axis=-1)
    value, speed_grad = relative_deviation(reference_speeds, speeds)
    delta_grad = speed_grad[..., None] * _safe_unit(deltas, speeds)

    gradient = np.zeros_like(positions)
    gradient[1:] += delta_grad
    gradient[:-1] -= delta_grad
    return LossTerm(value, gradient)


def _pair(original: SkeletonMotion, adversarial: MotionLike) -> np.ndarray:
    positions = as_positions(adversarial)
    if positions.shape != original.shape:
        raise ValidationError(f"adversarial shape {positions.shape} does not match original {original.shape}")
    return positions


def bone_length_loss(original: SkeletonMotion, adversarial: MotionLike) -> LossTerm:
    """b(x, x'): mean relative bone-length deviation and its gradient in x'."""
    positions = _pair(original, adversarial)
    reference = bone_lengths_from_positions(original.positions, original.topology)
    return bone_length_term(reference, positions, original.topology)


def angle_loss(original: SkeletonMotion, adversarial: MotionLike) -> LossTerm:
    """a(x, x'): mean relative bone-angle deviation and its gradient in x'."""
    positions = _pair(original, adversarial)
    reference, _ = bone_angles_from_positions(original.positions, original.topology)
    return angle_term(reference, positions, original.topology)


def speed_loss(original: SkeletonMotion, adversarial: MotionLike) -> LossTerm:
    """s(x, x'): mean relative joint-speed deviation and its gradient in x'."""
    positions = _pair(original, adversarial)
    reference = joint_speeds_from_positions(original.positions)
    return speed_term(reference, positions)
