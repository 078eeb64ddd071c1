"""
Imperceptibility and misclassification metrics over (original, adversarial) pairs.

Per sample, with T frames, E bones, P angle pairs, J joints:
    dBB = mean_{t,i} |B - B'| / max(B, EPS_DEN)
    dAA = mean_{t,k} |A - A'| / max(A, EPS_DEN)
    dSS = ||S - S'||_2 / ((T - 1) J)          (norm over all speed entries)
    l2  = sum_t ||x_t - x'_t||_2 / T          (norm over one frame's coordinates)
Batch values are the means of the per-sample values.
"""

import logging
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

from config.settings import EPS_DEN
from src.exceptions import ValidationError
from src.motion.dynamics import bone_angles_from_positions, bone_lengths_from_positions, joint_speeds_from_positions
from src.motion.skeleton import MotionLike, SkeletonMotion, as_positions

logger = logging.getLogger(__name__)

Pair = Tuple[SkeletonMotion, MotionLike]


class SampleMetrics(BaseModel):
    dBB: float = Field(..., ge=0.0, description="Mean relative bone-length deviation")
    dAA: float = Field(..., ge=0.0, description="Mean relative bone-angle deviation")
    dSS: float = Field(..., ge=0.0, description="Normalized joint-speed deviation")
    l2: float = Field(..., ge=0.0, description="Frame-averaged l2 distance")
    success: Optional[bool] = Field(None, description="Attack goal reached")


def _relative_mean(reference: np.ndarray, current: np.ndarray) -> float:
    if reference.size == 0:
        return 0.0
    return float(np.mean(np.abs(reference - current) / np.maximum(reference, EPS_DEN)))


def _checked(pair: Pair) -> Tuple[SkeletonMotion, np.ndarray]:
    original, adversarial = pair
    if isinstance(adversarial, SkeletonMotion) and adversarial.topology != original.topology:
        raise ValidationError("original and adversarial motions have different topologies")
    positions = as_positions(adversarial)
    if positions.shape != original.shape:
        raise ValidationError(f"pair shape mismatch: {original.shape} vs {positions.shape}")
    return original, positions


def sample_bone_deviation(pair: Pair) -> float:
    original, positions = _checked(pair)
    topology = original.topology
    return _relative_mean(
        bone_lengths_from_positions(original.positions, topology), bone_lengths_from_positions(positions, topology)
    )


def sample_angle_deviation(pair: Pair) -> float:
    original, positions = _checked(pair)
    reference, _ = bone_angles_from_positions(original.positions, original.topology)
    current, _ = bone_angles_from_positions(positions, original.topology)
    return _relative_mean(reference, current)


def sample_speed_deviation(pair: Pair) -> float:
    original, positions = _checked(pair)
    reference = joint_speeds_from_positions(original.positions)
    current = joint_speeds_from_positions(positions)
    return float(np.linalg.norm(reference - current)) / reference.size


def sample_l2(pair: Pair) -> float:
    original, positions = _checked(pair)
    per_frame = np.linalg.norm((original.positions - positions).reshape(original.frame_count, -1), axis=1)
    return float(per_frame.sum()) / original.frame_count


def sample_metrics(original: SkeletonMotion, adversarial: MotionLike, success: Optional[bool] = None) -> SampleMetrics:
    pair = (original, adversarial)
    return SampleMetrics(
        dBB=sample_bone_deviation(pair),
        dAA=sample_angle_deviation(pair),
        dSS=sample_speed_deviation(pair),
        l2=sample_l2(pair),
        success=success,
    )


def _batch_mean(values: List[float]) -> float:
    return float(np.mean(values)) if values else 0.0


def delta_b_over_b(pairs: Sequence[Pair]) -> float:
    """ΔB/B over a batch."""
    return _batch_mean([sample_bone_deviation(p) for p in pairs])


def delta_a_over_a(pairs: Sequence[Pair]) -> float:
    """ΔA/A over a batch."""
    return _batch_mean([sample_angle_deviation(p) for p in pairs])


def delta_s_over_s(pairs: Sequence[Pair]) -> float:
    """ΔS/S over a batch: sum of speed-deviation norms divided by (F N O)."""
    return _batch_mean([sample_speed_deviation(p) for p in pairs])


def l2_metric(pairs: Sequence[Pair]) -> float:
    """l2 over a batch: sum of per-frame deviation norms divided by (F N)."""
    return _batch_mean([sample_l2(p) for p in pairs])


def is_success(predicted: int, true_label: int, mode: str, target_label: Optional[int] = None) -> bool:
    if mode == "targeted":
        return predicted == target_label
    return predicted != true_label


def success_rate(records: Iterable, mode: str) -> float:
    """
    Share of records meeting the attack goal.

    Args:
        records: Objects with predicted_label, true_label and target_label attributes
        mode: 'untargeted' (predicted != true) or 'targeted' (predicted == target)
    """
    records = list(records)
    if not records:
        raise ValidationError("success rate of an empty batch is undefined")
    mode = getattr(mode, "value", mode)
    hits = [is_success(r.predicted_label, r.true_label, mode, r.target_label) for r in records]
    return float(np.mean(hits))
