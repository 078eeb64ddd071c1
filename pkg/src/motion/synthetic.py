"""
Synthetic motion generator for desk-scale experiments.

Every class is a family of sinusoidal joint trajectories around a rest pose,
with its own per-joint, per-axis frequencies, phases and amplitudes. Samples
of a class differ by a small phase jitter, a small global offset and seeded
Gaussian noise.
"""

import logging

import numpy as np

from src.exceptions import ValidationError
from src.motion.dataset import MotionDataset, normalize_dataset
from src.motion.skeleton import SkeletonMotion
from src.motion.topology import SkeletonTopology, rest_pose

logger = logging.getLogger(__name__)


def _class_families(rng: np.random.Generator, class_count: int, joint_count: int) -> dict:
    """Frequencies (cycles per clip), phases and amplitudes per class, joint and axis."""
    shape = (class_count, joint_count, 3)
    return {
        "frequency": rng.integers(1, 4, size=shape).astype(np.float64) + rng.uniform(0.0, 0.5, size=shape),
        "phase": rng.uniform(0.0, 2.0 * np.pi, size=shape),
        "amplitude": rng.uniform(0.15, 0.45, size=shape),
    }


def generate_motion(
    rng: np.random.Generator,
    families: dict,
    class_index: int,
    base_pose: np.ndarray,
    frames: int,
    noise: float,
    phase_jitter: float,
) -> np.ndarray:
    """One T x J x 3 trajectory sampled from a class family."""
    t = np.arange(frames, dtype=np.float64)[:, None, None] / frames
    frequency = families["frequency"][class_index]
    phase = families["phase"][class_index] + rng.normal(0.0, phase_jitter, size=frequency.shape)
    amplitude = families["amplitude"][class_index]
    offset = rng.normal(0.0, 0.05, size=(1, 1, 3))

    positions = base_pose[None] + amplitude * np.sin(2.0 * np.pi * frequency * t + phase) + offset
    return positions + rng.normal(0.0, noise, size=positions.shape)


def generate_synthetic_dataset(
    seed: int,
    class_count: int,
    samples_per_class: int,
    frames: int,
    topology: SkeletonTopology,
    test_fraction: float = 0.1,
    noise: float = 0.01,
    phase_jitter: float = 0.1,
) -> MotionDataset:
    """
    Generate a normalized, labelled dataset of synthetic motions.

    Args:
        seed: Seed of the only random generator used
        class_count: Number of classes (at least 2)
        samples_per_class: Motions per class
        frames: Frames per motion
        topology: Skeleton topology shared by every motion
        test_fraction: Share of each class tagged 'test' (the last ones generated)
        noise: Standard deviation of per-coordinate Gaussian noise
        phase_jitter: Standard deviation of per-sample phase jitter (radians)

    Returns:
        MotionDataset normalized to [0, 1] with its transform attached
    """
    if class_count < 2:
        raise ValidationError(f"need at least 2 classes, got {class_count}")
    if samples_per_class < 1 or frames < 2:
        raise ValidationError("need at least one sample per class and two frames per motion")
    if not 0.0 <= test_fraction < 1.0:
        raise ValidationError(f"test fraction must lie in [0, 1), got {test_fraction}")

    rng = np.random.default_rng(seed)
    families = _class_families(rng, class_count, topology.joint_count)
    base_pose = rest_pose(topology, bone_length=1.0)
    test_per_class = int(round(samples_per_class * test_fraction))

    motions, splits = [], []
    for class_index in range(class_count):
        for sample in range(samples_per_class):
            positions = generate_motion(rng, families, class_index, base_pose, frames, noise, phase_jitter)
            motions.append(SkeletonMotion(topology, positions, label=class_index, name=f"c{class_index:02d}_s{sample:04d}"))
            splits.append("test" if sample >= samples_per_class - test_per_class else "train")

    raw = MotionDataset(motions, class_count, splits=splits)
    dataset, _ = normalize_dataset(raw)
    logger.info(
        f"Generated {len(dataset)} synthetic motions ({class_count} classes, {frames} frames, "
        f"{topology.joint_count} joints, seed {seed})"
    )
    return dataset
