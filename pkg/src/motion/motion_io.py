"""
JSON persistence for motions and datasets.

Motion file:
    {"name", "label", "joints", "frames", "bones", "positions"}
Dataset file:
    {"class_count", "normalization": {"offset", "scale"}, "motions": [...]}
Dataset motions may carry an extra "split" key ("train" or "test").
"""

import json
import logging
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from pydantic import ValidationError as PydanticValidationError

from src.exceptions import MotionFormatError, ValidationError
from src.motion.dataset import MotionDataset, NormalizationTransform
from src.motion.skeleton import SkeletonMotion
from src.motion.topology import SkeletonTopology
from src.utils.files import PathLike, atomic_write_json

logger = logging.getLogger(__name__)


class MotionRecord(BaseModel):
    model_config = ConfigDict(extra="allow")

    name: Optional[str] = Field(None, description="Motion name")
    label: Optional[int] = Field(None, ge=0, description="Class index")
    joints: int = Field(..., ge=1, description="Joint count J")
    frames: int = Field(..., ge=1, description="Frame count T")
    bones: List[Tuple[int, int]] = Field(..., description="Bone edges (source, target)")
    positions: List[List[Tuple[float, float, float]]] = Field(..., description="T x J x 3 coordinates")


class NormalizationRecord(BaseModel):
    offset: Tuple[float, float, float]
    scale: Tuple[float, float, float]


class DatasetRecord(BaseModel):
    model_config = ConfigDict(extra="allow")

    class_count: int = Field(..., ge=1, description="Number of classes")
    normalization: NormalizationRecord
    motions: List[MotionRecord]


def _field_path(loc) -> str:
    return ".".join(str(part) for part in loc)


def _parse(record_type, payload, path):
    try:
        return record_type.model_validate(payload)
    except PydanticValidationError as e:
        first = e.errors()[0]
        raise MotionFormatError(first["msg"], path=path, field=_field_path(first["loc"])) from e


def _read_json(path: PathLike):
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return json.load(handle)
    except FileNotFoundError:
        logger.error(f"Motion file not found: {path}")
        raise
    except json.JSONDecodeError as e:
        raise MotionFormatError(f"malformed JSON ({e.msg} at line {e.lineno})", path=path) from e


def motion_to_dict(motion: SkeletonMotion) -> dict:
    return {
        "name": motion.name,
        "label": motion.label,
        "joints": motion.joint_count,
        "frames": motion.frame_count,
        "bones": [list(bone) for bone in motion.topology.bones],
        "positions": motion.positions.tolist(),
    }


def motion_from_record(
    record: MotionRecord,
    path: PathLike = None,
    field: str = "",
    topology: Optional[SkeletonTopology] = None,
) -> SkeletonMotion:
    """Check the file-level invariants of a parsed record and build the motion."""
    prefix = f"{field}." if field else ""
    if len(record.positions) != record.frames:
        raise MotionFormatError(
            f"frame count mismatch: frames is {record.frames} but positions has {len(record.positions)} rows",
            path=path,
            field=f"{prefix}positions",
        )
    for t, frame in enumerate(record.positions):
        if len(frame) != record.joints:
            raise MotionFormatError(
                f"joint count mismatch: joints is {record.joints} but frame {t} has {len(frame)} entries",
                path=path,
                field=f"{prefix}positions.{t}",
            )
    for index, (source, target) in enumerate(record.bones):
        if source == target:
            raise MotionFormatError(f"self-loop bone ({source}, {target})", path=path, field=f"{prefix}bones.{index}")
        if not (0 <= source < record.joints and 0 <= target < record.joints):
            raise MotionFormatError(
                f"bone joint index out of range [0, {record.joints})", path=path, field=f"{prefix}bones.{index}"
            )
    try:
        if topology is None or topology.bones != tuple(record.bones) or topology.joint_count != record.joints:
            topology = SkeletonTopology(record.joints, record.bones)
        return SkeletonMotion(topology, np.array(record.positions, dtype=np.float64), record.label, record.name)
    except ValidationError as e:
        raise MotionFormatError(str(e), path=path, field=field or None) from e


def save_motion(motion: SkeletonMotion, path: PathLike) -> Path:
    """Write a motion as JSON (full double precision)."""
    written = atomic_write_json(path, motion_to_dict(motion))
    logger.info(f"Saved motion {motion.name or ''} to {written}")
    return written


def load_motion(path: PathLike) -> SkeletonMotion:
    """
    Read and validate a motion file.

    Raises:
        MotionFormatError: malformed JSON, shape mismatch or invalid topology
    """
    record = _parse(MotionRecord, _read_json(path), path)
    return motion_from_record(record, path)


def dataset_to_dict(dataset: MotionDataset) -> dict:
    motions = []
    for motion, split in zip(dataset.motions, dataset.splits):
        entry = motion_to_dict(motion)
        entry["split"] = split
        motions.append(entry)
    return {
        "class_count": dataset.class_count,
        "normalization": dataset.normalization.to_dict(),
        "motions": motions,
    }


def save_dataset(dataset: MotionDataset, path: PathLike) -> Path:
    written = atomic_write_json(path, dataset_to_dict(dataset))
    logger.info(f"Saved dataset with {len(dataset)} motions to {written}")
    return written


def load_dataset(path: PathLike) -> MotionDataset:
    """
    Read and validate a dataset file.

    Raises:
        MotionFormatError: any schema or invariant violation, with the field path
    """
    payload = _read_json(path)
    record = _parse(DatasetRecord, payload, path)
    motions, splits = [], []
    topology = None
    for index, motion_record in enumerate(record.motions):
        motion = motion_from_record(motion_record, path, field=f"motions.{index}", topology=topology)
        topology = motion.topology
        motions.append(motion)
        splits.append((motion_record.model_extra or {}).get("split", "train"))
    try:
        normalization = NormalizationTransform(record.normalization.offset, record.normalization.scale)
        dataset = MotionDataset(motions, record.class_count, normalization, splits)
    except ValidationError as e:
        raise MotionFormatError(str(e), path=path) from e
    logger.info(f"Loaded dataset with {len(dataset)} motions from {path}")
    return dataset
