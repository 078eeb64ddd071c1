"""
JSON persistence for classifiers and emotion extractors.

    {"kind": "mlp" | "linear" | "emotion", "class_count", "input": {"frames", "joints"},
     "layers": [{"w", "b", "activation"}], "groups": [[...]] | null, "seed"}

For an emotion extractor class_count holds its feature dimension.
"""

import json
import logging
from typing import List, Literal, Optional, Union

from pydantic import BaseModel, Field
from pydantic import ValidationError as PydanticValidationError

from src.classifier.emotion import GroupedEmotionExtractor
from src.classifier.models import ClassifierModel, DenseClassifier, LinearClassifier, MlpClassifier
from src.classifier.network import DenseLayer
from src.exceptions import ModelFormatError, ValidationError
from src.motion.dataset import MotionDataset
from src.utils.files import PathLike, atomic_write_json

logger = logging.getLogger(__name__)


class InputShapeRecord(BaseModel):
    frames: int = Field(..., ge=1)
    joints: int = Field(..., ge=1)


class LayerRecord(BaseModel):
    w: List[List[float]]
    b: List[float]
    activation: Literal["tanh", "none"]


class ModelRecord(BaseModel):
    kind: Literal["mlp", "linear", "emotion"]
    class_count: int = Field(..., ge=1)
    input: InputShapeRecord
    layers: List[LayerRecord] = Field(..., min_length=1)
    groups: Optional[List[List[int]]] = None
    seed: Optional[int] = None


AnyModel = Union[DenseClassifier, GroupedEmotionExtractor]


def model_to_dict(model: AnyModel) -> dict:
    if isinstance(model, GroupedEmotionExtractor):
        class_count, groups = model.feature_dim, model.groups
    else:
        class_count, groups = model.class_count, None
    return {
        "kind": model.kind,
        "class_count": class_count,
        "input": {"frames": model.frames, "joints": model.joints},
        "layers": [layer.to_dict() for layer in model.layers],
        "groups": groups,
        "seed": model.seed,
    }


def save_model(model: AnyModel, path: PathLike):
    written = atomic_write_json(path, model_to_dict(model))
    logger.info(f"Saved {model.kind} model to {written}")
    return written


def load_model(path: PathLike) -> AnyModel:
    """
    Read a classifier or emotion extractor.

    Raises:
        ModelFormatError: truncated/malformed JSON or any schema violation
    """
    try:
        with open(path, "r", encoding="utf-8") as handle:
            payload = json.load(handle)
    except json.JSONDecodeError as e:
        raise ModelFormatError(f"malformed JSON ({e.msg} at line {e.lineno})", path=path) from e
    try:
        record = ModelRecord.model_validate(payload)
    except PydanticValidationError as e:
        first = e.errors()[0]
        raise ModelFormatError(first["msg"], path=path, field=".".join(str(p) for p in first["loc"])) from e

    frames, joints = record.input.frames, record.input.joints
    try:
        layers = [DenseLayer(layer.w, layer.b, layer.activation) for layer in record.layers]
        if record.kind == "emotion":
            if record.groups is None:
                raise ModelFormatError("emotion extractor needs joint groups", path=path, field="groups")
            model = GroupedEmotionExtractor(record.groups, layers, frames, joints, record.seed)
            produced = model.feature_dim
        elif record.kind == "linear":
            if len(layers) != 1:
                raise ModelFormatError("a linear classifier has exactly one layer", path=path, field="layers")
            model = LinearClassifier(layers[0].weight, layers[0].bias, frames, joints, record.seed)
            produced = model.class_count
        else:
            model = MlpClassifier(layers, frames, joints, record.seed)
            produced = model.class_count
    except ModelFormatError:
        raise
    except ValidationError as e:
        raise ModelFormatError(str(e), path=path, field="layers") from e

    if produced != record.class_count:
        raise ModelFormatError(f"layers produce {produced} outputs but class_count is {record.class_count}", path=path, field="class_count")
    logger.info(f"Loaded {record.kind} model from {path}")
    return model


def check_model_matches_dataset(model: ClassifierModel, dataset: MotionDataset) -> None:
    """Raise ValidationError unless the model can classify the dataset's motions."""
    if model.class_count != dataset.class_count:
        raise ValidationError(f"model has {model.class_count} classes but dataset has {dataset.class_count}")
    if dataset.motions and dataset.motions[0].shape != model.input_shape:
        raise ValidationError(f"model input {model.input_shape} does not match motion shape {dataset.motions[0].shape}")
