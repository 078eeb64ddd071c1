"""
Classification constraint C: a hinge that is zero exactly when the attack
goal holds with a logit margin of at least conf.

    untargeted: C = max(0, Θ_l(x') - max_{j != l} Θ_j(x') + conf)
    targeted:   C = max(0, max_{j != l_t} Θ_j(x') - Θ_{l_t}(x') + conf)
"""

from enum import Enum
from typing import NamedTuple, Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator

from src.classifier.models import ClassifierModel
from src.exceptions import ValidationError
from src.motion.skeleton import MotionLike


class AttackMode(str, Enum):
    UNTARGETED = "untargeted"
    TARGETED = "targeted"


class ConstraintSpec(BaseModel):
    mode: AttackMode = Field(AttackMode.UNTARGETED, description="Attack goal")
    true_label: int = Field(..., ge=0, description="Ground-truth class l")
    target_label: Optional[int] = Field(None, ge=0, description="Target class l_t (targeted mode)")
    conf: float = Field(0.0, ge=0.0, allow_inf_nan=False, description="Required logit margin")

    @model_validator(mode="after")
    def _check_target(self):
        if self.mode == AttackMode.TARGETED:
            if self.target_label is None:
                raise ValueError("targeted mode requires a target label")
            if self.target_label == self.true_label:
                raise ValueError("target equals true label")
        return self

    def with_conf(self, conf: float) -> "ConstraintSpec":
        return self.model_copy(update={"conf": conf})


class ConstraintValue(NamedTuple):
    value: float
    gradient: np.ndarray
    logits: np.ndarray
    rival: int


def strongest_other(logits: np.ndarray, excluded: int) -> int:
    """Index of the largest logit other than `excluded`; ties go to the lowest index."""
    masked = np.array(logits, dtype=np.float64)
    masked[excluded] = -np.inf
    return int(np.argmax(masked))


def hinge_from_logits(logits: np.ndarray, spec: ConstraintSpec):
    """
    Constraint value and its cotangent on the logits.

    Returns:
        (C, cotangent, rival index)
    """
    class_count = len(logits)
    anchor = spec.true_label if spec.mode == AttackMode.UNTARGETED else spec.target_label
    if anchor is None:
        raise ValidationError("targeted mode requires a target label")
    if anchor >= class_count or spec.true_label >= class_count:
        raise ValidationError(f"label outside [0, {class_count})")
    rival = strongest_other(logits, anchor)
    if spec.mode == AttackMode.UNTARGETED:
        margin = logits[anchor] - logits[rival] + spec.conf
        sign = 1.0
    else:
        margin = logits[rival] - logits[anchor] + spec.conf
        sign = -1.0

    cotangent = np.zeros(class_count)
    if margin > 0.0:
        cotangent[anchor] = sign
        cotangent[rival] = -sign
    return max(0.0, float(margin)), cotangent, rival


def classification_constraint(adversarial: MotionLike, model: ClassifierModel, spec: ConstraintSpec) -> ConstraintValue:
    """
    Evaluate C at x' with its exact gradient (zero when C = 0).

    Args:
        adversarial: Candidate motion x'
        model: Victim classifier
        spec: Mode, labels and margin

    Returns:
        ConstraintValue(value, gradient, logits, rival)
    """
    logits = model.forward(adversarial)
    value, cotangent, rival = hinge_from_logits(logits, spec)
    if value > 0.0:
        gradient = model.input_gradient(adversarial, cotangent)
    else:
        gradient = np.zeros(model.input_shape)
    return ConstraintValue(value, gradient, logits, rival)


def goal_reached(logits: np.ndarray, spec: ConstraintSpec) -> bool:
    """Whether the predicted label alone meets the attack goal."""
    predicted = int(np.argmax(logits))
    if spec.mode == AttackMode.UNTARGETED:
        return predicted != spec.true_label
    return predicted == spec.target_label
