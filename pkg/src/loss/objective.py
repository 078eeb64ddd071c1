"""
Total distance D and the augmented Lagrangian L used by the attack.

    D = w_b b + w_a a + w_s s + w_e e + w_l2 ||x - x'||^2
    L = D + λ C + (γ / 2) C^2
"""

import logging
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.classifier.emotion import EmotionExtractor
from src.classifier.models import ClassifierModel
from src.exceptions import ValidationError
from src.loss.constraint import ConstraintSpec, ConstraintValue, classification_constraint
from src.loss.dynamics_loss import LossTerm, angle_term, bone_length_term, speed_term
from src.motion.dynamics import bone_angles_from_positions, bone_lengths_from_positions, joint_speeds_from_positions
from src.motion.skeleton import MotionLike, SkeletonMotion, as_positions

logger = logging.getLogger(__name__)


class LossWeights(BaseModel):
    w_b: float = Field(1.0, ge=0.0, allow_inf_nan=False, description="Bone-length weight")
    w_a: float = Field(1.0, ge=0.0, allow_inf_nan=False, description="Angle weight")
    w_s: float = Field(1.0, ge=0.0, allow_inf_nan=False, description="Speed weight")
    w_e: float = Field(1.0, ge=0.0, allow_inf_nan=False, description="Emotion weight")
    w_l2: float = Field(0.0, ge=0.0, allow_inf_nan=False, description="Squared-l2 weight (baseline mode)")

    @classmethod
    def l2_only(cls) -> "LossWeights":
        """Weights of the C&W-style baseline: squared l2 distance only."""
        return cls(w_b=0.0, w_a=0.0, w_s=0.0, w_e=0.0, w_l2=1.0)

    @classmethod
    def parse(cls, text: str) -> "LossWeights":
        """Parse 'wb,wa,ws,we,wl2'."""
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 5:
            raise ValidationError(f"expected 5 comma-separated weights wb,wa,ws,we,wl2, got '{text}'")
        try:
            values = [float(p) for p in parts]
        except ValueError as e:
            raise ValidationError(f"weights must be numbers: '{text}'") from e
        return cls(w_b=values[0], w_a=values[1], w_s=values[2], w_e=values[3], w_l2=values[4])


class LossBreakdown(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    b: float = 0.0
    a: float = 0.0
    s: float = 0.0
    e: float = 0.0
    l2_term: float = 0.0
    D: float = 0.0
    C: float = 0.0
    L: float = 0.0
    gradient: np.ndarray = Field(..., description="dL/dx' (dD/dx' when no constraint is involved)")
    distance_gradient: Optional[np.ndarray] = Field(None, description="dD/dx'")
    constraint_gradient: Optional[np.ndarray] = Field(None, description="dC/dx'")
    logits: Optional[np.ndarray] = Field(None, description="Θ(x') when the constraint was evaluated")


def emotion_term(reference_features: np.ndarray, positions: np.ndarray, extractor: EmotionExtractor) -> LossTerm:
    difference = extractor.features(positions) - reference_features
    distance = float(np.linalg.norm(difference))
    if distance == 0.0:
        return LossTerm(0.0, np.zeros_like(positions))
    return LossTerm(distance, extractor.input_gradient(positions, difference / distance))


def emotion_loss(original: MotionLike, adversarial: MotionLike, extractor: EmotionExtractor) -> LossTerm:
    """e(x, x') = ||E(x) - E(x')||_2 with gradient in x' (0 where the features coincide)."""
    return emotion_term(extractor.features(original), as_positions(adversarial), extractor)


class DistanceModel:
    """
    The distance D(x, ·) for one fixed original x.

    Reference quantities of x (bone lengths, angles, speeds, emotion
    features) are computed once. Terms with zero weight are skipped.
    """

    def __init__(self, original: SkeletonMotion, weights: LossWeights, extractor: Optional[EmotionExtractor] = None):
        if weights.w_e > 0.0 and extractor is None:
            raise ValidationError("an emotion extractor is required when w_e > 0")
        self.original = original
        self.weights = weights
        self.extractor = extractor
        self.topology = original.topology
        self.reference_lengths = bone_lengths_from_positions(original.positions, self.topology)
        self.reference_angles, _ = bone_angles_from_positions(original.positions, self.topology)
        self.reference_speeds = joint_speeds_from_positions(original.positions) if original.frame_count > 1 else None
        self.reference_features = extractor.features(original.positions) if extractor is not None else None

    def evaluate(self, adversarial: MotionLike) -> LossBreakdown:
        positions = as_positions(adversarial)
        if positions.shape != self.original.shape:
            raise ValidationError(f"adversarial shape {positions.shape} does not match original {self.original.shape}")
        w = self.weights
        gradient = np.zeros_like(positions)
        values = {"b": 0.0, "a": 0.0, "s": 0.0, "e": 0.0, "l2_term": 0.0}

        if w.w_b > 0.0:
            term = bone_length_term(self.reference_lengths, positions, self.topology)
            values["b"] = term.value
            gradient += w.w_b * term.gradient
        if w.w_a > 0.0:
            term = angle_term(self.reference_angles, positions, self.topology)
            values["a"] = term.value
            gradient += w.w_a * term.gradient
        if w.w_s > 0.0:
            if self.reference_speeds is None:
                raise ValidationError("motion too short for speed: need at least 2 frames")
            term = speed_term(self.reference_speeds, positions)
            values["s"] = term.value
            gradient += w.w_s * term.gradient
        if w.w_e > 0.0:
            term = emotion_term(self.reference_features, positions, self.extractor)
            values["e"] = term.value
            gradient += w.w_e * term.gradient
        if w.w_l2 > 0.0:
            difference = positions - self.original.positions
            values["l2_term"] = float(np.sum(difference * difference))
            gradient += w.w_l2 * 2.0 * difference

        distance = (
            w.w_b * values["b"] + w.w_a * values["a"] + w.w_s * values["s"]
            + w.w_e * values["e"] + w.w_l2 * values["l2_term"]
        )
        return LossBreakdown(**values, D=distance, L=distance, gradient=gradient, distance_gradient=gradient)


def total_distance(
    original: SkeletonMotion,
    adversarial: MotionLike,
    weights: LossWeights,
    extractor: Optional[EmotionExtractor] = None,
) -> Tuple[float, np.ndarray, LossBreakdown]:
    """
    Weighted distance D(x, x') with its gradient and per-term breakdown.
    """
    breakdown = DistanceModel(original, weights, extractor).evaluate(adversarial)
    return breakdown.D, breakdown.gradient, breakdown


def combine_lagrangian(distance: LossBreakdown, constraint: ConstraintValue, multiplier: float, gamma: float) -> LossBreakdown:
    """L = D + λC + (γ/2)C² and ∇L = ∇D + (λ + γC)∇C from already evaluated parts."""
    if multiplier < 0.0 or gamma <= 0.0:
        raise ValidationError(f"need λ >= 0 and γ > 0, got λ={multiplier}, γ={gamma}")
    c = constraint.value
    lagrangian = distance.D + multiplier * c + 0.5 * gamma * c * c
    gradient = distance.distance_gradient + (multiplier + gamma * c) * constraint.gradient
    return distance.model_copy(
        update={
            "C": c,
            "L": lagrangian,
            "gradient": gradient,
            "constraint_gradient": constraint.gradient,
            "logits": constraint.logits,
        }
    )


def augmented_lagrangian(
    original: SkeletonMotion,
    adversarial: MotionLike,
    multiplier: float,
    gamma: float,
    weights: LossWeights,
    spec: ConstraintSpec,
    model: ClassifierModel,
    extractor: Optional[EmotionExtractor] = None,
) -> LossBreakdown:
    """
    Evaluate L(x', λ) with all parts and its gradient in x'.
    """
    distance = DistanceModel(original, weights, extractor).evaluate(adversarial)
    constraint = classification_constraint(adversarial, model, spec)
    return combine_lagrangian(distance, constraint, multiplier, gamma)
