"""
Augmented-Lagrangian attack on a skeletal-motion classifier.

Starting from x'_0 = x, every outer iteration takes K Adam steps on
L(x', λ) = D(x, x') + λ C(x') + (γ/2) C(x')², projecting x' onto [0, 1]
after each step, then ascends the multiplier: λ <- λ + γ C(x').
Among all iterates that reach the attack goal, the one with the smallest
D is returned.
"""

import logging
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from config.settings import EPS_DEN
from src.attack.adam import AdamState, adam_step
from src.classifier.emotion import EmotionExtractor
from src.classifier.models import ClassifierModel
from src.exceptions import AttackError, ValidationError
from src.loss.constraint import AttackMode, ConstraintSpec, classification_constraint, goal_reached
from src.loss.objective import DistanceModel, LossWeights, combine_lagrangian
from src.metrics.imperceptibility import SampleMetrics, sample_metrics
from src.motion.skeleton import SkeletonMotion

logger = logging.getLogger(__name__)


class AttackConfig(BaseModel):
    mode: AttackMode = Field(AttackMode.UNTARGETED, description="untargeted or targeted")
    target_label: Optional[int] = Field(None, ge=0, description="Target class for targeted mode")
    conf: float = Field(0.0, ge=0.0, allow_inf_nan=False, description="Required logit margin")
    gamma: float = Field(1.0, gt=0.0, allow_inf_nan=False, description="Penalty weight γ")
    iterations: int = Field(1000, ge=1, description="Outer iterations I")
    inner_steps: int = Field(1, ge=1, description="Adam steps K per multiplier update")
    lr: float = Field(5e-3, gt=0.0, description="Adam step size")
    lambda0: float = Field(0.0, ge=0.0, allow_inf_nan=False, description="Initial multiplier")
    weights: LossWeights = Field(default_factory=LossWeights)
    beta1: float = Field(0.9, ge=0.0, lt=1.0)
    beta2: float = Field(0.999, ge=0.0, lt=1.0)
    eps_adam: float = Field(1e-8, gt=0.0)
    eps_s_cap: Optional[float] = Field(None, ge=0.0, description="Optional cap on relative speed change")
    init_noise: float = Field(0.0, ge=0.0, description="σ of seeded Gaussian noise added to x'_0")
    patience: Optional[int] = Field(None, ge=0, description="Stop this many iterations after first success")
    force: bool = Field(False, description="Attack samples the model already misclassifies")
    seed: int = Field(0, description="Seed of the per-attack random generator")
    record_trace: bool = Field(False, description="Keep (λ, C, D, L) per iteration")

    @model_validator(mode="after")
    def _check_target(self):
        if self.mode == AttackMode.TARGETED and self.target_label is None:
            raise ValueError("targeted mode requires a target label")
        return self

    def constraint_for(self, true_label: int, conf: Optional[float] = None) -> ConstraintSpec:
        return ConstraintSpec(
            mode=self.mode,
            true_label=true_label,
            target_label=self.target_label if self.mode == AttackMode.TARGETED else None,
            conf=self.conf if conf is None else conf,
        )


class TraceEntry(BaseModel):
    iteration: int
    multiplier: float
    C: float
    D: float
    L: float


class AttackResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    name: Optional[str] = None
    sample_index: Optional[int] = None
    original: Optional[SkeletonMotion] = Field(None, exclude=True)
    adversarial: Optional[SkeletonMotion] = Field(None, exclude=True)
    mode: AttackMode = AttackMode.UNTARGETED
    true_label: Optional[int] = None
    target_label: Optional[int] = None
    clean_label: Optional[int] = None
    predicted_label: Optional[int] = None
    success: bool = False
    iterations_run: int = 0
    first_success_iteration: Optional[int] = None
    best_iteration: Optional[int] = None
    final_multiplier: float = 0.0
    best_distance: Optional[float] = None
    logits: List[float] = Field(default_factory=list, description="Θ of the returned motion")
    metrics: Optional[SampleMetrics] = None
    trace: List[TraceEntry] = Field(default_factory=list)
    error: Optional[str] = None


def project_box(positions: np.ndarray) -> np.ndarray:
    """Clamp every coordinate to [0, 1]."""
    return np.clip(positions, 0.0, 1.0)


def dual_update(multiplier: float, gamma: float, constraint_value: float) -> float:
    """λ' = λ + γ C."""
    return multiplier + gamma * constraint_value


def _relative_speed_change(original: np.ndarray, adversarial: np.ndarray) -> np.ndarray:
    reference = np.linalg.norm(np.diff(original, axis=0), axis=-1)
    current = np.linalg.norm(np.diff(adversarial, axis=0), axis=-1)
    return np.abs(reference - current) / np.maximum(reference, EPS_DEN)


def apply_speed_cap(original: np.ndarray, adversarial: np.ndarray, cap: Optional[float], rounds: int = 20) -> np.ndarray:
    """
    Shrink the perturbation until every relative speed change is at most `cap`.

    Each round halves the displacement from the original at both frames of
    every violating (interval, joint) entry. Joints still violating after
    `rounds` rounds are reset to the original trajectory.
    """
    if cap is None or not np.isfinite(cap) or original.shape[0] < 2:
        return adversarial
    capped = np.array(adversarial, dtype=np.float64)
    for _ in range(rounds):
        violating = _relative_speed_change(original, capped) > cap
        if not violating.any():
            return capped
        frames = np.zeros(capped.shape[:2], dtype=bool)
        frames[:-1] |= violating
        frames[1:] |= violating
        capped[frames] = original[frames] + 0.5 * (capped[frames] - original[frames])
    stubborn = (_relative_speed_change(original, capped) > cap).any(axis=0)
    if stubborn.any():
        logger.debug(f"Resetting {int(stubborn.sum())} joints to the original trajectory to honor the speed cap")
        capped[:, stubborn] = original[:, stubborn]
    return capped


def _resolve_labels(original: SkeletonMotion, model: ClassifierModel, config: AttackConfig):
    clean_logits = model.forward(original)
    clean_label = int(np.argmax(clean_logits))
    true_label = original.label if original.label is not None else clean_label
    if not 0 <= true_label < model.class_count:
        raise ValidationError(f"true label {true_label} outside [0, {model.class_count})")
    if config.mode == AttackMode.TARGETED:
        if config.target_label >= model.class_count:
            raise ValidationError(f"target label {config.target_label} outside [0, {model.class_count})")
        if config.target_label == true_label:
            raise AttackError("target equals true label")
    elif clean_label != true_label and not config.force:
        raise AttackError(f"already misclassified: clean prediction {clean_label}, label {true_label}")
    return true_label, clean_label


def run_attack(
    original: SkeletonMotion,
    model: ClassifierModel,
    extractor: Optional[EmotionExtractor],
    config: AttackConfig,
) -> AttackResult:
    """
    Search for the least-distance motion that meets the attack goal.

    Args:
        original: Normalized motion x in [0, 1]
        model: Victim classifier
        extractor: Emotion feature extractor (may be None when w_e = 0)
        config: Solver settings

    Returns:
        AttackResult holding the best successful iterate, or the final
        iterate with success = False
    """
    if original.shape != model.input_shape:
        raise ValidationError(f"motion shape {original.shape} does not match model input {model.input_shape}")
    if not original.in_unit_box():
        raise ValidationError("attack input must be normalized to [0, 1]")

    true_label, clean_label = _resolve_labels(original, model, config)
    spec = config.constraint_for(true_label)
    success_spec = config.constraint_for(true_label, conf=0.0)
    distance_model = DistanceModel(original, config.weights, extractor)
    rng = np.random.default_rng(config.seed)

    x_adv = np.array(original.positions)
    if config.init_noise > 0.0:
        x_adv = project_box(x_adv + rng.normal(0.0, config.init_noise, size=x_adv.shape))
    multiplier = config.lambda0
    adam = AdamState(x_adv.shape)

    distance = distance_model.evaluate(x_adv)
    constraint = classification_constraint(x_adv, model, spec)
    state = combine_lagrangian(distance, constraint, multiplier, config.gamma)

    best_positions, best_distance, best_iteration, best_logits = None, None, None, None
    first_success = None
    trace = []

    def consider(iteration: int):
        nonlocal best_positions, best_distance, best_iteration, best_logits, first_success
        # argmax decides, as in success_rate; on an exact tie argmax takes the lowest index while C(conf=0) is already 0
        if not goal_reached(state.logits, success_spec):
            return
        if first_success is None:
            first_success = iteration
        if best_distance is None or state.D < best_distance:
            best_positions, best_distance, best_iteration, best_logits = x_adv.copy(), state.D, iteration, state.logits

    consider(0)
    if config.record_trace:
        trace.append(TraceEntry(iteration=0, multiplier=multiplier, C=state.C, D=state.D, L=state.L))

    iterations_run = 0
    for iteration in range(1, config.iterations + 1):
        for step in range(config.inner_steps):
            if step > 0:
                distance = distance_model.evaluate(x_adv)
                constraint = classification_constraint(x_adv, model, spec)
                state = combine_lagrangian(distance, constraint, multiplier, config.gamma)
            delta = adam_step(adam, state.gradient, config.lr, config.beta1, config.beta2, config.eps_adam)
            x_adv = project_box(x_adv + delta)
            if config.eps_s_cap is not None:
                x_adv = apply_speed_cap(original.positions, x_adv, config.eps_s_cap)

        distance = distance_model.evaluate(x_adv)
        constraint = classification_constraint(x_adv, model, spec)
        state = combine_lagrangian(distance, constraint, multiplier, config.gamma)
        iterations_run = iteration
        consider(iteration)

        multiplier = dual_update(multiplier, config.gamma, constraint.value)
        if config.record_trace:
            trace.append(TraceEntry(iteration=iteration, multiplier=multiplier, C=state.C, D=state.D, L=state.L))
        # gradient at the same x' under the updated multiplier, for the next Adam step
        state = combine_lagrangian(distance, constraint, multiplier, config.gamma)

        if iteration % 200 == 0:
            logger.debug(f"{original.name or 'sample'} iteration {iteration}: C={constraint.value:.4g} D={state.D:.4g} λ={multiplier:.4g}")
        if config.patience is not None and first_success is not None and iteration - first_success >= config.patience:
            break

    success = best_positions is not None
    final_positions = best_positions if success else x_adv
    final_logits = best_logits if success else state.logits
    adversarial = original.with_positions(final_positions)
    return AttackResult(
        name=original.name,
        original=original,
        adversarial=adversarial,
        mode=config.mode,
        true_label=true_label,
        target_label=spec.target_label,
        clean_label=clean_label,
        predicted_label=int(np.argmax(final_logits)),
        success=success,
        iterations_run=iterations_run,
        first_success_iteration=first_success,
        best_iteration=best_iteration,
        final_multiplier=multiplier,
        best_distance=best_distance if success else state.D,
        logits=[float(v) for v in final_logits],
        metrics=sample_metrics(original, adversarial, success),
        trace=trace,
    )
