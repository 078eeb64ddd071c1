"""
Adam with bias-corrected moments, on plain numpy arrays.

Used both for the attack's inner minimization over coordinates and for
full-batch classifier training over parameters.
"""

from typing import Dict

import numpy as np


class AdamState:
    """First and second moment estimates of one array plus the step counter."""

    def __init__(self, shape):
        self.first_moment = np.zeros(shape)
        self.second_moment = np.zeros(shape)
        self.step = 0

    @property
    def shape(self):
        return self.first_moment.shape


def adam_step(
    state: AdamState,
    gradient: np.ndarray,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> np.ndarray:
    """
    Advance the moment estimates by one gradient and return the update.

    Args:
        state: Moments for the array being optimized; updated in place
        gradient: Gradient of the objective, same shape as the moments
        lr: Step size

    Returns:
        The delta to add to the array (a descent step)
    """
    if gradient.shape != state.shape:
        raise ValueError(f"gradient shape {gradient.shape} does not match Adam state {state.shape}")
    state.step += 1
    state.first_moment = beta1 * state.first_moment + (1.0 - beta1) * gradient
    state.second_moment = beta2 * state.second_moment + (1.0 - beta2) * gradient * gradient
    first_hat = state.first_moment / (1.0 - beta1 ** state.step)
    second_hat = state.second_moment / (1.0 - beta2 ** state.step)
    return -lr * first_hat / (np.sqrt(second_hat) + eps)


class AdamOptimizer:
    """One AdamState per named parameter array."""

    def __init__(self, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.states: Dict[str, AdamState] = {}

    def update(self, params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray]) -> Dict[str, np.ndarray]:
        """Return updated copies of the parameters."""
        updated = {}
        for key, value in params.items():
            if key not in self.states:
                self.states[key] = AdamState(value.shape)
            updated[key] = value + adam_step(self.states[key], grads[key], self.lr, self.beta1, self.beta2, self.eps)
        return updated
