"""
Central finite differences, the independent oracle for analytic gradients.
"""

from typing import Callable, Iterable, Optional, Tuple

import numpy as np


def finite_difference_gradient(
    func: Callable[[np.ndarray], float],
    x: np.ndarray,
    h: float = 1e-5,
    coordinates: Optional[Iterable[Tuple[int, ...]]] = None,
) -> np.ndarray:
    """
    Approximate the gradient of a scalar function by central differences.

    Args:
        func: Scalar function of an array shaped like x
        x: Point of evaluation (not modified)
        h: Step size, must be positive
        coordinates: Optional subset of multi-indices to probe; the others stay 0

    Returns:
        Array shaped like x with (f(x + h e) - f(x - h e)) / 2h per probed coordinate
    """
    if h <= 0.0:
        raise ValueError(f"step size must be positive, got {h}")
    x = np.array(x, dtype=np.float64)
    gradient = np.zeros_like(x)
    probe = x.copy()
    indices = np.ndindex(*x.shape) if coordinates is None else coordinates
    for index in indices:
        index = tuple(index)
        original = probe[index]
        probe[index] = original + h
        f_plus = func(probe)
        probe[index] = original - h
        f_minus = func(probe)
        probe[index] = original
        gradient[index] = (f_plus - f_minus) / (2.0 * h)
    return gradient


def relative_errors(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> np.ndarray:
    """|a - n| / max(|a|, |n|, floor) elementwise."""
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / scale
