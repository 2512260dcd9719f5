"""Central finite differences for checking analytic gradients"""

from __future__ import annotations

from typing import Callable

import numpy as np

__all__ = [
    'ABS_FLOOR',
    'FD_STEP',
    'finite_difference_gradient',
    'gradient_error',
    'relative_error',
]

FD_STEP = 1e-6
"""Step of the central differences (float64)"""

ABS_FLOOR = 1e-7
"""Absolute error below which an element passes regardless of its
relative error; the round-off level of the central differences"""


def finite_difference_gradient(
    f: Callable[[], float],
    x: np.ndarray,
    h: float = FD_STEP,
) -> np.ndarray:
    """Numerical gradient of a scalar function with respect to ``x``

    ``f`` takes no arguments and reads ``x``, which is perturbed in place
    one element at a time and restored afterwards. ``x`` should be float64.
    """
    grad = np.zeros(x.shape, dtype=np.float64)
    flat = x.reshape(-1)
    if not np.shares_memory(flat, x):
        msg = 'finite differences need a contiguous array to perturb in place'
        raise ValueError(msg)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        f_plus = f()
        flat[i] = orig - h
        f_minus = f()
        flat[i] = orig
        gflat[i] = (f_plus - f_minus) / (2.0 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    """Elementwise ``|a - n| / (|a| + |n| + 1e-8)``"""
    return np.abs(analytic - numeric) / (np.abs(analytic) + np.abs(numeric) + 1e-8)


def gradient_error(
    analytic: np.ndarray,
    numeric: np.ndarray,
    abs_floor: float = ABS_FLOOR,
) -> float:
    """Largest relative error among elements that exceed ``abs_floor``

    Elements whose absolute error is below ``abs_floor`` count as exact.
    """
    if analytic.shape != numeric.shape:
        msg = f'gradient shapes differ: {analytic.shape} vs {numeric.shape}'
        raise ValueError(msg)
    rel = relative_error(analytic, numeric)
    rel[np.abs(analytic - numeric) < abs_floor] = 0.0
    return float(rel.max()) if rel.size else 0.0
