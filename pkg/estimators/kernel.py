"""
Compactly supported kernels on [-1, 1].

Weights are K(d / h) without the 1/h prefactor; every estimator built on them
is a ratio of weighted sums, so the prefactor cancels.
"""
from typing import Callable, Dict, Union

import numpy as np

from models.request import KernelFamily, KernelSpec

ArrayLike = Union[float, np.ndarray]


def _epanechnikov(u: np.ndarray) -> np.ndarray:
    return np.where(np.abs(u) <= 1.0, 0.75 * (1.0 - u * u), 0.0)


def _triangular(u: np.ndarray) -> np.ndarray:
    return np.where(np.abs(u) <= 1.0, 1.0 - np.abs(u), 0.0)


def _uniform(u: np.ndarray) -> np.ndarray:
    return np.where(np.abs(u) <= 1.0, 0.5, 0.0)


KERNELS: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "epanechnikov": _epanechnikov,
    "triangular": _triangular,
    "uniform": _uniform,
}


def kernel_eval(spec: KernelSpec, u: ArrayLike) -> ArrayLike:
    """
    Evaluate the kernel at an already scaled argument u = d / h.

    Args:
        spec: Kernel family and bandwidth (bandwidth is validated, not applied)
        u: Scalar or array of scaled distances

    Returns:
        K(u), with the same shape as u
    """
    if spec.h <= 0:
        raise ValueError(f"bandwidth must be positive, got {spec.h}")
    values = KERNELS[spec.family](np.asarray(u, dtype=float))
    return float(values) if np.ndim(values) == 0 else values


def kernel_weights(family: KernelFamily, distances: np.ndarray, h: float) -> np.ndarray:
    """K(d / h) elementwise."""
    if h <= 0:
        raise ValueError(f"bandwidth must be positive, got {h}")
    return KERNELS[family](np.asarray(distances, dtype=float) / h)
