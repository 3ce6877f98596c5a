"""Utility modules for the imputation toolkit."""

from .errors import (
    BundleError,
    ConvergenceError,
    ImputationError,
    NoNeighborsError,
    NumericalError,
    SingularDesignError,
    WeakIdentificationError,
)
from .logging import bind_run_context, configure_logging, numpy_to_python
from .random import derive_seed, stream

__all__ = [
    "bind_run_context",
    "configure_logging",
    "numpy_to_python",
    "stream",
    "derive_seed",
    "ImputationError",
    "BundleError",
    "SingularDesignError",
    "NumericalError",
    "NoNeighborsError",
    "WeakIdentificationError",
    "ConvergenceError",
]
