"""
Error types raised by the imputation and estimation pipeline.
"""
from typing import Optional, Sequence


class ImputationError(Exception):
    """Base class for all toolkit errors."""


class BundleError(ImputationError, ValueError):
    """Malformed or inconsistent input files."""

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        self.path = path
        self.line = line
        location = ""
        if path is not None:
            location = f"{path}"
            if line is not None:
                location += f":{line}"
            location += ": "
        super().__init__(f"{location}{message}")


class SingularDesignError(ImputationError, ValueError):
    """First-stage design matrix is rank deficient."""

    def __init__(self, columns: Sequence[str]):
        self.columns = list(columns)
        super().__init__(
            "singular first-stage design, collinear columns: " + ", ".join(self.columns)
        )


class NumericalError(ImputationError, ArithmeticError):
    """Base class for failures of a numerical routine."""


class NoNeighborsError(NumericalError):
    """No reference node falls inside the kernel window of a target."""

    def __init__(self, node: Optional[int] = None, side: str = "row"):
        self.node = node
        self.side = side
        target = f"node {node}" if node is not None else "target"
        super().__init__(f"no reference within bandwidth for {target} ({side} side)")


class WeakIdentificationError(NumericalError):
    """Aggregated GMM matrix is singular: instruments do not identify the parameters."""


class ConvergenceError(NumericalError):
    """An iterative solver hit its iteration cap."""
