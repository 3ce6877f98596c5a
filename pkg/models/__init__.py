"""Data models for networks, run configurations and results."""

from .network import (
    CovariateSet,
    GraphonSpec,
    ImputedNetwork,
    LatentSet,
    Network,
    PartialNetwork,
    ProbabilityMatrix,
)
from .request import (
    IMPUTATION_METHODS,
    BaselineConfig,
    DyadFeatureSpec,
    ExperimentConfig,
    ImputeConfig,
    KernelSpec,
    PeerEffectsParameters,
)
from .response import (
    CentralityEstimate,
    CrossValidationResult,
    McCell,
    McReport,
    NormalizedNetwork,
    PeerEffectsEstimate,
    PseudoDistanceTable,
)

__all__ = [
    "Network",
    "PartialNetwork",
    "CovariateSet",
    "LatentSet",
    "GraphonSpec",
    "ProbabilityMatrix",
    "ImputedNetwork",
    "IMPUTATION_METHODS",
    "KernelSpec",
    "DyadFeatureSpec",
    "ImputeConfig",
    "BaselineConfig",
    "PeerEffectsParameters",
    "ExperimentConfig",
    "PseudoDistanceTable",
    "CrossValidationResult",
    "NormalizedNetwork",
    "CentralityEstimate",
    "PeerEffectsEstimate",
    "McCell",
    "McReport",
]
