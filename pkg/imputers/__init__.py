"""Imputation methods for the unsampled-by-unsampled block."""

from typing import Dict, Optional, Type

from models.request import BaselineConfig, ImputeConfig

from .base import BaseImputer, fill_missing_block
from .covariate import (
    CovariateImputer,
    ZeroFillImputer,
    fallback_imputation,
    impute_covariate_only,
    impute_zero_fill,
)
from .local_pca import (
    CovariateLocalPcaImputer,
    LocalPcaImputer,
    impute_local_pca,
    local_completion,
    nearest_references,
)
from .lowrank import LowRankImputer, impute_lowrank, reconstruct_missing, select_rank, spectral_factors
from .ltwfe import (
    LocalTwfeImputer,
    RawLocalTwfeImputer,
    SplitLocalTwfeImputer,
    first_stage_residuals,
    impute_ltwfe,
    impute_split,
    impute_with_cv,
)

IMPUTERS: Dict[str, Type[BaseImputer]] = {
    cls.method: cls
    for cls in (
        LocalTwfeImputer,
        SplitLocalTwfeImputer,
        CovariateImputer,
        RawLocalTwfeImputer,
        LowRankImputer,
        LocalPcaImputer,
        CovariateLocalPcaImputer,
        ZeroFillImputer,
    )
}


def build_imputer(
    method: str,
    config: Optional[ImputeConfig] = None,
    baseline: Optional[BaselineConfig] = None,
) -> BaseImputer:
    """
    Instantiate the imputer registered under `method`.

    Raises:
        ValueError: If the method is unknown
    """
    try:
        cls = IMPUTERS[method]
    except KeyError:
        raise ValueError(f"unknown imputation method {method!r}; choose from {sorted(IMPUTERS)}") from None
    return cls(config=config, baseline=baseline)


__all__ = [
    "IMPUTERS",
    "BaseImputer",
    "CovariateImputer",
    "CovariateLocalPcaImputer",
    "LocalPcaImputer",
    "LocalTwfeImputer",
    "LowRankImputer",
    "RawLocalTwfeImputer",
    "SplitLocalTwfeImputer",
    "ZeroFillImputer",
    "build_imputer",
    "fallback_imputation",
    "fill_missing_block",
    "first_stage_residuals",
    "impute_covariate_only",
    "impute_local_pca",
    "impute_lowrank",
    "impute_ltwfe",
    "impute_split",
    "impute_with_cv",
    "impute_zero_fill",
    "local_completion",
    "nearest_references",
    "reconstruct_missing",
    "select_rank",
    "spectral_factors",
]
