"""
Covariate-only and zero-fill baselines.
"""
from typing import Optional

import numpy as np
import structlog

from models.network import CovariateSet, ImputedNetwork, PartialNetwork
from models.request import ImputeConfig
from utils.errors import ImputationError

from .base import BaseImputer, fill_missing_block
from .ltwfe import first_stage_residuals

logger = structlog.get_logger()


def impute_covariate_only(
    pn: PartialNetwork, cov: CovariateSet, cfg: Optional[ImputeConfig] = None
) -> ImputedNetwork:
    """
    Fill missing dyads with the clamped first-stage prediction.

    Raises:
        ValueError: If there are no covariates
    """
    if cov.d_x < 1:
        raise ValueError("covariate-only imputation needs at least one covariate")
    model, residuals = first_stage_residuals(pn, cov, cfg or ImputeConfig())
    targets = pn.unsampled
    imputed = fill_missing_block(pn, np.array(residuals.pi_hat[np.ix_(targets, targets)]), method="x")
    return imputed.model_copy(update={"metadata": {"first_stage": model.kind}})


def impute_zero_fill(pn: PartialNetwork) -> ImputedNetwork:
    """Treat every missing dyad as absent, as a naive analysis of the sample does."""
    m = pn.unsampled.size
    return fill_missing_block(pn, np.zeros((m, m)), method="sampled")


def fallback_imputation(
    pn: PartialNetwork, cov: CovariateSet, cfg: Optional[ImputeConfig] = None
) -> ImputedNetwork:
    """
    Stand-in for a method that failed on this sample.

    The missing block gets the clamped first-stage prediction, or zeros when the
    first stage cannot be fitted either. Every missing dyad counts as a fallback pair.
    """
    m = pn.unsampled.size
    try:
        imputed = impute_covariate_only(pn, cov, cfg)
    except (ImputationError, ValueError, np.linalg.LinAlgError) as e:
        logger.warning("first_stage_fallback_failed", error=str(e), error_type=type(e).__name__)
        imputed = impute_zero_fill(pn)
    return imputed.model_copy(update={"fallback_pairs": m * (m - 1) // 2})


class CovariateImputer(BaseImputer):
    """X: first stage only."""

    method = "x"
    uses_covariates = True

    def impute(self, pn: PartialNetwork, cov: CovariateSet) -> ImputedNetwork:
        return impute_covariate_only(pn, cov, self.config)


class ZeroFillImputer(BaseImputer):
    method = "sampled"

    def impute(self, pn: PartialNetwork, cov: CovariateSet) -> ImputedNetwork:
        return impute_zero_fill(pn)
