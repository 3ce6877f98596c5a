"""
Local two-way fixed-effects imputation with bandwidth cross-validation.

Pipeline: first stage on observed dyads, residuals, pseudo-distances to the
sampled references, leave-one-out bandwidth search, closed-form fill of the
unsampled-by-unsampled block at the (optionally undersmoothed) bandwidth.
"""
from typing import Tuple

import numpy as np
import structlog

from estimators.distance import pseudo_distance, pseudo_distance_split
from estimators.dyadic import PiModel, ResidualTable, fit_pi, residual_matrix
from estimators.twfe import auto_h_grid, cross_validate_h, impute_missing
from models.network import CovariateSet, ImputedNetwork, PartialNetwork
from models.request import DyadFeatureSpec, ImputeConfig, KernelSpec
from models.response import PseudoDistanceTable
from netmodel.sampling import split_sample

from .base import BaseImputer

logger = structlog.get_logger()


def first_stage_residuals(pn: PartialNetwork, cov: CovariateSet, cfg: ImputeConfig) -> Tuple[PiModel, ResidualTable]:
    """Fit Pi-hat as configured and return it with the residual table."""
    spec = DyadFeatureSpec(mode=cfg.feature_mode, d_x=cov.d_x)
    model = fit_pi(pn, cov, spec, kind=cfg.first_stage, bandwidth=cfg.pi_bandwidth)
    return model, residual_matrix(pn, model, cov)


def _select_and_fill(
    pn: PartialNetwork,
    residuals: ResidualTable,
    dist: PseudoDistanceTable,
    cfg: ImputeConfig,
    method: str,
) -> Tuple[ImputedNetwork, float]:
    grid = auto_h_grid(dist, cfg.auto_grid_points) if cfg.h_grid == "auto" else list(cfg.h_grid)
    cv = cross_validate_h(
        pn,
        residuals,
        dist,
        grid,
        kernel=cfg.kernel,
        cv_pair_cap=cfg.cv_pair_cap,
        seed=cfg.seed,
        include_diagonal=cfg.include_diagonal,
    )
    h_used = cv.h_star * cfg.undersmooth_multiplier
    imputed = impute_missing(
        pn,
        residuals,
        dist,
        dist,
        KernelSpec(family=cfg.kernel, h=h_used),
        symmetrize=cfg.symmetrize,
        include_diagonal=cfg.include_diagonal,
        method=method,
    )
    metadata = {
        "h_star": cv.h_star,
        "h_used": h_used,
        "h_grid": grid,
        "cv_scores": cv.scores,
        "cv_excluded": cv.excluded,
        "cv_pairs": cv.n_pairs,
        "references": int(dist.references.size),
        "anchors": dist.anchor_count,
    }
    return imputed.model_copy(update={"metadata": metadata}), cv.h_star


def _with_first_stage(imputed: ImputedNetwork, model: PiModel) -> ImputedNetwork:
    metadata = dict(imputed.metadata)
    metadata["first_stage"] = model.kind
    return imputed.model_copy(update={"metadata": metadata})


def impute_with_cv(pn: PartialNetwork, cov: CovariateSet, cfg: ImputeConfig) -> Tuple[ImputedNetwork, float]:
    """
    Full-sample local two-way fixed-effects imputation.

    Args:
        pn: Partially observed network
        cov: Node covariates; zero columns skips the first stage
        cfg: Imputation settings

    Returns:
        Imputed network and the cross-validated bandwidth before undersmoothing
    """
    model, residuals = first_stage_residuals(pn, cov, cfg)
    every_node = np.arange(pn.n_nodes)
    dist = pseudo_distance(pn, targets=every_node, references=pn.sampled)
    imputed, h_star = _select_and_fill(pn, residuals, dist, cfg, method="x-ltwfe")
    return _with_first_stage(imputed, model), h_star


def impute_split(pn: PartialNetwork, cov: CovariateSet, cfg: ImputeConfig) -> Tuple[ImputedNetwork, float]:
    """
    Sample-splitting variant: distances use links of S1 only, references are S2.

    Raises:
        ValueError: If fewer than four nodes are sampled
    """
    model, residuals = first_stage_residuals(pn, cov, cfg)
    s1, s2 = split_sample(pn, cfg.seed)
    targets = np.union1d(s2, pn.unsampled)
    dist = pseudo_distance_split(pn, s1, s2, targets)
    imputed, h_star = _select_and_fill(pn, residuals, dist, cfg, method="x-ltwfe-sp")
    imputed = _with_first_stage(imputed, model)
    metadata = dict(imputed.metadata)
    metadata["split_sizes"] = [int(s1.size), int(s2.size)]
    return imputed.model_copy(update={"metadata": metadata}), h_star


def impute_ltwfe(pn: PartialNetwork, cfg: ImputeConfig) -> ImputedNetwork:
    """Local two-way fixed effects on the raw adjacency (Pi-hat identically zero)."""
    residuals = residual_matrix(pn, PiModel.null(), CovariateSet.empty(pn.n_nodes))
    if cfg.split:
        s1, s2 = split_sample(pn, cfg.seed)
        dist = pseudo_distance_split(pn, s1, s2, np.union1d(s2, pn.unsampled))
    else:
        dist = pseudo_distance(pn, targets=np.arange(pn.n_nodes), references=pn.sampled)
    imputed, _ = _select_and_fill(pn, residuals, dist, cfg, method="ltwfe")
    return _with_first_stage(imputed, PiModel.null())


class LocalTwfeImputer(BaseImputer):
    """X-LTWFE: covariate first stage followed by local two-way fixed effects."""

    method = "x-ltwfe"
    uses_covariates = True

    def impute(self, pn: PartialNetwork, cov: CovariateSet) -> ImputedNetwork:
        if self.config.split:
            imputed, _ = impute_split(pn, cov, self.config)
        else:
            imputed, _ = impute_with_cv(pn, cov, self.config)
        return imputed


class SplitLocalTwfeImputer(LocalTwfeImputer):
    """X-LTWFE-SP: the sample-splitting variant."""

    method = "x-ltwfe-sp"

    def impute(self, pn: PartialNetwork, cov: CovariateSet) -> ImputedNetwork:
        imputed, _ = impute_split(pn, cov, self.config)
        return imputed


class RawLocalTwfeImputer(BaseImputer):
    """LTWFE: no covariate first stage."""

    method = "ltwfe"

    def impute(self, pn: PartialNetwork, cov: CovariateSet) -> ImputedNetwork:
        return impute_ltwfe(pn, self.config)
