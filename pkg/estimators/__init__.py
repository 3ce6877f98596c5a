"""Estimation building blocks: distances, first stage, two-way fixed effects, downstream models."""

from .centrality import (
    centrality_ols,
    degree_centrality,
    eigenvector_centrality,
    row_normalize,
)
from .distance import pseudo_distance, pseudo_distance_split
from .dyadic import (
    PiModel,
    ResidualTable,
    dyad_features,
    fit_pi,
    predict_pi,
    predict_pi_matrix,
    residual_matrix,
)
from .kernel import KERNELS, kernel_eval, kernel_weights
from .peer_effects import (
    build_instruments,
    peer_covariates,
    peer_effects_gmm,
    simulate_peer_outcomes,
)
from .twfe import auto_h_grid, cross_validate_h, impute_missing, twfe_impute_pair

__all__ = [
    "KERNELS",
    "PiModel",
    "ResidualTable",
    "auto_h_grid",
    "build_instruments",
    "centrality_ols",
    "cross_validate_h",
    "degree_centrality",
    "dyad_features",
    "eigenvector_centrality",
    "fit_pi",
    "impute_missing",
    "kernel_eval",
    "kernel_weights",
    "peer_covariates",
    "peer_effects_gmm",
    "predict_pi",
    "predict_pi_matrix",
    "pseudo_distance",
    "pseudo_distance_split",
    "residual_matrix",
    "row_normalize",
    "simulate_peer_outcomes",
    "twfe_impute_pair",
]
