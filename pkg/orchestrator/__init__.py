"""Monte Carlo orchestration."""

from .montecarlo import (
    COMPLETE_DATA,
    MonteCarloHarness,
    aggregate_rmse,
    missing_block_mse,
    node_centrality,
    rmse_missing_block,
    run_centrality_experiment,
    run_experiment,
    run_imputation_experiment,
    run_peereffects_experiment,
)

__all__ = [
    "COMPLETE_DATA",
    "MonteCarloHarness",
    "aggregate_rmse",
    "missing_block_mse",
    "node_centrality",
    "rmse_missing_block",
    "run_centrality_experiment",
    "run_experiment",
    "run_imputation_experiment",
    "run_peereffects_experiment",
]
