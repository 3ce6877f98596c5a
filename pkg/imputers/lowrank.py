"""
Global low-rank imputation.

Factors come from the symmetric eigendecomposition of the sampled block A_SS
(top r by absolute eigenvalue, negative eigenvalues kept). Unsampled loadings
are the least-squares coefficients of A_{S^c,S} on those factors, and the
missing block is rebuilt as L diag(lambda) L'.
"""
from typing import Dict, Sequence, Tuple

import numpy as np
import structlog

from models.network import CovariateSet, ImputedNetwork, PartialNetwork
from utils.random import stream

from .base import BaseImputer, fill_missing_block

logger = structlog.get_logger()

EIGEN_FLOOR = 1e-10


def spectral_factors(block: np.ndarray, rank: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Top-`rank` eigenpairs of a symmetric matrix by absolute eigenvalue.

    Eigenvalues below EIGEN_FLOOR times the largest magnitude are dropped, so
    fewer than `rank` pairs may come back.
    """
    lam, U = np.linalg.eigh(block)
    order = np.argsort(-np.abs(lam), kind="stable")[:rank]
    lam, U = lam[order], U[:, order]
    if lam.size == 0 or np.abs(lam[0]) == 0:
        return U[:, :0], lam[:0]
    keep = np.abs(lam) > EIGEN_FLOOR * np.abs(lam[0])
    return U[:, keep], lam[keep]


def reconstruct_missing(A_SS: np.ndarray, A_cS: np.ndarray, rank: int) -> np.ndarray:
    """Rank-`rank` reconstruction of the unsampled-by-unsampled block (unsymmetrized, untruncated)."""
    U, lam = spectral_factors(A_SS, rank)
    if lam.size == 0:
        return np.zeros((A_cS.shape[0], A_cS.shape[0]))
    loadings = (A_cS @ U) / lam
    return (loadings * lam) @ loadings.T


def holdout_mask(shape: Tuple[int, int], fraction: float, seed: int, label: str) -> np.ndarray:
    """Seeded mask holding out round(fraction * size) entries, at least one."""
    size = shape[0] * shape[1]
    count = min(size, max(1, int(round(fraction * size))))
    picks = stream(seed, label).choice(size, size=count, replace=False)
    mask = np.zeros(size, dtype=bool)
    mask[picks] = True
    return mask.reshape(shape)


def holdout_error(A_SS: np.ndarray, A_cS: np.ndarray, mask: np.ndarray, rank: int) -> float:
    """
    Squared error on the held-out cross-block entries.

    Each unsampled row's loading is refit on its unmasked entries only.
    """
    U, lam = spectral_factors(A_SS, rank)
    F = U * lam
    total = 0.0
    for c in np.flatnonzero(mask.any(axis=1)):
        held = mask[c]
        truth = A_cS[c, held]
        if lam.size == 0 or not (~held).any():
            total += float(np.sum(truth**2))
            continue
        loading, *_ = np.linalg.lstsq(F[~held], A_cS[c, ~held], rcond=None)
        total += float(np.sum((truth - F[held] @ loading) ** 2))
    return total


def select_rank(
    A_SS: np.ndarray,
    A_cS: np.ndarray,
    rank_grid: Sequence[int],
    seed: int = 0,
    holdout_fraction: float = 0.1,
) -> Tuple[int, Dict[int, float]]:
    """Rank with the smallest holdout error; ties go to the smaller rank."""
    mask = holdout_mask(A_cS.shape, holdout_fraction, seed, "lowrank-holdout")
    scores = {int(r): holdout_error(A_SS, A_cS, mask, int(r)) for r in rank_grid}
    return min(scores, key=lambda r: (scores[r], r)), scores


def impute_lowrank(
    pn: PartialNetwork,
    rank_grid: Sequence[int],
    seed: int = 0,
    holdout_fraction: float = 0.1,
) -> ImputedNetwork:
    """
    Low-rank imputation with the rank chosen on held-out cross-block entries.

    Args:
        pn: Partially observed network
        rank_grid: Candidate ranks
        seed: Seed of the holdout mask
        holdout_fraction: Share of observed cross-block entries held out

    Returns:
        Imputed network

    Raises:
        ValueError: If the grid is empty or a rank is not below |S|
    """
    grid = sorted(set(int(r) for r in rank_grid))
    if not grid or grid[0] < 1:
        raise ValueError("rank_grid must hold positive ranks")
    if grid[-1] >= pn.n_sampled:
        raise ValueError(f"rank {grid[-1]} must be below the sample size {pn.n_sampled}")

    A = pn.observed_adj
    S, C = pn.sampled, pn.unsampled
    A_SS, A_cS = A[np.ix_(S, S)], A[np.ix_(C, S)]

    scores: Dict[int, float] = {}
    if len(grid) == 1 or C.size == 0:
        rank = grid[0]
    else:
        rank, scores = select_rank(A_SS, A_cS, grid, seed, holdout_fraction)
        logger.info("rank_selected", method="lr", rank=rank, scores=scores)

    block = reconstruct_missing(A_SS, A_cS, rank)
    imputed = fill_missing_block(pn, 0.5 * (block + block.T), method="lr")
    return imputed.model_copy(update={"metadata": {"rank": rank, "rank_scores": scores}})


class LowRankImputer(BaseImputer):
    """LR: global spectral factors of the sampled block."""

    method = "lr"

    def impute(self, pn: PartialNetwork, cov: CovariateSet) -> ImputedNetwork:
        rank_grid = [r for r in self.baseline.rank_grid if r < pn.n_sampled] or [1]
        if len(rank_grid) < len(self.baseline.rank_grid):
            logger.warning("rank_grid_trimmed", method=self.method, n_sampled=pn.n_sampled, rank_grid=rank_grid)
        return impute_lowrank(
            pn,
            rank_grid,
            seed=self.baseline.seed,
            holdout_fraction=self.baseline.holdout_fraction,
        )
