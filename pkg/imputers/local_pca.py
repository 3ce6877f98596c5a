"""
Local low-rank (local PCA) imputation.

For a missing pair (i, j), N_i and N_j are the k sampled nodes closest to i and
to j by pseudo-distance. On the local table with rows N_i + {i} and columns
N_j + {j}, the rank-r completion of the unknown corner is

    a' V_r diag(1 / s_r) U_r' b

where U_r s_r V_r' is the truncated SVD of the k x k block A[N_i, N_j],
a = A[i, N_j] and b = A[N_i, j]. With k equal to |S| and a full rank this is
the global low-rank reconstruction restricted to the pair.
"""
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import structlog

from estimators.distance import pseudo_distance
from estimators.dyadic import ResidualTable
from models.network import CovariateSet, ImputedNetwork, PartialNetwork
from models.response import PseudoDistanceTable
from utils.random import stream

from .base import BaseImputer, fill_missing_block
from .lowrank import EIGEN_FLOOR
from .ltwfe import first_stage_residuals

logger = structlog.get_logger()

PAIR_CHUNK = 1024


def nearest_references(
    dist: PseudoDistanceTable,
    nodes: np.ndarray,
    k: int,
    exclude: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    The k closest references of each node, nearest first; ties keep reference order.

    A node is never its own neighbor. `exclude` names one more reference per
    node to leave out.
    """
    nodes = np.asarray(nodes, dtype=np.int64)
    refs = dist.references
    D = np.array(dist.rows_for(nodes), dtype=float)
    D[refs[None, :] == nodes[:, None]] = np.inf
    if exclude is not None:
        D[refs[None, :] == np.asarray(exclude)[:, None]] = np.inf
    order = np.argsort(D, axis=1, kind="stable")[:, :k]
    if np.isinf(np.take_along_axis(D, order, axis=1)).any():
        raise ValueError(f"fewer than {k} eligible references for some node")
    return refs[order]


def local_completion(
    M: np.ndarray,
    rows: np.ndarray,
    cols: np.ndarray,
    nbr_rows: np.ndarray,
    nbr_cols: np.ndarray,
    rank: int,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Rank-`rank` completion of M[rows[p], cols[p]] for every pair p.

    Returns:
        Predictions and a mask of pairs whose local block is identically zero
    """
    preds = np.empty(rows.size)
    degenerate = np.zeros(rows.size, dtype=bool)
    for start in range(0, rows.size, PAIR_CHUNK):
        sl = slice(start, start + PAIR_CHUNK)
        Ni, Nj = nbr_rows[sl], nbr_cols[sl]
        block = M[Ni[:, :, None], Nj[:, None, :]]
        a = M[rows[sl, None], Nj]
        b = M[Ni, cols[sl, None]]

        U, s, Vt = np.linalg.svd(block)
        U, s, Vt = U[:, :, :rank], s[:, :rank], Vt[:, :rank, :]
        top = s[:, :1]
        keep = (s > EIGEN_FLOOR * top) & (top > 0)
        inverse = np.where(keep, 1.0 / np.where(keep, s, 1.0), 0.0)

        aV = np.einsum("pk,prk->pr", a, Vt)
        Ub = np.einsum("pkr,pk->pr", U, b)
        preds[sl] = np.sum(aV * inverse * Ub, axis=1)
        degenerate[sl] = top[:, 0] == 0
    preds[degenerate] = 0.0
    return preds, degenerate


def _holdout_pairs(pn: PartialNetwork, fraction: float, cap: int, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    C, S = pn.unsampled, pn.sampled
    size = C.size * S.size
    count = min(size, cap, max(1, int(round(fraction * size))))
    picks = np.sort(stream(seed, "lpca-holdout").choice(size, size=count, replace=False))
    return C[picks // S.size], S[picks % S.size]


def _score_grid(
    pn: PartialNetwork,
    M: np.ndarray,
    dist: PseudoDistanceTable,
    combos: Sequence[Tuple[int, int]],
    fraction: float,
    cap: int,
    seed: int,
) -> Dict[Tuple[int, int], float]:
    ii, jj = _holdout_pairs(pn, fraction, cap, seed)
    truth = M[ii, jj]
    # the held-out node j is a reference itself, so one fewer neighbor is available
    k_cap = dist.references.size - 1
    scores: Dict[Tuple[int, int], float] = {}
    neighbors: Dict[int, Tuple[np.ndarray, np.ndarray]] = {}
    for k, r in combos:
        k_eff = min(k, k_cap)
        if k_eff not in neighbors:
            neighbors[k_eff] = (
                nearest_references(dist, ii, k_eff, exclude=jj),
                nearest_references(dist, jj, k_eff),
            )
        Ni, Nj = neighbors[k_eff]
        preds, _ = local_completion(M, ii, jj, Ni, Nj, r)
        scores[(k, r)] = float(np.sum((truth - preds) ** 2))
    return scores


def impute_local_pca(
    pn: PartialNetwork,
    dist: PseudoDistanceTable,
    k_grid: Sequence[int],
    rank_grid: Sequence[int],
    with_x: bool = False,
    seed: int = 0,
    residuals: Optional[ResidualTable] = None,
    holdout_fraction: float = 0.1,
    holdout_cap: int = 500,
) -> ImputedNetwork:
    """
    Local PCA imputation with (k, r) chosen jointly on held-out cross-block entries.

    Args:
        pn: Partially observed network
        dist: Distances from every node to the sampled references
        k_grid: Candidate neighborhood sizes
        rank_grid: Candidate local ranks; only r <= k is tried
        with_x: Work on first-stage residuals and add Pi-hat back
        seed: Seed of the held-out pairs
        residuals: First-stage residuals, required when with_x
        holdout_fraction: Share of observed cross-block entries held out
        holdout_cap: Maximum number of held-out pairs

    Returns:
        Imputed network; pairs with an all-zero local block get the fallback
        (zero, or Pi-hat when with_x) and are counted

    Raises:
        ValueError: If a neighborhood size exceeds the reference count or no (k, r) is valid
    """
    if with_x and residuals is None:
        raise ValueError("with_x needs first-stage residuals")
    if not np.all(pn.is_sampled[dist.references]):
        raise ValueError("reference nodes must be sampled")
    ks = sorted(set(int(k) for k in k_grid))
    rs = sorted(set(int(r) for r in rank_grid))
    if not ks or not rs or ks[0] < 1 or rs[0] < 1:
        raise ValueError("k_grid and rank_grid must hold positive integers")
    if ks[-1] > dist.references.size:
        raise ValueError(f"k={ks[-1]} exceeds the {dist.references.size} available references")
    combos = [(k, r) for k in ks for r in rs if r <= k]
    if not combos:
        raise ValueError("no (k, r) with r <= k in the grids")

    method = "x-lpca" if with_x else "lpca"
    M = np.nan_to_num(residuals.values) if with_x else pn.observed_adj
    C = pn.unsampled

    scores: Dict[Tuple[int, int], float] = {}
    if len(combos) == 1 or C.size == 0:
        k_star, r_star = combos[0]
    else:
        scores = _score_grid(pn, M, dist, combos, holdout_fraction, holdout_cap, seed)
        k_star, r_star = min(scores, key=lambda kr: (scores[kr], kr))
        logger.info("local_pca_selected", method=method, k=k_star, rank=r_star, candidates=len(scores))

    iu, ju = np.triu_indices(C.size, k=1)
    nbrs = nearest_references(dist, C, k_star) if C.size else np.zeros((0, k_star), dtype=np.int64)
    preds, degenerate = local_completion(M, C[iu], C[ju], nbrs[iu], nbrs[ju], r_star)

    block = np.zeros((C.size, C.size))
    block[iu, ju] = preds
    block = block + block.T
    if with_x:
        block = block + residuals.pi_hat[np.ix_(C, C)]

    fallback_pairs = int(np.count_nonzero(degenerate))
    if fallback_pairs:
        logger.warning("no_neighbors_fallback", method=method, fallback_pairs=fallback_pairs)

    imputed = fill_missing_block(pn, block, method=method, fallback_pairs=fallback_pairs)
    metadata = {"k": k_star, "rank": r_star, "cv_scores": {f"{k},{r}": v for (k, r), v in scores.items()}}
    return imputed.model_copy(update={"metadata": metadata})


class LocalPcaImputer(BaseImputer):
    """LPCA on the raw adjacency, neighborhoods from full-sample distances."""

    method = "lpca"
    with_x = False

    def impute(self, pn: PartialNetwork, cov: CovariateSet) -> ImputedNetwork:
        residuals = first_stage_residuals(pn, cov, self.config)[1] if self.with_x else None
        dist = pseudo_distance(pn, targets=np.arange(pn.n_nodes), references=pn.sampled)
        k_grid = [k for k in self.baseline.k_grid if k <= pn.n_sampled] or [pn.n_sampled]
        if len(k_grid) < len(self.baseline.k_grid):
            logger.warning("k_grid_trimmed", method=self.method, n_sampled=pn.n_sampled, k_grid=k_grid)
        return impute_local_pca(
            pn,
            dist,
            k_grid,
            self.baseline.rank_grid,
            with_x=self.with_x,
            seed=self.baseline.seed,
            residuals=residuals,
            holdout_fraction=self.baseline.holdout_fraction,
            holdout_cap=self.baseline.holdout_cap,
        )


class CovariateLocalPcaImputer(LocalPcaImputer):
    """X-LPCA: local PCA on first-stage residuals."""

    method = "x-lpca"
    with_x = True
    uses_covariates = True
