"""
Local two-way fixed-effects imputation on first-stage residuals.

For a missing pair (i, j) with kernel weights w_i over row references and w_j
over column references, the weighted two-way fixed-effects fit evaluated at
(i, j) has the closed form

    sum_j' w_j R(i, j') / sum w_j
  + sum_i' w_i R(i', j) / sum w_i
  - sum_i' sum_j' w_i w_j R(i', j') / (sum w_i sum w_j)

so the whole missing block is a handful of matrix products.
"""
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import structlog

from models.network import ImputedNetwork, PartialNetwork
from models.request import KernelFamily, KernelSpec
from models.response import CrossValidationResult, PseudoDistanceTable
from utils.errors import NoNeighborsError
from utils.random import stream

from .dyadic import ResidualTable
from .kernel import kernel_weights

logger = structlog.get_logger()


def twfe_impute_pair(
    R: np.ndarray,
    w_i: np.ndarray,
    w_j: np.ndarray,
    include_diagonal: bool = True,
    node: Optional[int] = None,
) -> float:
    """
    Closed-form local two-way fixed-effects value for one pair.

    Args:
        R: (n+1) x (n+1) local residual table. Row 0 is the target row i, column 0
            the target column j; rows/columns 1..n are the references in the same
            order as the weights. R[0, 0] is the missing entry and is never read.
        w_i: Weights of the row references (similarity to i)
        w_j: Weights of the column references (similarity to j)
        include_diagonal: Keep reference self-pairs in the grand mean. Dropping
            them requires row and column references to be the same nodes.
        node: Target id, only used in the error message

    Returns:
        Imputed residual for (i, j)

    Raises:
        NoNeighborsError: If either weight vector sums to zero
    """
    R = np.asarray(R, dtype=float)
    w_i = np.asarray(w_i, dtype=float)
    w_j = np.asarray(w_j, dtype=float)
    if R.shape != (w_i.size + 1, w_j.size + 1):
        raise ValueError(f"local table shape {R.shape} does not match weights ({w_i.size}, {w_j.size})")

    s_i, s_j = w_i.sum(), w_j.sum()
    if s_i <= 0:
        raise NoNeighborsError(node, side="row")
    if s_j <= 0:
        raise NoNeighborsError(node, side="column")

    row_mean = w_j @ R[0, 1:] / s_j
    col_mean = w_i @ R[1:, 0] / s_i
    inner = R[1:, 1:]
    if include_diagonal:
        grand = w_i @ inner @ w_j / (s_i * s_j)
    else:
        off = inner - np.diag(np.diag(inner))
        grand = w_i @ off @ w_j / (s_i * s_j - w_i @ w_j)
    return float(row_mean + col_mean - grand)


def _check_references(dist_rows: PseudoDistanceTable, dist_cols: PseudoDistanceTable, pn: PartialNetwork) -> None:
    for table in (dist_rows, dist_cols):
        if not np.all(pn.is_sampled[table.references]):
            raise ValueError("reference nodes must be sampled")


def impute_missing(
    pn: PartialNetwork,
    residuals: ResidualTable,
    dist_rows: PseudoDistanceTable,
    dist_cols: PseudoDistanceTable,
    kernel: KernelSpec,
    symmetrize: bool = True,
    include_diagonal: bool = True,
    method: str = "x-ltwfe",
) -> ImputedNetwork:
    """
    Fill the unsampled-by-unsampled block.

    Each missing entry is the closed-form two-way fixed-effects value on the
    residuals plus Pi-hat, truncated to [0, 1]. Targets with an empty kernel
    window fall back to the clamped first stage; those pairs are counted.

    Args:
        pn: Partially observed network
        residuals: First-stage residuals with the raw Pi-hat matrix
        dist_rows: Distances from unsampled nodes to the row references
        dist_cols: Distances from unsampled nodes to the column references
        kernel: Kernel family and bandwidth
        symmetrize: Average the (i, j) and (j, i) orientations
        include_diagonal: Keep reference self-pairs in the grand mean
        method: Name recorded on the result

    Returns:
        Imputed network with provenance flags
    """
    _check_references(dist_rows, dist_cols, pn)
    targets = pn.unsampled
    a_hat = np.array(pn.observed_adj, dtype=float)
    provenance = np.zeros((pn.n_nodes, pn.n_nodes), dtype=bool)

    if targets.size < 2:
        return ImputedNetwork(A_hat=a_hat, provenance=provenance, method=method, bandwidth=kernel.h)

    refs_r, refs_c = dist_rows.references, dist_cols.references
    W_r = kernel_weights(kernel.family, dist_rows.rows_for(targets), kernel.h)
    W_c = kernel_weights(kernel.family, dist_cols.rows_for(targets), kernel.h)
    s_r, s_c = W_r.sum(axis=1), W_c.sum(axis=1)

    R = residuals.values
    R_ref = R[np.ix_(refs_r, refs_c)]
    self_pair = refs_r[:, None] == refs_c[None, :]
    if include_diagonal:
        overlap = np.zeros((targets.size, targets.size))
    else:
        R_ref = np.where(self_pair, 0.0, R_ref)
        overlap = W_r @ self_pair.astype(float) @ W_c.T

    grand_weight = np.outer(s_r, s_c) - overlap
    with np.errstate(divide="ignore", invalid="ignore"):
        row_term = (R[np.ix_(targets, refs_c)] @ W_c.T) / s_c[None, :]
        col_term = (W_r @ R[np.ix_(refs_r, targets)]) / s_r[:, None]
        grand = (W_r @ R_ref @ W_c.T) / grand_weight
        raw = row_term + col_term - grand

    pi_block = residuals.pi_hat[np.ix_(targets, targets)]
    raw = raw + pi_block
    empty = (s_r <= 0)[:, None] | (s_c <= 0)[None, :] | (grand_weight <= 0)
    if symmetrize:
        raw = 0.5 * (raw + raw.T)
        empty = empty | empty.T
    else:
        upper = np.triu(raw, k=1)
        raw = upper + upper.T
        empty_upper = np.triu(empty, k=1)
        empty = empty_upper | empty_upper.T
    raw = np.where(empty, pi_block, raw)
    block = np.clip(raw, 0.0, 1.0)
    np.fill_diagonal(block, 0.0)

    a_hat[np.ix_(targets, targets)] = block
    provenance[np.ix_(targets, targets)] = True
    np.fill_diagonal(provenance, False)

    fallback_pairs = int(np.count_nonzero(np.triu(empty, k=1)))
    if fallback_pairs:
        lonely = targets[(s_r <= 0) | (s_c <= 0)]
        logger.warning(
            "no_neighbors_fallback",
            method=method,
            bandwidth=kernel.h,
            fallback_pairs=fallback_pairs,
            nodes=lonely[:20].tolist(),
        )

    return ImputedNetwork(
        A_hat=a_hat,
        provenance=provenance,
        method=method,
        bandwidth=kernel.h,
        fallback_pairs=fallback_pairs,
    )


def auto_h_grid(dist: PseudoDistanceTable, n_points: int = 8) -> List[float]:
    """Geometric grid between the 10th and 90th percentiles of the positive distances."""
    positive = dist.d[dist.d > 0]
    if positive.size == 0:
        logger.warning("auto_grid_degenerate", reason="all_distances_zero")
        return [1.0]
    lo, hi = np.quantile(positive, [0.1, 0.9])
    if n_points == 1 or np.isclose(lo, hi):
        return [float(hi)]
    return [float(h) for h in np.geomspace(lo, hi, n_points)]


def _cv_pairs(
    rows: np.ndarray, cols: np.ndarray, cap: int, seed: int
) -> Tuple[np.ndarray, np.ndarray]:
    ii, jj = np.meshgrid(rows, cols, indexing="ij")
    ii, jj = ii.reshape(-1), jj.reshape(-1)
    if ii.size > cap:
        keep = np.sort(stream(seed, "cv-pairs").choice(ii.size, size=cap, replace=False))
        ii, jj = ii[keep], jj[keep]
    return ii, jj


def _cv_errors(
    residuals: ResidualTable,
    A: np.ndarray,
    dist: PseudoDistanceTable,
    ii: np.ndarray,
    jj: np.ndarray,
    family: KernelFamily,
    h: float,
    include_diagonal: bool,
) -> Tuple[np.ndarray, np.ndarray]:
    """Squared errors of the leave-one-out predictions and a scorable mask, per pair."""
    refs = dist.references
    ref_pos = {int(r): k for k, r in enumerate(refs)}
    R = residuals.values
    R_ref = R[np.ix_(refs, refs)]
    if not include_diagonal:
        R_ref = R_ref - np.diag(np.diag(R_ref))

    errors = np.empty(ii.size)
    scorable = np.zeros(ii.size, dtype=bool)
    starts = np.flatnonzero(np.r_[True, ii[1:] != ii[:-1]])
    stops = np.r_[starts[1:], ii.size]
    for start, stop in zip(starts, stops):
        i = int(ii[start])
        J = jj[start:stop]
        p = ref_pos[i]

        w_i = kernel_weights(family, dist.rows_for([i])[0], h)
        w_i[p] = 0.0
        W_J = kernel_weights(family, dist.rows_for(J), h)
        W_J[:, p] = 0.0
        s_i, s_J = w_i.sum(), W_J.sum(axis=1)

        denom = s_i * s_J if include_diagonal else s_i * s_J - W_J @ w_i
        ok = (s_J > 0) & (s_i > 0) & (denom > 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            row_term = (W_J @ R[i, refs]) / s_J
            col_term = (R[np.ix_(J, refs)] @ w_i) / s_i
            grand = (W_J @ (R_ref.T @ w_i)) / denom
            prediction = row_term + col_term - grand + residuals.pi_hat[i, J]

        fallback = np.clip(residuals.pi_hat[i, J], 0.0, 1.0)
        prediction = np.where(ok, prediction, fallback)
        errors[start:stop] = (A[i, J] - prediction) ** 2
        scorable[start:stop] = ok
    return errors, scorable


def cross_validate_h(
    pn: PartialNetwork,
    residuals: ResidualTable,
    dist: PseudoDistanceTable,
    h_grid: Sequence[float],
    kernel: KernelFamily = "epanechnikov",
    cv_pair_cap: int = 20_000,
    seed: int = 0,
    include_diagonal: bool = True,
) -> CrossValidationResult:
    """
    Leave-one-out bandwidth search on observed sampled-by-unsampled links.

    Each CV pair (i, j) has i among the references of `dist` and j unsampled.
    A_ij is predicted with i removed from both reference sides; pairs whose
    kernel window is empty are scored with the clamped first stage. A bandwidth
    with no scorable pair is excluded. Ties go to the smaller bandwidth.

    Args:
        pn: Partially observed network
        residuals: First-stage residuals
        dist: Distances from (references and unsampled nodes) to the references
        h_grid: Candidate bandwidths
        kernel: Kernel family
        cv_pair_cap: Maximum number of pairs scored; a seeded uniform subsample beyond it
        seed: Seed of the subsample
        include_diagonal: Keep reference self-pairs in the grand mean

    Returns:
        Selected bandwidth with the score of every candidate

    Raises:
        ValueError: If the grid is empty or no bandwidth has a scorable pair
    """
    grid = sorted(float(h) for h in h_grid)
    if not grid:
        raise ValueError("h_grid must be nonempty")
    if any(h <= 0 for h in grid):
        raise ValueError("bandwidths must be positive")

    ii, jj = _cv_pairs(dist.references, pn.unsampled, cv_pair_cap, seed)
    if ii.size == 0:
        logger.warning("cross_validation_skipped", reason="no_cv_pairs", h=grid[0])
        return CrossValidationResult(h_star=grid[0], n_pairs=0)

    logger.info("cross_validation_start", n_candidates=len(grid), n_pairs=int(ii.size))

    A = pn.observed_adj
    scores: Dict[float, float] = {}
    excluded: List[float] = []
    for h in grid:
        errors, scorable = _cv_errors(residuals, A, dist, ii, jj, kernel, h, include_diagonal)
        if not scorable.any():
            excluded.append(h)
            continue
        scores[h] = float(errors.sum())

    if not scores:
        raise ValueError(f"no bandwidth in {grid} leaves any CV pair with neighbors on both sides")

    h_star = min(scores, key=lambda h: (scores[h], h))
    logger.info(
        "cross_validation_complete",
        h_star=h_star,
        best_score=scores[h_star],
        excluded=len(excluded),
    )
    return CrossValidationResult(h_star=h_star, scores=scores, excluded=excluded, n_pairs=int(ii.size))
