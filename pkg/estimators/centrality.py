"""
Network statistics and the centrality regression.
"""
from typing import Optional, Sequence

import numpy as np
import structlog

from models.response import CentralityEstimate, NormalizedNetwork
from utils.errors import ConvergenceError, WeakIdentificationError

from .covariance import clustered_sandwich, standard_errors

logger = structlog.get_logger()


def _square(A: np.ndarray) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    return A


def row_normalize(A: np.ndarray) -> NormalizedNetwork:
    """
    G_ij = A_ij / sum_j' A_ij'. Rows without links stay zero and are recorded.
    """
    A = _square(A)
    sums = A.sum(axis=1)
    zero_rows = np.flatnonzero(sums <= 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        G = np.where(sums[:, None] > 0, A / sums[:, None], 0.0)
    return NormalizedNetwork(G=G, zero_rows=zero_rows)


def degree_centrality(A: np.ndarray) -> np.ndarray:
    """Normalized degree (1/N) sum_j A_ij."""
    A = _square(A)
    return A.sum(axis=1) / A.shape[0]


def eigenvector_centrality(A: np.ndarray, tol: float = 1e-10, max_iter: int = 10_000) -> np.ndarray:
    """
    sqrt(N) times the leading unit eigenvector of a symmetric nonnegative matrix.

    Power iteration on A + cI with c half the largest row sum: the shift keeps
    the eigenvectors and separates the Perron root from a mirrored negative
    eigenvalue, as in bipartite graphs. The sign makes the entry sum nonnegative.

    Args:
        A: Symmetric nonnegative matrix
        tol: Max-norm change between iterates that counts as converged
        max_iter: Iteration cap

    Returns:
        Centrality vector; zeros for the zero matrix

    Raises:
        ConvergenceError: If the iterates have not settled after max_iter steps
    """
    A = _square(A)
    n = A.shape[0]
    if not np.allclose(A, A.T):
        raise ValueError("eigenvector centrality needs a symmetric matrix")
    if np.any(A < 0):
        raise ValueError("eigenvector centrality needs a nonnegative matrix")

    row_sums = A.sum(axis=1)
    if not np.any(row_sums > 0):
        logger.warning("degenerate_network", statistic="eigenvector_centrality", n_nodes=n)
        return np.zeros(n)

    shift = 0.5 * row_sums.max()
    u = np.full(n, 1.0 / np.sqrt(n))
    for iteration in range(1, max_iter + 1):
        nxt = A @ u + shift * u
        nxt /= np.linalg.norm(nxt)
        if np.max(np.abs(nxt - u)) < tol:
            u = nxt
            break
        u = nxt
    else:
        raise ConvergenceError(
            f"power iteration did not converge in {max_iter} steps; "
            "the leading eigenvalue may not be separated from the rest of the spectrum"
        )

    if u.sum() < 0:
        u = -u
    logger.debug("eigenvector_centrality_converged", iterations=iteration, n_nodes=n)
    return np.sqrt(n) * u


def centrality_ols(
    y: Sequence[np.ndarray],
    phi: Sequence[np.ndarray],
    cluster: Optional[Sequence[int]] = None,
) -> CentralityEstimate:
    """
    Pooled OLS of outcomes on (1, centrality) with network-clustered errors.

    The sandwich uses the small-sample factor M / (M - 1). With a single
    cluster the standard errors are unavailable (None).

    Args:
        y: Outcome vector per network
        phi: Centrality vector per network
        cluster: Cluster id per network; defaults to one cluster per network

    Returns:
        Intercept, slope and clustered standard errors

    Raises:
        WeakIdentificationError: If the centrality has no variation
    """
    if len(y) != len(phi) or not y:
        raise ValueError("y and phi must be nonempty lists of equal length")
    cluster_ids = list(range(len(y))) if cluster is None else list(cluster)
    if len(cluster_ids) != len(y):
        raise ValueError("one cluster id per network is required")

    ys, xs, groups = [], [], []
    for m, (y_m, phi_m) in enumerate(zip(y, phi)):
        y_m = np.asarray(y_m, dtype=float).reshape(-1)
        phi_m = np.asarray(phi_m, dtype=float).reshape(-1)
        if y_m.size != phi_m.size:
            raise ValueError(f"network {m}: {y_m.size} outcomes but {phi_m.size} centralities")
        ys.append(y_m)
        xs.append(phi_m)
        groups.append(np.full(y_m.size, cluster_ids[m]))
    Y = np.concatenate(ys)
    X = np.column_stack([np.ones(Y.size), np.concatenate(xs)])
    g = np.concatenate(groups)

    if np.linalg.matrix_rank(X) < 2:
        raise WeakIdentificationError("centrality has no variation across nodes")

    bread = np.linalg.inv(X.T @ X)
    coef = bread @ (X.T @ Y)
    resid = Y - X @ coef

    errors = standard_errors(clustered_sandwich(bread, X * resid[:, None], g))
    se = None if errors is None else (float(errors[0]), float(errors[1]))
    if se is None:
        logger.warning("clustered_se_unavailable", n_clusters=int(np.unique(g).size))

    return CentralityEstimate(
        alpha_c=float(coef[0]),
        alpha_1=float(coef[1]),
        se_cluster=se,
        n_networks=len(y),
        n_obs=int(Y.size),
    )
