"""
One-way cluster-robust covariance, shared by the centrality OLS and peer-effects GMM.

Follows linearmodels' ClusteredCovariance with group_debias=True: the meat is
the sum over clusters of outer products of the within-cluster score sums, scaled
by G / (G - 1) for G clusters.
"""
from typing import Optional

import numpy as np


def cov_cluster(scores: np.ndarray, clusters: np.ndarray) -> np.ndarray:
    """
    Sum over clusters of s_g s_g', with s_g the column sums of the cluster's score rows.

    Args:
        scores: nobs x k per-observation scores
        clusters: nobs cluster labels

    Returns:
        k x k meat matrix
    """
    scores = np.asarray(scores, dtype=float)
    if scores.ndim == 1:
        scores = scores.reshape(-1, 1)
    clusters = np.asarray(clusters).reshape(-1)
    if clusters.size != scores.shape[0]:
        raise ValueError(f"{scores.shape[0]} score rows but {clusters.size} cluster labels")
    _, codes = np.unique(clusters, return_inverse=True)
    sums = np.zeros((int(codes.max()) + 1, scores.shape[1]))
    np.add.at(sums, codes, scores)
    return sums.T @ sums


def group_debias_coefficient(clusters: np.ndarray) -> float:
    """G / (G - 1) small-sample factor."""
    ngroups = np.unique(np.asarray(clusters).reshape(-1)).size
    if ngroups < 2:
        raise ValueError("the debias factor needs at least two clusters")
    return ngroups / (ngroups - 1)


def clustered_sandwich(bread: np.ndarray, scores: np.ndarray, clusters: np.ndarray) -> Optional[np.ndarray]:
    """
    bread @ (G / (G - 1)) meat @ bread, or None with fewer than two clusters.
    """
    if np.unique(np.asarray(clusters).reshape(-1)).size < 2:
        return None
    meat = cov_cluster(scores, clusters) * group_debias_coefficient(clusters)
    return bread @ meat @ bread


def standard_errors(cov: Optional[np.ndarray]) -> Optional[np.ndarray]:
    """Square roots of the diagonal, with tiny negative round-off clipped to zero."""
    if cov is None:
        return None
    return np.sqrt(np.clip(np.diag(cov), 0.0, None))
