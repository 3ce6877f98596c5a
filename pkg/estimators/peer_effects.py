"""
Linear-in-means peer effects: instruments, closed-form GMM and outcome simulation.

Model: Y = alpha_C + alpha_Ybar G Y + W alpha_W + G W alpha_Wbar + u_m + e.
"""
from typing import Sequence, Tuple, Union

import numpy as np
import structlog

from models.network import CovariateSet, LatentSet
from models.request import PeerEffectsParameters
from models.response import NormalizedNetwork, PeerEffectsEstimate
from utils.errors import WeakIdentificationError

from .covariance import clustered_sandwich, standard_errors

logger = structlog.get_logger()

GLike = Union[np.ndarray, NormalizedNetwork]


def _as_matrix(G: GLike) -> np.ndarray:
    matrix = G.G if isinstance(G, NormalizedNetwork) else np.asarray(G, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"G must be square, got shape {matrix.shape}")
    return matrix


def _as_table(W: np.ndarray, n: int) -> np.ndarray:
    W = np.asarray(W, dtype=float)
    if W.ndim == 1:
        W = W.reshape(-1, 1)
    if W.shape[0] != n:
        raise ValueError(f"W has {W.shape[0]} rows but G has {n}")
    return W


def build_instruments(G: GLike, W: np.ndarray) -> np.ndarray:
    """Z = [1 | W | GW | G(GW)]."""
    G = _as_matrix(G)
    W = _as_table(W, G.shape[0])
    GW = G @ W
    return np.column_stack([np.ones(G.shape[0]), W, GW, G @ GW])


def _regressors(G: np.ndarray, W: np.ndarray, Y: np.ndarray) -> np.ndarray:
    return np.column_stack([np.ones(G.shape[0]), G @ Y, W, G @ W])


def _weight_matrix(weight: Union[str, np.ndarray], q: int) -> np.ndarray:
    if isinstance(weight, str):
        if weight != "identity":
            raise ValueError(f"unknown weight {weight!r}; use 'identity' or an explicit matrix")
        return np.eye(q)
    sigma = np.asarray(weight, dtype=float)
    if sigma.shape != (q, q):
        raise ValueError(f"weight matrix must be {q} x {q}, got {sigma.shape}")
    if not np.allclose(sigma, sigma.T):
        raise ValueError("weight matrix must be symmetric")
    eigenvalues = np.linalg.eigvalsh(sigma)
    if eigenvalues.min() < -1e-10 * max(1.0, abs(eigenvalues.max())):
        raise ValueError("weight matrix must be positive semi-definite")
    return sigma


def peer_effects_gmm(
    data: Sequence[Tuple[GLike, np.ndarray, np.ndarray]],
    weight: Union[str, np.ndarray] = "identity",
) -> PeerEffectsEstimate:
    """
    Closed-form GMM with per-network weighting.

    alpha = (sum_m V_m'Z_m S Z_m'V_m)^{-1} (sum_m V_m'Z_m S Z_m'Y_m), with
    V = [1, GY, W, GW] and Z = [1, W, GW, G^2 W]. Clustered variance treats each
    network as a cluster of the linear-IV scores V_m'Z_m S Z_m'e_m.

    Args:
        data: (G_m, W_m, Y_m) per network
        weight: 'identity' or an explicit q x q positive semi-definite matrix

    Returns:
        Coefficients (alpha_C, alpha_Ybar, alpha_W, alpha_Wbar) and clustered SEs

    Raises:
        WeakIdentificationError: If the aggregated matrix is singular
        ValueError: On inconsistent dimensions
    """
    if not data:
        raise ValueError("at least one network is required")

    blocks = []
    d_w = None
    for m, (G_m, W_m, Y_m) in enumerate(data):
        G = _as_matrix(G_m)
        W = _as_table(W_m, G.shape[0])
        Y = np.asarray(Y_m, dtype=float).reshape(-1)
        if Y.size != G.shape[0]:
            raise ValueError(f"network {m}: Y has {Y.size} entries but G has {G.shape[0]} rows")
        if d_w is None:
            d_w = W.shape[1]
        elif W.shape[1] != d_w:
            raise ValueError(f"network {m}: W has {W.shape[1]} columns, expected {d_w}")
        blocks.append((_regressors(G, W, Y), build_instruments(G, W), Y))

    q = blocks[0][1].shape[1]
    sigma = _weight_matrix(weight, q)

    cross = [V.T @ Z for V, Z, _ in blocks]
    H = sum(VZ @ sigma @ VZ.T for VZ in cross)
    g = sum(VZ @ sigma @ (Z.T @ Y) for VZ, (_, Z, Y) in zip(cross, blocks))

    if np.linalg.matrix_rank(H) < H.shape[0]:
        raise WeakIdentificationError(
            "aggregated GMM matrix is singular: the instruments do not identify the "
            "peer-effect parameters (non-degeneracy fails)"
        )

    H_inv = np.linalg.inv(H)
    alpha = H_inv @ g

    M = len(blocks)
    scores = np.array([VZ @ sigma @ (Z.T @ (Y - V @ alpha)) for VZ, (V, Z, Y) in zip(cross, blocks)])
    se = standard_errors(clustered_sandwich(H_inv, scores, np.arange(M)))
    if se is None:
        logger.warning("clustered_se_unavailable", n_clusters=M)

    return PeerEffectsEstimate(alpha=alpha, se_cluster=se, n_networks=M)


def simulate_peer_outcomes(
    G: GLike,
    W: np.ndarray,
    alpha: PeerEffectsParameters,
    u_m: float,
    e: np.ndarray,
) -> np.ndarray:
    """
    Reduced form Y = (I - alpha_Ybar G)^{-1} (alpha_C + W alpha_W + G W alpha_Wbar + u_m + e),
    solved directly.

    Raises:
        ValueError: If alpha_Ybar times the spectral radius of G is not below one
    """
    G = _as_matrix(G)
    n = G.shape[0]
    W = _as_table(W, n)
    e = np.asarray(e, dtype=float).reshape(-1)
    if e.size != n:
        raise ValueError(f"e has {e.size} entries but G has {n} rows")
    if W.shape[1] != alpha.d_w:
        raise ValueError(f"W has {W.shape[1]} columns but alpha_W has {alpha.d_w}")

    if abs(alpha.alpha_ybar) * np.abs(G).sum(axis=1).max() >= 1:
        radius = np.abs(np.linalg.eigvals(G)).max()
        if abs(alpha.alpha_ybar) * radius >= 1:
            raise ValueError(
                f"alpha_Ybar * spectral radius = {abs(alpha.alpha_ybar) * radius:.4f} >= 1; "
                "the reduced form does not exist"
            )

    rhs = alpha.alpha_c + W @ np.asarray(alpha.alpha_w) + G @ W @ np.asarray(alpha.alpha_wbar) + u_m + e
    return np.linalg.solve(np.eye(n) - alpha.alpha_ybar * G, rhs)


def peer_covariates(cov: CovariateSet, lat: LatentSet) -> np.ndarray:
    """W_d = xi_d + 0.5 X_d xi_d, elementwise."""
    if cov.X.shape != lat.xi.shape:
        raise ValueError(f"covariates {cov.X.shape} and latent factors {lat.xi.shape} must match")
    return lat.xi + 0.5 * cov.X * lat.xi
