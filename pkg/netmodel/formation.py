"""
Synthetic node populations and link formation.
"""
from typing import Tuple

import numpy as np
import structlog
from scipy.special import expit

from models.network import CovariateSet, GraphonSpec, LatentSet, Network, ProbabilityMatrix
from utils.random import stream

logger = structlog.get_logger()

# Curvature of the latent distance penalty in the simulation graphon
LATENT_CURVATURE = 1.0 / 8.0


def generate_population(n_nodes: int, seed: int) -> Tuple[CovariateSet, LatentSet]:
    """
    Draw covariates and latent factors for one network.

    xi_i ~ N(0, I_2) and X_id = 0.5 (xi_i1 + xi_i2) + U[-1, 1], d = 1, 2.

    Args:
        n_nodes: Number of nodes, at least 2
        seed: Root seed; the draw is deterministic given it

    Returns:
        (covariates, latent factors)
    """
    if n_nodes < 2:
        raise ValueError(f"n_nodes must be at least 2, got {n_nodes}")

    rng = stream(seed, "population")
    xi = rng.standard_normal((n_nodes, 2))
    noise = rng.uniform(-1.0, 1.0, size=(n_nodes, 2))
    X = 0.5 * (xi[:, [0]] + xi[:, [1]]) + noise
    return CovariateSet(X=X), LatentSet(xi=xi)


def generate_block_population(n_nodes: int, n_blocks: int, seed: int) -> Tuple[CovariateSet, LatentSet]:
    """
    Balanced block labels for a stochastic block model, stored in the first
    latent column. The covariate set is empty.
    """
    if n_nodes < 2:
        raise ValueError(f"n_nodes must be at least 2, got {n_nodes}")
    if not 1 <= n_blocks <= n_nodes:
        raise ValueError(f"n_blocks must lie in [1, {n_nodes}], got {n_blocks}")

    rng = stream(seed, "blocks")
    labels = rng.permutation(np.arange(n_nodes) % n_blocks)
    return CovariateSet.empty(n_nodes), LatentSet(xi=labels.astype(float).reshape(-1, 1))


def _mirror_upper(upper: np.ndarray) -> np.ndarray:
    upper = np.triu(upper, k=1)
    return upper + upper.T


def probability_matrix(cov: CovariateSet, lat: LatentSet, spec: GraphonSpec) -> ProbabilityMatrix:
    """
    Evaluate the graphon on every node pair.

    Args:
        cov: Observed covariates
        lat: Latent factors
        spec: Graphon form and parameters

    Returns:
        Symmetric probability matrix with zero diagonal

    Raises:
        ValueError: If covariates, latent factors and parameters disagree in size
    """
    if cov.n_nodes != lat.n_nodes:
        raise ValueError(f"covariates cover {cov.n_nodes} nodes but latent factors cover {lat.n_nodes}")

    if spec.form == "logistic":
        if spec.beta.size != cov.d_x:
            raise ValueError(f"beta has length {spec.beta.size} but there are {cov.d_x} covariates")
        if lat.d_xi < 2:
            raise ValueError(f"the simulation graphon needs two latent factors, got {lat.d_xi}")
        X, xi = cov.X, lat.xi
        omega = (X[:, None, :] - X[None, :, :]) ** 2
        index = (
            omega @ spec.beta
            + xi[:, None, 0]
            + xi[None, :, 0]
            - LATENT_CURVATURE * (xi[:, None, 1] - xi[None, :, 1]) ** 2
        )
        P = _mirror_upper(expit(index))
    elif spec.form == "sbm":
        labels = lat.xi[:, 0].astype(np.int64)
        n_blocks = spec.block_probs.shape[0]
        if labels.min() < 0 or labels.max() >= n_blocks:
            raise ValueError(f"block labels must lie in [0, {n_blocks})")
        P = _mirror_upper(spec.block_probs[np.ix_(labels, labels)])
    else:
        rows, cols = np.triu_indices(cov.n_nodes, k=1)
        index = np.asarray(
            spec.index_fn(cov.X[rows], lat.xi[rows], cov.X[cols], lat.xi[cols]), dtype=float
        ).reshape(-1)
        if index.size != rows.size:
            raise ValueError("custom index function must return one value per node pair")
        P = np.zeros((cov.n_nodes, cov.n_nodes))
        P[rows, cols] = expit(index)
        P = P + P.T

    logger.debug("probability_matrix_built", form=spec.form, n_nodes=cov.n_nodes)
    return ProbabilityMatrix(P=P)


def sample_network(prob: ProbabilityMatrix, seed: int) -> Network:
    """Independent Bernoulli draws on the upper triangle, mirrored."""
    rng = stream(seed, "links")
    draws = rng.random((prob.n_nodes, prob.n_nodes)) < prob.P
    return Network(adj=_mirror_upper(draws.astype(float)))


def generate_world(
    n_nodes: int, spec: GraphonSpec, seed: int
) -> Tuple[CovariateSet, LatentSet, ProbabilityMatrix, Network]:
    """
    Population, probabilities and realized network from one seed.

    Block graphons draw two balanced blocks' labels; other forms use the
    two-factor simulation population.
    """
    if spec.form == "sbm":
        cov, lat = generate_block_population(n_nodes, spec.block_probs.shape[0], seed)
    else:
        cov, lat = generate_population(n_nodes, seed)
    prob = probability_matrix(cov, lat, spec)
    net = sample_network(prob, seed)
    return cov, lat, prob, net
