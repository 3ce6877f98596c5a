"""
Shared fixtures for the imputation test suite.
"""
import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from models.network import CovariateSet, GraphonSpec, Network, PartialNetwork
from netmodel.formation import generate_world
from netmodel.sampling import egocentric_sample, observe

settings.register_profile(
    "default",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.register_profile("ci", max_examples=200, deadline=None)
settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "default"))


def symmetric_probabilities(n: int, seed: int, low: float = 0.2, high: float = 0.8) -> np.ndarray:
    """Generic real-valued symmetric matrix with zero diagonal, usable as a network."""
    rng = np.random.default_rng(seed)
    upper = np.triu(rng.uniform(low, high, size=(n, n)), k=1)
    return upper + upper.T


@pytest.fixture
def toy_network():
    """Six nodes, nodes 0 and 1 surveyed; links 2-3 and 4-5 are unobservable."""
    adj = np.zeros((6, 6))
    for i, j in [(0, 1), (0, 2), (0, 3), (1, 4), (1, 5), (2, 3), (4, 5)]:
        adj[i, j] = adj[j, i] = 1.0
    return Network(adj=adj)


@pytest.fixture
def toy_partial(toy_network) -> PartialNetwork:
    return observe(toy_network, np.array([0, 1]))


@pytest.fixture
def small_world():
    """60-node simulation world with 24 sampled nodes."""
    cov, lat, prob, net = generate_world(60, GraphonSpec(), seed=7)
    pn = egocentric_sample(net, 24, seed=11)
    return cov, lat, prob, net, pn


@pytest.fixture
def two_block_world():
    cov, lat, prob, net = generate_world(120, GraphonSpec.two_block(0.8, 0.05), seed=3)
    pn = egocentric_sample(net, 60, seed=5)
    return lat.xi[:, 0].astype(int), pn


@pytest.fixture
def additive_world():
    """Noiseless additive link probabilities P_ij = c_i + c_j used as a real-valued network."""
    rng = np.random.default_rng(21)
    n = 30
    c = rng.uniform(0.05, 0.45, size=n)
    P = c[:, None] + c[None, :]
    np.fill_diagonal(P, 0.0)
    pn = observe(Network(adj=P), np.arange(0, n, 2))
    return P, pn


@pytest.fixture
def empty_covariates():
    def make(n: int) -> CovariateSet:
        return CovariateSet.empty(n)

    return make
