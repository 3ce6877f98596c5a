"""
Tests for the downstream estimators: centrality regression and peer effects.
"""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial import ConvexHull

from estimators.centrality import centrality_ols, degree_centrality, eigenvector_centrality, row_normalize
from estimators.covariance import clustered_sandwich, cov_cluster, group_debias_coefficient
from estimators.peer_effects import (
    build_instruments,
    peer_covariates,
    peer_effects_gmm,
    simulate_peer_outcomes,
)
from models.network import CovariateSet, GraphonSpec, LatentSet
from models.request import PeerEffectsParameters
from netmodel.formation import generate_world
from utils.errors import ConvergenceError, WeakIdentificationError


def test_row_normalize_keeps_zero_rows():
    A = np.array([[0, 1, 1], [1, 0, 0], [1, 0, 0.0]])
    A[1, 0] = A[0, 1] = 0.0
    normalized = row_normalize(A)
    assert normalized.zero_rows.tolist() == [1]
    assert normalized.G[0].tolist() == [0.0, 0.0, 1.0]
    assert normalized.G[1].tolist() == [0.0, 0.0, 0.0]
    assert normalized.G[2].tolist() == [1.0, 0.0, 0.0]


def test_degree_centrality(toy_network):
    assert degree_centrality(toy_network.adj).tolist() == pytest.approx([3 / 6, 3 / 6, 2 / 6, 2 / 6, 2 / 6, 2 / 6])


@given(seed=st.integers(min_value=0, max_value=100_000))
def test_eigenvector_centrality_matches_dense_solver(seed):
    rng = np.random.default_rng(seed)
    upper = np.triu(rng.uniform(0.0, 1.0, size=(8, 8)), k=1)
    A = upper + upper.T

    lam, U = np.linalg.eigh(A)
    leading = U[:, np.argmax(lam)]
    expected = np.sqrt(8) * (leading if leading.sum() >= 0 else -leading)

    assert np.allclose(eigenvector_centrality(A), expected, atol=1e-8)


def test_eigenvector_centrality_on_bipartite_star():
    A = np.zeros((4, 4))
    A[0, 1:] = A[1:, 0] = 1.0
    phi = eigenvector_centrality(A)
    assert phi[0] == pytest.approx(np.sqrt(2), abs=1e-8)
    assert phi[1:] == pytest.approx(np.full(3, 2 / np.sqrt(6)), abs=1e-8)


def test_eigenvector_centrality_degenerate_and_invalid():
    assert eigenvector_centrality(np.zeros((3, 3))).tolist() == [0.0, 0.0, 0.0]
    with pytest.raises(ValueError):
        eigenvector_centrality(np.array([[0, 1], [0, 0.0]]))
    with pytest.raises(ValueError):
        eigenvector_centrality(np.array([[0, -1], [-1, 0.0]]))


def test_eigenvector_centrality_iteration_cap():
    rng = np.random.default_rng(3)
    upper = np.triu(rng.uniform(size=(6, 6)), k=1)
    with pytest.raises(ConvergenceError):
        eigenvector_centrality(upper + upper.T, max_iter=1)


def test_centrality_ols_recovers_noiseless_coefficients():
    rng = np.random.default_rng(0)
    phi = [rng.uniform(size=10) for _ in range(3)]
    y = [1.0 + 2.0 * p for p in phi]

    estimate = centrality_ols(y, phi)

    assert estimate.alpha_c == pytest.approx(1.0, abs=1e-10)
    assert estimate.alpha_1 == pytest.approx(2.0, abs=1e-10)
    assert estimate.se_cluster == pytest.approx((0.0, 0.0), abs=1e-8)
    assert estimate.n_networks == 3
    assert estimate.n_obs == 30


def test_centrality_ols_clustered_standard_errors():
    rng = np.random.default_rng(1)
    phi = [rng.uniform(size=12) for _ in range(4)]
    y = [0.5 + 1.5 * p + rng.normal(size=12) for p in phi]

    estimate = centrality_ols(y, phi)

    X = np.column_stack([np.ones(48), np.concatenate(phi)])
    Y = np.concatenate(y)
    coef = np.linalg.solve(X.T @ X, X.T @ Y)
    resid = Y - X @ coef
    bread = np.linalg.inv(X.T @ X)
    scores = [X[m * 12 : (m + 1) * 12].T @ resid[m * 12 : (m + 1) * 12] for m in range(4)]
    meat = sum(np.outer(s, s) for s in scores)
    cov = 4 / 3 * bread @ meat @ bread

    assert (estimate.alpha_c, estimate.alpha_1) == pytest.approx(tuple(coef))
    assert estimate.se_cluster == pytest.approx(tuple(np.sqrt(np.diag(cov))))


def test_centrality_ols_single_cluster_has_no_standard_errors():
    phi = [np.linspace(0, 1, 10)]
    estimate = centrality_ols([2 * phi[0]], phi)
    assert estimate.se_cluster is None

    shared = centrality_ols([2 * phi[0], 2 * phi[0]], [phi[0], phi[0]], cluster=[7, 7])
    assert shared.se_cluster is None


def test_centrality_ols_weak_identification_and_shapes():
    with pytest.raises(WeakIdentificationError):
        centrality_ols([np.ones(5)], [np.full(5, 0.3)])
    with pytest.raises(ValueError):
        centrality_ols([np.ones(5)], [np.ones(4)])
    with pytest.raises(ValueError):
        centrality_ols([], [])


PARAMS = PeerEffectsParameters(alpha_c=0.3, alpha_ybar=0.5, alpha_w=[1.0, -0.5], alpha_wbar=[0.8, 0.4])


def peer_data(n_networks: int, seed: int, noise_sd: float = 0.0):
    rng = np.random.default_rng(seed)
    data = []
    for m in range(n_networks):
        cov, lat, _, net = generate_world(30, GraphonSpec(), seed=seed * 100 + m)
        G = row_normalize(net.adj)
        W = peer_covariates(cov, lat)
        e = rng.normal(0.0, noise_sd, size=30) if noise_sd > 0 else np.zeros(30)
        data.append((G, W, simulate_peer_outcomes(G, W, PARAMS, 0.0, e)))
    return data


def test_instruments_layout():
    G = row_normalize(np.array([[0, 1, 1], [1, 0, 0], [1, 0, 0.0]])).G
    W = np.array([[1.0], [2.0], [3.0]])
    Z = build_instruments(G, W)
    assert Z.shape == (3, 4)
    assert Z[:, 0].tolist() == [1.0, 1.0, 1.0]
    assert Z[:, 2].tolist() == pytest.approx([2.5, 1.0, 1.0])
    assert np.allclose(Z[:, 3], G @ (G @ W)[:, 0])


def test_reduced_form_solves_structural_equation():
    data = peer_data(1, seed=2)
    G, W, Y = data[0]
    structural = PARAMS.alpha_c + PARAMS.alpha_ybar * G.G @ Y + W @ PARAMS.alpha_w + G.G @ W @ PARAMS.alpha_wbar
    assert np.allclose(Y, structural)


def test_peer_covariates_formula():
    cov = CovariateSet(X=[[1.0, 2.0]])
    lat = LatentSet(xi=[[0.5, -1.0]])
    assert peer_covariates(cov, lat).tolist() == [[0.75, -2.0]]


def test_explosive_peer_effect_is_rejected():
    G = np.ones((4, 4))
    with pytest.raises(ValueError):
        simulate_peer_outcomes(G, np.zeros((4, 2)), PARAMS, 0.0, np.zeros(4))


def test_gmm_recovers_noiseless_parameters():
    estimate = peer_effects_gmm(peer_data(3, seed=1))
    assert np.allclose(estimate.alpha, PARAMS.as_vector(), atol=1e-8)
    assert estimate.n_networks == 3
    assert estimate.se_cluster is not None
    assert np.allclose(estimate.se_cluster, 0.0, atol=1e-6)


def test_gmm_with_projection_weight_is_two_stage_least_squares():
    data = peer_data(1, seed=4, noise_sd=1.0)
    G, W, Y = data[0]
    Z = build_instruments(G, W)
    V = np.column_stack([np.ones(30), G.G @ Y, W, G.G @ W])
    weight = np.linalg.inv(Z.T @ Z)
    weight = 0.5 * (weight + weight.T)

    estimate = peer_effects_gmm(data, weight=weight)

    projection = Z @ weight @ Z.T
    expected = np.linalg.solve(V.T @ projection @ V, V.T @ projection @ Y)
    assert np.allclose(estimate.alpha, expected, atol=1e-8)
    assert estimate.se_cluster is None


def test_gmm_without_links_is_not_identified():
    _, W, Y = peer_data(1, seed=5)[0]
    with pytest.raises(WeakIdentificationError):
        peer_effects_gmm([(np.zeros((30, 30)), W, Y)])


def test_gmm_weight_validation():
    data = peer_data(1, seed=6)
    with pytest.raises(ValueError):
        peer_effects_gmm(data, weight="optimal")
    with pytest.raises(ValueError):
        peer_effects_gmm(data, weight=np.eye(3))
    asymmetric = np.eye(7)
    asymmetric[0, 1] = 1.0
    with pytest.raises(ValueError):
        peer_effects_gmm(data, weight=asymmetric)
    with pytest.raises(ValueError):
        peer_effects_gmm(data, weight=-np.eye(7))


def test_gmm_rejects_inconsistent_networks():
    data = peer_data(2, seed=7)
    G, W, Y = data[1]
    with pytest.raises(ValueError):
        peer_effects_gmm([data[0], (G, W[:, :1], Y)])
    with pytest.raises(ValueError):
        peer_effects_gmm([(G, W, Y[:10])])
    with pytest.raises(ValueError):
        peer_effects_gmm([])


NOISY_PEERS = peer_data(3, seed=8, noise_sd=1.0)


@given(c=st.floats(min_value=0.01, max_value=100.0))
def test_gmm_is_invariant_to_scaled_identity_weight(c):
    base = peer_effects_gmm(NOISY_PEERS)
    scaled = peer_effects_gmm(NOISY_PEERS, weight=c * np.eye(7))
    assert np.allclose(scaled.alpha, base.alpha, rtol=1e-8, atol=1e-10)
    assert np.allclose(scaled.se_cluster, base.se_cluster, rtol=1e-6, atol=1e-10)


@given(seed=st.integers(min_value=0, max_value=100_000))
def test_peer_instruments_stay_inside_covariate_hull(seed):
    rng = np.random.default_rng(seed)
    W = rng.normal(size=(12, 2))
    A = rng.uniform(0.0, 1.0, size=(12, 12)) * (rng.random((12, 12)) < 0.5)
    A[np.arange(12), rng.integers(0, 12, size=12)] += 0.1
    G = A / A.sum(axis=1, keepdims=True)

    Z = build_instruments(G, W)
    hull = ConvexHull(W)
    normals, offsets = hull.equations[:, :2], hull.equations[:, 2]
    for block in (Z[:, 3:5], Z[:, 5:7]):
        assert np.all(block @ normals.T + offsets <= 1e-10)


def test_cluster_meat_sums_scores_within_clusters():
    rng = np.random.default_rng(4)
    scores = rng.normal(size=(9, 2))
    clusters = np.array([2, 0, 2, 1, 0, 1, 1, 2, 0])

    expected = np.zeros((2, 2))
    for g in (0, 1, 2):
        s = scores[clusters == g].sum(axis=0)
        expected += np.outer(s, s)
    assert np.allclose(cov_cluster(scores, clusters), expected)
    assert group_debias_coefficient(clusters) == pytest.approx(1.5)

    bread = np.array([[2.0, 0.5], [0.5, 1.0]])
    assert np.allclose(clustered_sandwich(bread, scores, clusters), bread @ (1.5 * expected) @ bread)
    assert clustered_sandwich(bread, scores, np.zeros(9)) is None
    with pytest.raises(ValueError):
        group_debias_coefficient(np.zeros(9))
    with pytest.raises(ValueError):
        cov_cluster(scores, clusters[:-1])


def test_ci_profile_runs_more_examples():
    assert settings.get_profile("ci").max_examples == 200
