"""
Tests for kernels and the covariate first stage.
"""
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from estimators.dyadic import (
    dyad_features,
    fit_pi,
    observed_dyads,
    pairwise_features,
    predict_pi,
    predict_pi_matrix,
    resolve_kind,
    residual_matrix,
)
from estimators.kernel import kernel_eval, kernel_weights
from models.network import CovariateSet, Network
from models.request import DyadFeatureSpec, KernelSpec
from netmodel.sampling import observe
from utils.errors import SingularDesignError


def test_epanechnikov_values():
    spec = KernelSpec(family="epanechnikov", h=1.0)
    assert kernel_eval(spec, 0.0) == pytest.approx(0.75)
    assert kernel_eval(spec, 1.0) == 0.0
    assert kernel_eval(spec, 0.5) == pytest.approx(0.5625)
    assert kernel_eval(spec, -1.5) == 0.0


def test_other_families():
    assert kernel_eval(KernelSpec(family="triangular"), 0.25) == pytest.approx(0.75)
    assert kernel_eval(KernelSpec(family="uniform"), 0.99) == 0.5
    assert kernel_eval(KernelSpec(family="uniform"), 1.01) == 0.0


@given(st.floats(min_value=-3, max_value=3, allow_nan=False), st.sampled_from(["epanechnikov", "triangular", "uniform"]))
def test_kernels_are_even_and_supported_on_unit_interval(u, family):
    spec = KernelSpec(family=family)
    assert kernel_eval(spec, u) == kernel_eval(spec, -u)
    assert kernel_eval(spec, u) >= 0
    if abs(u) > 1:
        assert kernel_eval(spec, u) == 0


def test_kernel_weights_scale_by_bandwidth():
    d = np.array([0.0, 0.1, 0.2, 0.4])
    assert np.allclose(kernel_weights("epanechnikov", d, 0.2), [0.75, 0.5625, 0.0, 0.0])
    with pytest.raises(ValueError):
        kernel_weights("epanechnikov", d, 0.0)


def test_dyad_features_are_symmetric():
    spec = DyadFeatureSpec(mode="squared-difference", d_x=2)
    x_i, x_j = np.array([1.0, -2.0]), np.array([0.5, 1.0])
    assert np.array_equal(dyad_features(spec, x_i, x_j), dyad_features(spec, x_j, x_i))
    assert dyad_features(spec, x_i, x_j).tolist() == [0.25, 9.0]

    absolute = DyadFeatureSpec(mode="absolute-difference", d_x=2)
    assert dyad_features(absolute, x_i, x_j).tolist() == [0.5, 3.0]


def test_dyad_features_check_length():
    with pytest.raises(ValueError):
        dyad_features(DyadFeatureSpec(d_x=2), np.zeros(3), np.zeros(2))


def test_resolve_kind():
    assert resolve_kind("auto", 0) == "none"
    assert resolve_kind("auto", 2) == "local-linear"
    assert resolve_kind("auto", 4) == "linear-projection"
    assert resolve_kind("linear-projection", 1) == "linear-projection"


def linear_world(n: int = 40, n_sampled: int = 16, seed: int = 0):
    """Real-valued network whose link values are linear in the squared covariate gap."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.0, 1.0, size=(n, 1))
    P = 0.6 - 0.5 * (x - x.T) ** 2
    np.fill_diagonal(P, 0.0)
    pn = observe(Network(adj=P), np.arange(n_sampled))
    return P, CovariateSet(X=x), pn


def test_linear_projection_recovers_linear_link_values():
    P, cov, pn = linear_world()
    model = fit_pi(pn, cov, DyadFeatureSpec(d_x=1), kind="linear-projection")
    assert model.coef == pytest.approx([0.6, -0.5], abs=1e-10)

    pi_hat = predict_pi_matrix(model, cov)
    off = ~np.eye(pn.n_nodes, dtype=bool)
    assert np.allclose(pi_hat[off], P[off], atol=1e-10)
    assert np.diag(pi_hat) == pytest.approx(np.full(pn.n_nodes, 0.6))


def test_local_linear_is_exact_for_linear_response():
    P, cov, pn = linear_world()
    model = fit_pi(pn, cov, DyadFeatureSpec(d_x=1), kind="local-linear", bandwidth=10.0)
    C = pn.unsampled
    for i, j in [(C[0], C[1]), (C[2], C[5]), (C[3], C[10])]:
        assert predict_pi(model, cov, i, j) == pytest.approx(P[i, j], abs=1e-9)


def test_local_linear_default_bandwidth_runs(small_world):
    cov, _, _, _, pn = small_world
    model = fit_pi(pn, cov, DyadFeatureSpec(d_x=2), kind="auto")
    assert model.kind == "local-linear"
    assert model.bandwidth.shape == (2,)
    assert np.all(model.bandwidth > 0)
    pi_hat = predict_pi_matrix(model, cov)
    assert np.array_equal(pi_hat, pi_hat.T)
    assert predict_pi(model, cov, 3, 8) == pytest.approx(pi_hat[3, 8])


def test_no_covariates_gives_null_model(small_world):
    *_, pn = small_world
    model = fit_pi(pn, CovariateSet.empty(pn.n_nodes), DyadFeatureSpec(d_x=0))
    assert model.kind == "none"
    assert predict_pi_matrix(model, CovariateSet.empty(pn.n_nodes)).sum() == 0.0


def test_constant_covariate_is_singular():
    _, _, pn = linear_world()
    cov = CovariateSet(X=np.ones((pn.n_nodes, 1)))
    with pytest.raises(SingularDesignError) as info:
        fit_pi(pn, cov, DyadFeatureSpec(d_x=1))
    assert "omega_1" in info.value.columns


def test_spec_and_covariates_must_agree(small_world):
    cov, *_, pn = small_world
    with pytest.raises(ValueError):
        fit_pi(pn, cov, DyadFeatureSpec(d_x=1))


def test_residual_matrix_layout(small_world):
    cov, *_, pn = small_world
    model = fit_pi(pn, cov, DyadFeatureSpec(d_x=2), kind="linear-projection")
    residuals = residual_matrix(pn, model, cov)

    missing = ~pn.observed_mask
    np.fill_diagonal(missing, False)
    assert np.all(np.isnan(residuals.values[missing]))
    observed = pn.observed_mask & ~np.eye(pn.n_nodes, dtype=bool)
    assert np.allclose(residuals.values[observed], (pn.observed_adj - residuals.pi_hat)[observed])
    assert np.allclose(np.diag(residuals.values), -np.diag(residuals.pi_hat))
    assert residuals.observed_values().size == pn.n_nodes * (pn.n_nodes - 1) // 2 - pn.missing_pair_count


def random_binary_world(n: int, n_sampled: int, d_x: int, seed: int):
    rng = np.random.default_rng(seed)
    upper = np.triu(rng.random((n, n)) < 0.3, k=1).astype(float)
    cov = CovariateSet(X=rng.normal(size=(n, d_x)))
    return cov, observe(Network(adj=upper + upper.T), np.arange(n_sampled))


@given(seed=st.integers(min_value=0, max_value=100_000))
def test_linear_projection_residuals_are_orthogonal_to_features(seed):
    cov, pn = random_binary_world(30, 10, 2, seed)
    model = fit_pi(pn, cov, DyadFeatureSpec(d_x=2), kind="linear-projection")
    residuals = residual_matrix(pn, model, cov)

    rows, cols = observed_dyads(pn)
    e = residuals.values[rows, cols]
    omega = pairwise_features("squared-difference", cov.X[rows], cov.X[cols])
    assert abs(e.sum()) < 1e-8
    assert np.allclose(omega.T @ e, 0.0, atol=1e-8 * max(1.0, np.abs(omega).sum()))


@given(seed=st.integers(min_value=0, max_value=100_000))
def test_wide_local_linear_matches_linear_projection(seed):
    cov, pn = random_binary_world(30, 10, 2, seed)
    spec = DyadFeatureSpec(d_x=2)
    wide = fit_pi(pn, cov, spec, kind="local-linear", bandwidth=1e6)
    linear = fit_pi(pn, cov, spec, kind="linear-projection")
    assert np.allclose(predict_pi_matrix(wide, cov), predict_pi_matrix(linear, cov), rtol=0.0, atol=1e-8)


def test_local_linear_matches_weighted_least_squares():
    cov, pn = random_binary_world(10, 4, 1, seed=21)
    rows, cols = observed_dyads(pn)
    assert rows.size == 30
    omega = pairwise_features("squared-difference", cov.X[rows], cov.X[cols])[:, 0]
    y = pn.observed_adj[rows, cols]
    b = 2.0 * omega.max()
    model = fit_pi(pn, cov, DyadFeatureSpec(d_x=1), kind="local-linear", bandwidth=b)

    C = pn.unsampled
    for i, j in [(C[0], C[1]), (C[2], C[5]), (C[3], C[4])]:
        q = (cov.X[i, 0] - cov.X[j, 0]) ** 2
        u = (omega - q) / b
        w = np.where(np.abs(u) < 1.0, 0.75 * (1.0 - u**2), 0.0)
        design = np.column_stack([np.ones(omega.size), omega - q]) * np.sqrt(w)[:, None]
        coef, *_ = np.linalg.lstsq(design, y * np.sqrt(w), rcond=None)
        assert predict_pi(model, cov, i, j) == pytest.approx(coef[0], abs=1e-10)
