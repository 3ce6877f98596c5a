"""
First-stage dyadic regression of observed links on covariate-difference features.

The fitted model Pi-hat captures the part of link formation explained by
covariates; the two-way fixed-effects stage runs on the residuals A - Pi-hat.
"""
from typing import Any, List, Literal, Optional, Tuple

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field, field_validator

from models.network import CovariateSet, PartialNetwork
from models.request import DyadFeatureSpec, FeatureMode, FirstStageKind
from utils.errors import SingularDesignError

from .kernel import kernel_weights

logger = structlog.get_logger()

PiKind = Literal["local-linear", "linear-projection", "none"]

LOCAL_LINEAR_MAX_DIM = 3
QUERY_CHUNK = 256
CONDITION_LIMIT = 1e10


def dyad_features(spec: DyadFeatureSpec, x_i: np.ndarray, x_j: np.ndarray) -> np.ndarray:
    """
    Feature vector of a single pair: |x_i - x_j| or (x_i - x_j)^2 elementwise.

    Raises:
        ValueError: If either vector does not have length d_X
    """
    x_i = np.asarray(x_i, dtype=float).reshape(-1)
    x_j = np.asarray(x_j, dtype=float).reshape(-1)
    if x_i.size != spec.d_x or x_j.size != spec.d_x:
        raise ValueError(
            f"covariate vectors must have length {spec.d_x}, got {x_i.size} and {x_j.size}"
        )
    return pairwise_features(spec.mode, x_i[None, :], x_j[None, :])[0]


def pairwise_features(mode: FeatureMode, x_rows: np.ndarray, x_cols: np.ndarray) -> np.ndarray:
    """Row-aligned features for stacked covariate rows of the two endpoints."""
    diff = x_rows - x_cols
    return np.abs(diff) if mode == "absolute-difference" else diff * diff


def resolve_kind(kind: FirstStageKind, d_x: int) -> PiKind:
    """Default: local-linear up to three covariates, linear projection beyond."""
    if d_x == 0:
        return "none"
    if kind == "auto":
        return "local-linear" if d_x <= LOCAL_LINEAR_MAX_DIM else "linear-projection"
    return kind


def _design_columns(d_x: int) -> List[str]:
    return ["intercept"] + [f"omega_{k + 1}" for k in range(d_x)]


def _check_design(design: np.ndarray) -> None:
    rank = np.linalg.matrix_rank(design)
    if rank == design.shape[1]:
        return
    names = _design_columns(design.shape[1] - 1)
    offending = [
        names[c]
        for c in range(design.shape[1])
        if np.linalg.matrix_rank(np.delete(design, c, axis=1)) == rank
    ]
    raise SingularDesignError(offending)


class PiModel(BaseModel):
    """
    Fitted first stage.

    linear-projection keeps the OLS coefficients. local-linear keeps the
    training features, responses and a per-feature bandwidth, plus the global
    OLS fit used where a query's kernel window holds no training dyad.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    kind: PiKind
    feature_mode: FeatureMode = "squared-difference"
    d_x: int = Field(default=0, ge=0)
    coef: Optional[np.ndarray] = Field(default=None, description="OLS coefficients (intercept first)")
    bandwidth: Optional[np.ndarray] = Field(default=None, description="Per-feature local-linear bandwidth")
    train_features: Optional[np.ndarray] = None
    train_response: Optional[np.ndarray] = None

    @field_validator("coef", "bandwidth", "train_features", "train_response", mode="before")
    @classmethod
    def freeze(cls, v: Any) -> Optional[np.ndarray]:
        if v is None:
            return None
        array = np.array(v, dtype=float)
        array.setflags(write=False)
        return array

    @classmethod
    def null(cls) -> "PiModel":
        """Pi-hat identically zero."""
        return cls(kind="none")

    def predict_features(self, omega: np.ndarray) -> np.ndarray:
        """Raw (unclamped) predictions at stacked feature rows."""
        omega = np.asarray(omega, dtype=float).reshape(-1, self.d_x)
        if self.kind == "none":
            return np.zeros(omega.shape[0])
        linear = self.coef[0] + omega @ self.coef[1:]
        if self.kind == "linear-projection":
            return linear
        return self._local_linear(omega, linear)

    def _local_linear(self, omega: np.ndarray, linear: np.ndarray) -> np.ndarray:
        F, y, b = self.train_features, self.train_response, self.bandwidth
        d = self.d_x
        FF = (F[:, :, None] * F[:, None, :]).reshape(F.shape[0], d * d)
        Fy = F * y[:, None]

        out = np.empty(omega.shape[0])
        for start in range(0, omega.shape[0], QUERY_CHUNK):
            q = omega[start : start + QUERY_CHUNK]
            W = np.ones((q.shape[0], F.shape[0]))
            for k in range(d):
                W *= kernel_weights("epanechnikov", F[None, :, k] - q[:, k, None], b[k])

            s0 = W.sum(axis=1)
            s1 = W @ F
            s2 = (W @ FF).reshape(-1, d, d)
            t0 = W @ y
            t1 = W @ Fy

            # moments of (1, omega - q) from raw moments of omega
            M = np.empty((q.shape[0], d + 1, d + 1))
            M[:, 0, 0] = s0
            M[:, 0, 1:] = s1 - q * s0[:, None]
            M[:, 1:, 0] = M[:, 0, 1:]
            M[:, 1:, 1:] = (
                s2
                - q[:, :, None] * s1[:, None, :]
                - s1[:, :, None] * q[:, None, :]
                + q[:, :, None] * q[:, None, :] * s0[:, None, None]
            )
            rhs = np.empty((q.shape[0], d + 1))
            rhs[:, 0] = t0
            rhs[:, 1:] = t1 - q * t0[:, None]

            fitted = linear[start : start + q.shape[0]].copy()
            occupied = s0 > 0
            well_posed = occupied.copy()
            if occupied.any():
                well_posed[occupied] = np.linalg.cond(M[occupied]) < CONDITION_LIMIT
            if well_posed.any():
                fitted[well_posed] = np.linalg.solve(M[well_posed], rhs[well_posed][..., None])[:, 0, 0]
            thin = occupied & ~well_posed
            fitted[thin] = t0[thin] / s0[thin]
            out[start : start + q.shape[0]] = fitted
        return out


def observed_dyads(pn: PartialNetwork) -> Tuple[np.ndarray, np.ndarray]:
    """Unordered observed pairs i < j."""
    rows, cols = np.triu_indices(pn.n_nodes, k=1)
    keep = pn.is_sampled[rows] | pn.is_sampled[cols]
    return rows[keep], cols[keep]


def fit_pi(
    pn: PartialNetwork,
    cov: CovariateSet,
    spec: DyadFeatureSpec,
    kind: FirstStageKind = "auto",
    bandwidth: Optional[float] = None,
) -> PiModel:
    """
    Fit the first stage on every observed dyad.

    Args:
        pn: Partially observed network
        cov: Covariates of all nodes
        spec: Feature construction
        kind: local-linear, linear-projection, or auto
        bandwidth: Local-linear bandwidth shared by all features; defaults to
            sd(omega_k) * m^(-1/(4 + d_X)) per feature

    Returns:
        Fitted model (the null model when there are no covariates)

    Raises:
        SingularDesignError: If feature columns are collinear with each other or the intercept
        ValueError: On size mismatches, too few dyads, or no usable default bandwidth
    """
    if cov.n_nodes != pn.n_nodes:
        raise ValueError(f"covariates cover {cov.n_nodes} nodes, network has {pn.n_nodes}")
    if spec.d_x != cov.d_x:
        raise ValueError(f"feature spec expects {spec.d_x} covariates, got {cov.d_x}")

    resolved = resolve_kind(kind, cov.d_x)
    if resolved == "none":
        logger.info("first_stage_skipped", reason="no_covariates")
        return PiModel.null()

    rows, cols = observed_dyads(pn)
    if rows.size < cov.d_x + 2:
        raise ValueError(f"need at least {cov.d_x + 2} observed dyads, got {rows.size}")

    omega = pairwise_features(spec.mode, cov.X[rows], cov.X[cols])
    response = pn.observed_adj[rows, cols]
    design = np.column_stack([np.ones(rows.size), omega])
    _check_design(design)
    coef, *_ = np.linalg.lstsq(design, response, rcond=None)

    if resolved == "linear-projection":
        logger.info("first_stage_fitted", kind=resolved, n_dyads=int(rows.size), d_x=cov.d_x)
        return PiModel(kind=resolved, feature_mode=spec.mode, d_x=cov.d_x, coef=coef)

    if bandwidth is not None:
        if bandwidth <= 0:
            raise ValueError(f"first-stage bandwidth must be positive, got {bandwidth}")
        b = np.full(cov.d_x, float(bandwidth))
    else:
        spread = omega.std(axis=0, ddof=1)
        if np.any(spread <= 0):
            raise ValueError("no default first-stage bandwidth: a feature is constant; pass one explicitly")
        b = spread * rows.size ** (-1.0 / (4 + cov.d_x))

    logger.info(
        "first_stage_fitted",
        kind=resolved,
        n_dyads=int(rows.size),
        d_x=cov.d_x,
        bandwidth=b.tolist(),
    )
    return PiModel(
        kind=resolved,
        feature_mode=spec.mode,
        d_x=cov.d_x,
        coef=coef,
        bandwidth=b,
        train_features=omega,
        train_response=response,
    )


def predict_pi(model: PiModel, cov: CovariateSet, i: int, j: int) -> float:
    """Raw prediction for one pair; symmetric in (i, j)."""
    if model.kind == "none":
        return 0.0
    omega = pairwise_features(model.feature_mode, cov.X[[i]], cov.X[[j]])
    return float(model.predict_features(omega)[0])


def predict_pi_matrix(model: PiModel, cov: CovariateSet) -> np.ndarray:
    """
    Raw predictions for every pair, mirrored from the upper triangle.

    The diagonal holds the prediction at a zero feature vector, the value the
    two-way fixed-effects stage subtracts from A_ii = 0.
    """
    n = cov.n_nodes
    if model.kind == "none":
        return np.zeros((n, n))
    rows, cols = np.triu_indices(n, k=1)
    omega = pairwise_features(model.feature_mode, cov.X[rows], cov.X[cols])
    values = model.predict_features(np.vstack([omega, np.zeros((1, model.d_x))]))
    pi_hat = np.zeros((n, n))
    pi_hat[rows, cols] = values[:-1]
    pi_hat = pi_hat + pi_hat.T
    np.fill_diagonal(pi_hat, values[-1])
    return pi_hat


class ResidualTable(BaseModel):
    """
    Residuals R = A - Pi-hat on observed entries, NaN on the missing block.

    The diagonal holds 0 - Pi-hat_ii. `pi_hat` keeps the full raw first-stage
    matrix for adding back after imputation.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    values: np.ndarray
    pi_hat: np.ndarray

    @field_validator("values", "pi_hat", mode="before")
    @classmethod
    def freeze(cls, v: Any) -> np.ndarray:
        array = np.array(v, dtype=float)
        array.setflags(write=False)
        return array

    @property
    def n_nodes(self) -> int:
        return int(self.values.shape[0])

    def observed_values(self) -> np.ndarray:
        """Residuals on observed unordered dyads i < j."""
        rows, cols = np.triu_indices(self.n_nodes, k=1)
        vals = self.values[rows, cols]
        return vals[~np.isnan(vals)]


def residual_matrix(pn: PartialNetwork, model: PiModel, cov: CovariateSet) -> ResidualTable:
    """Residuals of the observed links from the fitted first stage."""
    if cov.n_nodes != pn.n_nodes:
        raise ValueError(f"covariates cover {cov.n_nodes} nodes, network has {pn.n_nodes}")
    pi_hat = predict_pi_matrix(model, cov)
    values = np.where(pn.observed_mask, pn.observed_adj - pi_hat, np.nan)
    np.fill_diagonal(values, -np.diag(pi_hat))
    return ResidualTable(values=values, pi_hat=pi_hat)
