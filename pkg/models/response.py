"""
Result models: distance tables, bandwidth selection, downstream estimates and
Monte Carlo reports.
"""
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


def _readonly(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


class PseudoDistanceTable(BaseModel):
    """Pseudo-distances between target nodes (rows) and reference nodes (columns)."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    targets: np.ndarray = Field(..., description="Node ids of the rows")
    references: np.ndarray = Field(..., description="Node ids of the columns")
    d: np.ndarray = Field(..., description="|targets| x |references| nonnegative distances")
    anchor_count: int = Field(..., gt=0, description="Normalizer of the inner average")

    @field_validator("targets", "references", mode="before")
    @classmethod
    def validate_nodes(cls, v: Any) -> np.ndarray:
        return _readonly(np.array(v, dtype=np.int64).reshape(-1))

    @field_validator("d", mode="before")
    @classmethod
    def validate_distances(cls, v: Any) -> np.ndarray:
        d = np.array(v, dtype=float)
        if d.ndim != 2:
            raise ValueError("distance table must be 2-D")
        if np.any(d < 0) or not np.all(np.isfinite(d)):
            raise ValueError("distances must be finite and nonnegative")
        return _readonly(d)

    @model_validator(mode="after")
    def check_shape(self) -> "PseudoDistanceTable":
        if self.d.shape != (self.targets.size, self.references.size):
            raise ValueError(
                f"distance table shape {self.d.shape} does not match "
                f"{self.targets.size} targets x {self.references.size} references"
            )
        return self

    def rows_for(self, nodes: Sequence[int]) -> np.ndarray:
        """Distance rows for the given target node ids, in the given order."""
        position = {int(t): k for k, t in enumerate(self.targets)}
        try:
            index = [position[int(node)] for node in nodes]
        except KeyError as e:
            raise ValueError(f"node {e.args[0]} is not a target of this distance table") from e
        return self.d[index]


class CrossValidationResult(BaseModel):
    """Outcome of a bandwidth search."""

    h_star: float = Field(..., gt=0, description="Selected bandwidth before undersmoothing")
    scores: Dict[float, float] = Field(default_factory=dict, description="Total squared error per h")
    excluded: List[float] = Field(default_factory=list, description="Bandwidths with no scorable pair")
    n_pairs: int = Field(default=0, ge=0, description="CV pairs scored")


class NormalizedNetwork(BaseModel):
    """Row-normalized adjacency G; zero rows stay zero."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    G: np.ndarray = Field(..., description="N x N row-normalized matrix")
    zero_rows: np.ndarray = Field(..., description="Indices of rows with no links")

    @field_validator("G", "zero_rows", mode="before")
    @classmethod
    def freeze(cls, v: Any) -> np.ndarray:
        return _readonly(np.array(v))

    @property
    def n_nodes(self) -> int:
        return int(self.G.shape[0])


class CentralityEstimate(BaseModel):
    """OLS of outcomes on a centrality measure, pooled over networks."""

    alpha_c: float
    alpha_1: float
    se_cluster: Optional[Tuple[float, float]] = Field(
        default=None, description="Cluster-robust standard errors; None with fewer than two networks"
    )
    n_networks: int = Field(..., ge=1)
    n_obs: int = Field(..., ge=2)

    @property
    def se_available(self) -> bool:
        return self.se_cluster is not None

    def as_dict(self) -> Dict[str, float]:
        values = {"alpha_c": self.alpha_c, "alpha_1": self.alpha_1}
        if self.se_cluster is not None:
            values["se_alpha_c"], values["se_alpha_1"] = self.se_cluster
        return values


class PeerEffectsEstimate(BaseModel):
    """
    GMM estimate of (alpha_C, alpha_Ybar, alpha_W, alpha_Wbar) in that order.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    alpha: np.ndarray = Field(..., description="Coefficient vector of length 2 + 2 d_W")
    se_cluster: Optional[np.ndarray] = Field(default=None, description="Cluster-robust standard errors")
    n_networks: int = Field(..., ge=1)

    @field_validator("alpha", "se_cluster", mode="before")
    @classmethod
    def validate_vector(cls, v: Any) -> Optional[np.ndarray]:
        if v is None:
            return None
        vector = np.array(v, dtype=float).reshape(-1)
        if not np.all(np.isfinite(vector)):
            raise ValueError("estimates must be finite")
        return _readonly(vector)

    @model_validator(mode="after")
    def check_shapes(self) -> "PeerEffectsEstimate":
        if self.alpha.size < 4 or self.alpha.size % 2:
            raise ValueError("alpha must hold alpha_C, alpha_Ybar and two equal-length blocks")
        if self.se_cluster is not None:
            if self.se_cluster.shape != self.alpha.shape:
                raise ValueError("se_cluster must match alpha")
            if np.any(self.se_cluster < 0):
                raise ValueError("standard errors must be nonnegative")
        return self

    @property
    def d_w(self) -> int:
        return (self.alpha.size - 2) // 2

    @property
    def alpha_c(self) -> float:
        return float(self.alpha[0])

    @property
    def alpha_ybar(self) -> float:
        return float(self.alpha[1])

    @property
    def alpha_w(self) -> np.ndarray:
        return self.alpha[2 : 2 + self.d_w]

    @property
    def alpha_wbar(self) -> np.ndarray:
        return self.alpha[2 + self.d_w :]

    def coefficient_names(self) -> List[str]:
        return (
            ["alpha_c", "alpha_ybar"]
            + [f"alpha_w{k + 1}" for k in range(self.d_w)]
            + [f"alpha_wbar{k + 1}" for k in range(self.d_w)]
        )

    def as_dict(self) -> Dict[str, float]:
        names = self.coefficient_names()
        values = {name: float(a) for name, a in zip(names, self.alpha)}
        if self.se_cluster is not None:
            values.update({f"se_{name}": float(s) for name, s in zip(names, self.se_cluster)})
        return values


class McCell(BaseModel):
    """Aggregated results for one (method, sampling rate) cell."""

    method: str
    phi: Optional[float] = Field(default=None, description="Sampling rate; None for complete data")
    replications: int = Field(..., ge=0)
    rmse: Optional[float] = Field(default=None, ge=0)
    bias: Dict[str, float] = Field(default_factory=dict)
    std: Dict[str, float] = Field(default_factory=dict)
    fallback_count: int = Field(default=0, ge=0)
    failure_count: int = Field(default=0, ge=0)
    values: List[Dict[str, float]] = Field(
        default_factory=list,
        description="Per-replication raw values (mse or coefficient estimates), in replication order",
    )

    @field_validator("std")
    @classmethod
    def validate_std(cls, v: Dict[str, float]) -> Dict[str, float]:
        if any(s < 0 for s in v.values()):
            raise ValueError("standard deviations must be nonnegative")
        return v


class McReport(BaseModel):
    """Monte Carlo report across methods and sampling rates."""

    experiment: str
    replications: int = Field(..., ge=1)
    replication_offset: int = Field(default=0, ge=0)
    seed: int
    cells: List[McCell] = Field(default_factory=list)
    wall_clock_seconds: float = Field(default=0.0, ge=0)
    created_at: datetime = Field(default_factory=lambda: datetime.now(timezone.utc))

    def cell(self, method: str, phi: Optional[float] = None) -> McCell:
        for cell in self.cells:
            if cell.method != method:
                continue
            if cell.phi is None or phi is None:
                if cell.phi is phi:
                    return cell
            elif np.isclose(cell.phi, phi):
                return cell
        raise KeyError(f"no cell for method={method!r}, phi={phi}")

    def to_frame(self) -> pd.DataFrame:
        """One row per cell; bias/std flattened to bias_<coef>, std_<coef> columns."""
        rows = []
        for cell in self.cells:
            row: Dict[str, Any] = {
                "method": cell.method,
                "phi": cell.phi,
                "replications": cell.replications,
                "rmse": cell.rmse,
                "fallbacks": cell.fallback_count,
                "failures": cell.failure_count,
            }
            row.update({f"bias_{k}": v for k, v in cell.bias.items()})
            row.update({f"std_{k}": v for k, v in cell.std.items()})
            rows.append(row)
        frame = pd.DataFrame(rows)
        if frame.empty:
            return frame
        if frame["rmse"].isna().all():
            frame = frame.drop(columns=["rmse"])
        return frame
