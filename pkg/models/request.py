"""
Run configurations for imputation, baselines, downstream estimation and experiments.
"""
from typing import List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

KernelFamily = Literal["epanechnikov", "triangular", "uniform"]
FeatureMode = Literal["absolute-difference", "squared-difference"]
FirstStageKind = Literal["auto", "local-linear", "linear-projection"]
ExperimentKind = Literal["imputation", "centrality-degree", "centrality-eigen", "peer-effects"]

IMPUTATION_METHODS = (
    "x-ltwfe",
    "x-ltwfe-sp",
    "x",
    "ltwfe",
    "lr",
    "lpca",
    "x-lpca",
    "sampled",
)


def _check_grid(values: List[float], name: str) -> List[float]:
    if not values:
        raise ValueError(f"{name} must be nonempty")
    if any(not np.isfinite(v) or v <= 0 for v in values):
        raise ValueError(f"{name} entries must be positive and finite")
    return sorted(set(values))


class KernelSpec(BaseModel):
    """Kernel family and bandwidth; K is supported on [-1, 1]."""

    family: KernelFamily = Field(default="epanechnikov", description="Kernel family")
    h: float = Field(default=1.0, gt=0, description="Bandwidth applied to pseudo-distances")


class DyadFeatureSpec(BaseModel):
    """How a node pair's covariates become a dyad feature vector."""

    mode: FeatureMode = Field(default="squared-difference")
    d_x: int = Field(..., ge=0, description="Number of covariates, equal to the feature length")


class ImputeConfig(BaseModel):
    """Knobs for local two-way fixed-effects imputation."""

    kernel: KernelFamily = Field(default="epanechnikov")
    h_grid: Union[List[float], Literal["auto"]] = Field(
        default="auto",
        description="Candidate bandwidths, or 'auto' for quantile-anchored geometric points",
    )
    auto_grid_points: int = Field(default=8, ge=1, le=64)
    cv_pair_cap: int = Field(default=20_000, ge=1, description="Max CV prediction pairs")
    undersmooth_multiplier: float = Field(default=1.0, gt=0, le=1)
    split: bool = Field(default=False, description="Use the S1/S2 sample-splitting variant")
    symmetrize: bool = Field(default=True)
    include_diagonal: bool = Field(
        default=True,
        description="Keep reference self-pairs (A_ii = 0) in the kernel grand mean",
    )
    first_stage: FirstStageKind = Field(default="auto")
    feature_mode: FeatureMode = Field(default="squared-difference")
    pi_bandwidth: Optional[float] = Field(default=None, gt=0)
    seed: int = Field(default=0, ge=0)

    @field_validator("h_grid")
    @classmethod
    def validate_h_grid(cls, v: Union[List[float], str]) -> Union[List[float], str]:
        if isinstance(v, str):
            return v
        return _check_grid(v, "h_grid")


class BaselineConfig(BaseModel):
    """Grids for the comparison imputers."""

    method: Literal["x", "lr", "lpca", "x-lpca", "ltwfe"] = Field(default="lr")
    rank_grid: List[int] = Field(default_factory=lambda: [1, 2, 3, 4, 5, 6])
    k_grid: List[int] = Field(default_factory=lambda: [10, 20, 30])
    h_grid: Union[List[float], Literal["auto"]] = Field(default="auto")
    holdout_fraction: float = Field(default=0.1, gt=0, lt=1)
    holdout_cap: int = Field(default=500, ge=1, description="Max held-out pairs scored by local PCA CV")
    seed: int = Field(default=0, ge=0)

    @field_validator("rank_grid", "k_grid")
    @classmethod
    def validate_int_grid(cls, v: List[int]) -> List[int]:
        if not v:
            raise ValueError("grid must be nonempty")
        if any(g < 1 for g in v):
            raise ValueError("grid entries must be positive")
        return sorted(set(v))

    @field_validator("h_grid")
    @classmethod
    def validate_h_grid(cls, v: Union[List[float], str]) -> Union[List[float], str]:
        if isinstance(v, str):
            return v
        return _check_grid(v, "h_grid")


class PeerEffectsParameters(BaseModel):
    """Coefficients of the linear-in-means model."""

    alpha_c: float = Field(default=0.0)
    alpha_ybar: float = Field(default=0.5, gt=-1, lt=1)
    alpha_w: List[float] = Field(default_factory=lambda: [1.0, 1.0])
    alpha_wbar: List[float] = Field(default_factory=lambda: [1.0, 1.0])

    @model_validator(mode="after")
    def check_lengths(self) -> "PeerEffectsParameters":
        if len(self.alpha_w) != len(self.alpha_wbar):
            raise ValueError("alpha_w and alpha_wbar must have the same length")
        return self

    @property
    def d_w(self) -> int:
        return len(self.alpha_w)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([[self.alpha_c, self.alpha_ybar], self.alpha_w, self.alpha_wbar])


class ExperimentConfig(BaseModel):
    """Monte Carlo design."""

    experiment: ExperimentKind = Field(default="imputation")
    n_nodes: int = Field(default=200, ge=4, description="Nodes per network (N)")
    n_networks: int = Field(default=40, ge=1, description="Networks per replication (M)")
    beta: List[float] = Field(default_factory=lambda: [-0.5, -0.5])
    phi_list: List[float] = Field(default_factory=lambda: [0.2, 0.3, 0.4, 0.5])
    methods: List[str] = Field(
        default_factory=lambda: ["x", "lr", "lpca", "x-lpca", "ltwfe", "x-ltwfe", "x-ltwfe-sp"]
    )
    replications: int = Field(default=200, ge=1)
    replication_offset: int = Field(default=0, ge=0)
    seed: int = Field(default=0, ge=0)
    max_workers: int = Field(default=4, ge=1)
    include_complete_data: bool = Field(default=True, description="Add the true-network (CD) cell")
    noiseless: bool = Field(default=False, description="Set outcome random effects and errors to zero")

    impute: ImputeConfig = Field(default_factory=ImputeConfig)
    rank_grid: List[int] = Field(default_factory=lambda: [1, 2, 3, 4, 5, 6])
    k_grid: List[int] = Field(default_factory=lambda: [10, 20, 30])

    centrality_alpha: List[float] = Field(default_factory=lambda: [0.0, 0.5])
    centrality_effect_sd: float = Field(default=0.5, ge=0)
    centrality_noise_sd: float = Field(default=0.5, ge=0)

    peer: PeerEffectsParameters = Field(default_factory=PeerEffectsParameters)
    peer_effect_sd: float = Field(default=0.2, ge=0)
    peer_noise_sd: float = Field(default=1.0, ge=0)

    @field_validator("phi_list")
    @classmethod
    def validate_phi(cls, v: List[float]) -> List[float]:
        if not v:
            raise ValueError("phi_list must be nonempty")
        if any(not 0 < phi < 1 for phi in v):
            raise ValueError("sampling rates must lie strictly between 0 and 1")
        return v

    @field_validator("methods")
    @classmethod
    def validate_methods(cls, v: List[str]) -> List[str]:
        unknown = [m for m in v if m not in IMPUTATION_METHODS]
        if unknown:
            raise ValueError(f"unknown methods {unknown}; choose from {list(IMPUTATION_METHODS)}")
        return v

    @field_validator("centrality_alpha")
    @classmethod
    def validate_centrality_alpha(cls, v: List[float]) -> List[float]:
        if len(v) != 2:
            raise ValueError("centrality_alpha is (alpha_0, alpha_1)")
        return v

    @model_validator(mode="after")
    def check_sample_sizes(self) -> "ExperimentConfig":
        min_sampled = 4 if "x-ltwfe-sp" in self.methods else 2
        for phi in self.phi_list:
            n_sampled = self.sampled_count(phi)
            if n_sampled < min_sampled or n_sampled >= self.n_nodes:
                raise ValueError(
                    f"phi={phi} gives {n_sampled} sampled nodes out of {self.n_nodes}; "
                    f"need between {min_sampled} and {self.n_nodes - 1}"
                )
        if self.experiment == "peer-effects" and len(self.peer.alpha_w) != 2:
            raise ValueError("peer covariates are two-dimensional; alpha_w needs two entries")
        return self

    def sampled_count(self, phi: float) -> int:
        return int(round(phi * self.n_nodes))

    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "experiment": "imputation",
                "n_nodes": 200,
                "beta": [-0.5, -0.5],
                "phi_list": [0.2, 0.4],
                "methods": ["x", "x-ltwfe"],
                "replications": 200,
                "seed": 2024,
            }
        }
    )
