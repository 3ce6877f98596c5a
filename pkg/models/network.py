"""
Domain models for networks, node characteristics and imputed adjacency matrices.
"""
from functools import cached_property
from typing import Any, Callable, Dict, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

IndexFunction = Callable[[np.ndarray, np.ndarray, np.ndarray, np.ndarray], np.ndarray]


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


def _square_matrix(value: Any, name: str) -> np.ndarray:
    matrix = np.array(value, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {matrix.shape}")
    if matrix.shape[0] < 1:
        raise ValueError(f"{name} must have at least one node")
    if not np.all(np.isfinite(matrix)):
        raise ValueError(f"{name} has non-finite entries")
    return matrix


def _node_table(value: Any, name: str) -> np.ndarray:
    table = np.array(value, dtype=float)
    if table.ndim == 1:
        table = table.reshape(-1, 1)
    if table.ndim != 2:
        raise ValueError(f"{name} must be a 2-D table, got {table.ndim} dimensions")
    if not np.all(np.isfinite(table)):
        raise ValueError(f"{name} has non-finite entries")
    return _frozen(table)


class Network(BaseModel):
    """
    Undirected network on nodes 0..N-1.

    Entries are links in {0, 1}. Values strictly between 0 and 1 are accepted so
    that a probability matrix can stand in for a network in noiseless checks;
    `is_binary` tells the two apart.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    adj: np.ndarray = Field(..., description="Symmetric N x N adjacency matrix with zero diagonal")

    @field_validator("adj", mode="before")
    @classmethod
    def validate_adjacency(cls, v: Any) -> np.ndarray:
        """Symmetric, zero diagonal, entries in [0, 1]."""
        adj = _square_matrix(v, "adjacency")
        if not np.array_equal(adj, adj.T):
            raise ValueError("adjacency must be symmetric")
        if np.any(np.diag(adj) != 0):
            raise ValueError("adjacency must have a zero diagonal (no self-loops)")
        if np.any((adj < 0) | (adj > 1)):
            raise ValueError("adjacency entries must lie in [0, 1]")
        return _frozen(adj)

    @property
    def n_nodes(self) -> int:
        return int(self.adj.shape[0])

    @property
    def is_binary(self) -> bool:
        return bool(np.all((self.adj == 0) | (self.adj == 1)))

    @property
    def n_edges(self) -> int:
        return int(np.count_nonzero(np.triu(self.adj, k=1)))


class PartialNetwork(BaseModel):
    """
    Egocentrically sampled network.

    Entry (i, j) is observed iff i or j belongs to the sampled set. Entries of
    `base` in the unobserved block are ignored; use `observed_adj`.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    base: Network = Field(..., description="Network whose observed entries are valid")
    sampled: np.ndarray = Field(..., description="Sorted, unique indices of sampled nodes")

    @field_validator("sampled", mode="before")
    @classmethod
    def validate_sampled(cls, v: Any) -> np.ndarray:
        raw = np.asarray(v)
        if raw.ndim != 1:
            raise ValueError("sampled must be a flat list of node indices")
        if raw.size == 0:
            raise ValueError("sampled set must be nonempty")
        if not np.all(np.equal(np.mod(raw, 1), 0)):
            raise ValueError("sampled indices must be integers")
        nodes = raw.astype(np.int64)
        if np.unique(nodes).size != nodes.size:
            raise ValueError("sampled indices must be unique")
        return _frozen(np.sort(nodes))

    @model_validator(mode="after")
    def check_sampled_range(self) -> "PartialNetwork":
        if self.sampled[0] < 0 or self.sampled[-1] >= self.base.n_nodes:
            raise ValueError(
                f"sampled indices must lie in [0, {self.base.n_nodes}), "
                f"got range [{self.sampled[0]}, {self.sampled[-1]}]"
            )
        return self

    @property
    def n_nodes(self) -> int:
        return self.base.n_nodes

    @property
    def n_sampled(self) -> int:
        return int(self.sampled.size)

    @property
    def sampling_rate(self) -> float:
        return self.n_sampled / self.n_nodes

    @cached_property
    def is_sampled(self) -> np.ndarray:
        mask = np.zeros(self.n_nodes, dtype=bool)
        mask[self.sampled] = True
        return _frozen(mask)

    @cached_property
    def unsampled(self) -> np.ndarray:
        return _frozen(np.flatnonzero(~self.is_sampled))

    @cached_property
    def observed_mask(self) -> np.ndarray:
        """N x N boolean mask, True where the entry is observed."""
        touched = self.is_sampled
        return _frozen(touched[:, None] | touched[None, :])

    @cached_property
    def observed_adj(self) -> np.ndarray:
        """Adjacency with every unobserved entry set to zero."""
        return _frozen(np.where(self.observed_mask, self.base.adj, 0.0))

    @property
    def missing_pair_count(self) -> int:
        """Unordered missing dyads, (N-n)(N-n-1)/2."""
        m = self.n_nodes - self.n_sampled
        return m * (m - 1) // 2


class CovariateSet(BaseModel):
    """Observed node covariates X, one row per node. Zero columns means no covariates."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    X: np.ndarray = Field(..., description="N x d_X covariate matrix")

    @field_validator("X", mode="before")
    @classmethod
    def validate_covariates(cls, v: Any) -> np.ndarray:
        return _node_table(v, "covariates")

    @property
    def n_nodes(self) -> int:
        return int(self.X.shape[0])

    @property
    def d_x(self) -> int:
        return int(self.X.shape[1])

    @classmethod
    def empty(cls, n_nodes: int) -> "CovariateSet":
        return cls(X=np.zeros((n_nodes, 0)))


class LatentSet(BaseModel):
    """Latent node factors; simulation only, never read by an imputer."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    xi: np.ndarray = Field(..., description="N x d_xi latent factor matrix")

    @field_validator("xi", mode="before")
    @classmethod
    def validate_latent(cls, v: Any) -> np.ndarray:
        return _node_table(v, "latent factors")

    @property
    def n_nodes(self) -> int:
        return int(self.xi.shape[0])

    @property
    def d_xi(self) -> int:
        return int(self.xi.shape[1])


class GraphonSpec(BaseModel):
    """
    Link-formation model.

    Forms:
        logistic: logistic link of omega(X_i, X_j)'beta + g(xi_i, xi_j), with omega the
            squared covariate differences and
            g = xi_i1 + xi_j1 - (xi_i2 - xi_j2)^2 / 8.
        sbm: P_ij = block_probs[b_i, b_j] with block labels in the first latent column.
        custom: logistic link of index_fn(X_i, xi_i, X_j, xi_j), evaluated on stacked rows.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    form: Literal["logistic", "sbm", "custom"] = Field(default="logistic")
    beta: np.ndarray = Field(
        default_factory=lambda: _frozen(np.array([-0.5, -0.5])),
        description="Homophily coefficients, one per covariate",
    )
    block_probs: Optional[np.ndarray] = Field(default=None, description="K x K block link probabilities")
    index_fn: Optional[IndexFunction] = Field(default=None, description="Custom index function")

    @field_validator("beta", mode="before")
    @classmethod
    def validate_beta(cls, v: Any) -> np.ndarray:
        beta = np.array(v, dtype=float).reshape(-1)
        if not np.all(np.isfinite(beta)):
            raise ValueError("beta must be finite")
        return _frozen(beta)

    @field_validator("block_probs", mode="before")
    @classmethod
    def validate_block_probs(cls, v: Any) -> Optional[np.ndarray]:
        if v is None:
            return None
        probs = _square_matrix(v, "block_probs")
        if not np.array_equal(probs, probs.T):
            raise ValueError("block_probs must be symmetric")
        if np.any((probs < 0) | (probs > 1)):
            raise ValueError("block_probs entries must lie in [0, 1]")
        return _frozen(probs)

    @model_validator(mode="after")
    def check_form_inputs(self) -> "GraphonSpec":
        if self.form == "sbm" and self.block_probs is None:
            raise ValueError("sbm graphon needs block_probs")
        if self.form == "custom" and self.index_fn is None:
            raise ValueError("custom graphon needs index_fn")
        return self

    @classmethod
    def two_block(cls, within: float, across: float) -> "GraphonSpec":
        return cls(form="sbm", block_probs=[[within, across], [across, within]])


class ProbabilityMatrix(BaseModel):
    """Conditional link probabilities P_ij, symmetric with zero diagonal."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    P: np.ndarray = Field(..., description="N x N link probabilities")

    @field_validator("P", mode="before")
    @classmethod
    def validate_probabilities(cls, v: Any) -> np.ndarray:
        probs = _square_matrix(v, "probability matrix")
        if not np.array_equal(probs, probs.T):
            raise ValueError("probability matrix must be symmetric")
        if np.any(np.diag(probs) != 0):
            raise ValueError("probability matrix must have a zero diagonal")
        if np.any((probs < 0) | (probs > 1)):
            raise ValueError("probabilities must lie in [0, 1]")
        return _frozen(probs)

    @property
    def n_nodes(self) -> int:
        return int(self.P.shape[0])

    def mean_link_probability(self) -> float:
        n = self.n_nodes
        return float(self.P.sum() / (n * (n - 1))) if n > 1 else 0.0


class ImputedNetwork(BaseModel):
    """
    Completed adjacency matrix.

    `provenance[i, j]` is True where the entry was imputed and False where it was
    copied from the observed network.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    A_hat: np.ndarray = Field(..., description="N x N imputed adjacency, entries in [0, 1]")
    provenance: np.ndarray = Field(..., description="N x N boolean mask of imputed entries")
    method: str = Field(default="x-ltwfe", description="Imputation method name")
    bandwidth: Optional[float] = Field(default=None, description="Kernel bandwidth actually used")
    fallback_pairs: int = Field(default=0, ge=0, description="Missing dyads filled by the fallback rule")
    metadata: Dict[str, Any] = Field(default_factory=dict)

    @field_validator("A_hat", mode="before")
    @classmethod
    def validate_imputed(cls, v: Any) -> np.ndarray:
        a_hat = _square_matrix(v, "imputed adjacency")
        if np.any((a_hat < 0) | (a_hat > 1)):
            raise ValueError("imputed entries must lie in [0, 1]")
        if np.any(np.diag(a_hat) != 0):
            raise ValueError("imputed adjacency must have a zero diagonal")
        if not np.array_equal(a_hat, a_hat.T):
            raise ValueError("imputed adjacency must be symmetric")
        return _frozen(a_hat)

    @field_validator("provenance", mode="before")
    @classmethod
    def validate_provenance(cls, v: Any) -> np.ndarray:
        return _frozen(np.array(v, dtype=bool))

    @model_validator(mode="after")
    def check_shapes(self) -> "ImputedNetwork":
        if self.provenance.shape != self.A_hat.shape:
            raise ValueError("provenance must have the same shape as A_hat")
        return self

    @property
    def n_nodes(self) -> int:
        return int(self.A_hat.shape[0])

    @property
    def imputed_count(self) -> int:
        return int(np.count_nonzero(np.triu(self.provenance, k=1)))
