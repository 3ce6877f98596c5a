"""
Data bundles: the on-disk form of one egocentrically sampled network.

A bundle is a directory of comma-separated files with header rows:

    bundle.txt            node_count=<N>
    edges.csv             source,target       observed links, 0-based ids
    sampled.csv           node                surveyed nodes
    covariates.csv        node,x1,...,xd      optional; absent or bare header means no covariates
    outcomes.csv          node,y              optional
    peer_covariates.csv   node,w1,...,wd      optional
    probabilities.csv     N x N matrix        optional; true link probabilities of simulated bundles

Matrices are written with a header row of node ids followed by N rows of N
values at 17 significant digits, which round-trips doubles exactly.
"""
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
import structlog
from dotenv.parser import parse_stream
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from models.network import CovariateSet, Network, PartialNetwork, ProbabilityMatrix
from utils.errors import BundleError

logger = structlog.get_logger()

PathLike = Union[str, Path]

FLOAT_FORMAT = "%.17g"
HEADER_LINE = 1


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


class DataBundle(BaseModel):
    """Observed links, sample, and node data of one network."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    node_count: int = Field(..., ge=2)
    edges: np.ndarray = Field(..., description="E x 2 observed links, each with a sampled endpoint")
    sampled: np.ndarray = Field(..., description="Sorted unique sampled node ids")
    covariates: np.ndarray = Field(..., description="N x d_X covariates; d_X may be 0")
    outcomes: Optional[np.ndarray] = Field(default=None, description="Outcome per node")
    peer_covariates: Optional[np.ndarray] = Field(default=None, description="N x d_W peer-effect covariates")
    probabilities: Optional[np.ndarray] = Field(default=None, description="True link probabilities")
    rejected_edges: int = Field(default=0, ge=0, description="Edges dropped for having no sampled endpoint")

    @field_validator("edges", mode="before")
    @classmethod
    def validate_edges(cls, v: Any) -> np.ndarray:
        return _frozen(np.array(v, dtype=np.int64).reshape(-1, 2))

    @field_validator("sampled", mode="before")
    @classmethod
    def validate_sampled(cls, v: Any) -> np.ndarray:
        nodes = np.array(v, dtype=np.int64).reshape(-1)
        if np.unique(nodes).size != nodes.size:
            raise ValueError("sampled ids must be unique")
        return _frozen(np.sort(nodes))

    @field_validator("covariates", "outcomes", "peer_covariates", "probabilities", mode="before")
    @classmethod
    def validate_tables(cls, v: Any) -> Optional[np.ndarray]:
        if v is None:
            return None
        return _frozen(np.array(v, dtype=float))

    @model_validator(mode="after")
    def check_consistency(self) -> "DataBundle":
        n = self.node_count
        if self.edges.size and (self.edges.min() < 0 or self.edges.max() >= n):
            raise ValueError(f"edge endpoints must lie in [0, {n})")
        if self.sampled.size == 0 or self.sampled[0] < 0 or self.sampled[-1] >= n:
            raise ValueError(f"sampled ids must be nonempty and lie in [0, {n})")
        if self.covariates.ndim != 2 or self.covariates.shape[0] != n:
            raise ValueError(f"covariates must have {n} rows")
        if self.outcomes is not None and self.outcomes.shape != (n,):
            raise ValueError(f"outcomes must have {n} entries")
        if self.peer_covariates is not None and (
            self.peer_covariates.ndim != 2 or self.peer_covariates.shape[0] != n
        ):
            raise ValueError(f"peer covariates must have {n} rows")
        if self.probabilities is not None and self.probabilities.shape != (n, n):
            raise ValueError(f"probabilities must be {n} x {n}")
        return self

    def adjacency(self) -> np.ndarray:
        """Observed adjacency; unobserved pairs are zero."""
        adj = np.zeros((self.node_count, self.node_count))
        adj[self.edges[:, 0], self.edges[:, 1]] = 1.0
        adj[self.edges[:, 1], self.edges[:, 0]] = 1.0
        return adj

    def partial_network(self) -> PartialNetwork:
        return PartialNetwork(base=Network(adj=self.adjacency()), sampled=self.sampled)

    def covariate_set(self) -> CovariateSet:
        return CovariateSet(X=self.covariates)

    def probability_matrix(self) -> Optional[ProbabilityMatrix]:
        return None if self.probabilities is None else ProbabilityMatrix(P=self.probabilities)


def read_key_values(path: PathLike) -> Dict[str, str]:
    """
    Flat key=value file in the same syntax as the config file.

    Blank lines and '#' comments are skipped.

    Raises:
        BundleError: With the line number of the first entry that is not key=value
    """
    values: Dict[str, str] = {}
    with open(path, encoding="utf-8") as f:
        for binding in parse_stream(f):
            if binding.key is None and not binding.error:
                continue
            if binding.error or binding.value is None:
                text = binding.original.string
                # the binding starts at any blank lines preceding the entry
                blank = text[: len(text) - len(text.lstrip())].count("\n")
                raise BundleError("expected key=value", path=str(path), line=binding.original.line + blank)
            values[binding.key] = binding.value
    return values


def write_key_values(path: PathLike, values: Dict[str, Any]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for key, value in values.items():
            if isinstance(value, float):
                value = FLOAT_FORMAT % value
            f.write(f"{key}={value}\n")


def _read_table(path: Path, required: List[str], prefix: Optional[str] = None) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except pd.errors.EmptyDataError:
        return pd.DataFrame(columns=required)
    except pd.errors.ParserError as e:
        raise BundleError(f"could not parse: {e}", path=str(path)) from e

    columns = [str(c).strip() for c in frame.columns]
    frame.columns = columns
    missing = [c for c in required if c not in columns]
    if missing:
        raise BundleError(f"missing columns {missing}", path=str(path), line=HEADER_LINE)
    if prefix is not None:
        extra = [c for c in columns if c not in required]
        expected = [f"{prefix}{k + 1}" for k in range(len(extra))]
        if extra != expected:
            raise BundleError(f"expected value columns {expected}, got {extra}", path=str(path), line=HEADER_LINE)

    for column in frame.columns:
        numeric = pd.to_numeric(frame[column], errors="coerce")
        bad = ~np.isfinite(numeric.to_numpy(dtype=float, na_value=np.nan))
        if bad.any():
            row = int(np.flatnonzero(bad)[0])
            raise BundleError(
                f"column {column!r} has a missing or non-numeric value",
                path=str(path),
                line=row + HEADER_LINE + 1,
            )
        frame[column] = numeric
    return frame


def _node_ids(frame: pd.DataFrame, path: Path, n: int) -> np.ndarray:
    nodes = frame["node"].to_numpy()
    for row, node in enumerate(nodes):
        if node != int(node) or not 0 <= node < n:
            raise BundleError(f"node id {node} is not an integer in [0, {n})", path=str(path), line=row + 2)
    nodes = nodes.astype(np.int64)
    seen: Dict[int, int] = {}
    for row, node in enumerate(nodes):
        if node in seen:
            raise BundleError(f"duplicate node id {node}", path=str(path), line=row + 2)
        seen[int(node)] = row
    return nodes


def _node_table(path: Path, n: int, prefix: str) -> np.ndarray:
    frame = _read_table(path, ["node"], prefix=prefix)
    columns = [c for c in frame.columns if c != "node"]
    if frame.empty:
        if columns:
            raise BundleError("header names value columns but there are no rows", path=str(path))
        return np.zeros((n, 0))
    nodes = _node_ids(frame, path, n)
    if nodes.size != n:
        raise BundleError(f"expected one row per node ({n}), got {nodes.size}", path=str(path))
    table = np.zeros((n, len(columns)))
    table[nodes] = frame[columns].to_numpy(dtype=float)
    return table


def _read_edges(path: Path, n: int, is_sampled: np.ndarray) -> Tuple[np.ndarray, int]:
    frame = _read_table(path, ["source", "target"])
    pairs = frame[["source", "target"]].to_numpy()
    kept: List[Tuple[int, int]] = []
    rejected = 0
    for row, (i, j) in enumerate(pairs):
        line = row + HEADER_LINE + 1
        if i != int(i) or j != int(j):
            raise BundleError(f"edge ({i}, {j}) has non-integer endpoints", path=str(path), line=line)
        i, j = int(i), int(j)
        if not (0 <= i < n and 0 <= j < n):
            raise BundleError(f"edge ({i}, {j}) has an endpoint outside [0, {n})", path=str(path), line=line)
        if i == j:
            raise BundleError(f"self-loop on node {i}", path=str(path), line=line)
        if not (is_sampled[i] or is_sampled[j]):
            rejected += 1
            continue
        kept.append((i, j))
    return np.array(kept, dtype=np.int64).reshape(-1, 2), rejected


def read_matrix(path: PathLike) -> np.ndarray:
    """Square matrix written by `write_matrix`."""
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise BundleError(f"could not parse matrix: {e}", path=str(path)) from e
    matrix = frame.to_numpy(dtype=float)
    if matrix.shape[0] != matrix.shape[1]:
        raise BundleError(f"matrix is {matrix.shape[0]} x {matrix.shape[1]}, expected square", path=str(path))
    return matrix


def write_matrix(path: PathLike, matrix: np.ndarray) -> None:
    matrix = np.asarray(matrix)
    frame = pd.DataFrame(matrix, columns=[str(k) for k in range(matrix.shape[1])])
    if matrix.dtype == bool:
        frame = frame.astype(int)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def load_bundle(directory: PathLike) -> DataBundle:
    """
    Read and validate a bundle directory.

    Args:
        directory: Bundle directory

    Returns:
        Validated bundle; edges with no sampled endpoint are dropped and counted

    Raises:
        BundleError: On parse errors (with file and line), duplicate ids, or out-of-range endpoints
        OSError: If a required file is missing
    """
    root = Path(directory)
    meta_path = root / "bundle.txt"
    meta = read_key_values(meta_path)
    try:
        n = int(meta["node_count"])
    except (KeyError, ValueError) as e:
        raise BundleError("node_count must be an integer", path=str(meta_path)) from e
    if n < 2:
        raise BundleError(f"node_count must be at least 2, got {n}", path=str(meta_path))

    sampled_path = root / "sampled.csv"
    sampled = _node_ids(_read_table(sampled_path, ["node"]), sampled_path, n)
    if sampled.size == 0:
        raise BundleError("no sampled nodes", path=str(sampled_path))
    is_sampled = np.zeros(n, dtype=bool)
    is_sampled[sampled] = True

    edges, rejected = _read_edges(root / "edges.csv", n, is_sampled)
    if rejected:
        logger.warning("unobservable_edges_rejected", path=str(root / "edges.csv"), count=rejected)

    cov_path = root / "covariates.csv"
    covariates = _node_table(cov_path, n, "x") if cov_path.exists() else np.zeros((n, 0))

    outcomes = None
    if (root / "outcomes.csv").exists():
        frame = _read_table(root / "outcomes.csv", ["node", "y"])
        nodes = _node_ids(frame, root / "outcomes.csv", n)
        if nodes.size != n:
            raise BundleError(f"expected one outcome per node ({n}), got {nodes.size}", path=str(root / "outcomes.csv"))
        outcomes = np.zeros(n)
        outcomes[nodes] = frame["y"].to_numpy(dtype=float)

    peer = _node_table(root / "peer_covariates.csv", n, "w") if (root / "peer_covariates.csv").exists() else None
    probabilities = read_matrix(root / "probabilities.csv") if (root / "probabilities.csv").exists() else None

    try:
        bundle = DataBundle(
            node_count=n,
            edges=edges,
            sampled=sampled,
            covariates=covariates,
            outcomes=outcomes,
            peer_covariates=peer,
            probabilities=probabilities,
            rejected_edges=rejected,
        )
    except ValueError as e:
        raise BundleError(str(e), path=str(root)) from e

    logger.info(
        "bundle_loaded",
        path=str(root),
        node_count=n,
        n_sampled=int(sampled.size),
        n_edges=int(edges.shape[0]),
        d_x=int(covariates.shape[1]),
        rejected_edges=rejected,
    )
    return bundle


def save_bundle(bundle: DataBundle, directory: PathLike) -> None:
    """Write a bundle directory that `load_bundle` reads back exactly."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    n = bundle.node_count

    write_key_values(root / "bundle.txt", {"node_count": n})
    pd.DataFrame(bundle.edges, columns=["source", "target"]).to_csv(
        root / "edges.csv", index=False, lineterminator="\n"
    )
    pd.DataFrame({"node": bundle.sampled}).to_csv(root / "sampled.csv", index=False, lineterminator="\n")

    def node_frame(table: np.ndarray, prefix: str) -> pd.DataFrame:
        frame = pd.DataFrame(table, columns=[f"{prefix}{k + 1}" for k in range(table.shape[1])])
        frame.insert(0, "node", np.arange(n))
        return frame

    node_frame(bundle.covariates, "x").to_csv(
        root / "covariates.csv", index=False, float_format=FLOAT_FORMAT, lineterminator="\n"
    )
    if bundle.outcomes is not None:
        pd.DataFrame({"node": np.arange(n), "y": bundle.outcomes}).to_csv(
            root / "outcomes.csv", index=False, float_format=FLOAT_FORMAT, lineterminator="\n"
        )
    if bundle.peer_covariates is not None:
        node_frame(bundle.peer_covariates, "w").to_csv(
            root / "peer_covariates.csv", index=False, float_format=FLOAT_FORMAT, lineterminator="\n"
        )
    if bundle.probabilities is not None:
        write_matrix(root / "probabilities.csv", bundle.probabilities)

    logger.info("bundle_saved", path=str(root), node_count=n, n_edges=int(bundle.edges.shape[0]))


def bundle_from_network(
    adj: np.ndarray,
    sampled: np.ndarray,
    covariates: np.ndarray,
    outcomes: Optional[np.ndarray] = None,
    peer_covariates: Optional[np.ndarray] = None,
    probabilities: Optional[np.ndarray] = None,
) -> DataBundle:
    """Bundle of the links a survey of `sampled` would record."""
    n = adj.shape[0]
    is_sampled = np.zeros(n, dtype=bool)
    is_sampled[np.asarray(sampled, dtype=np.int64)] = True
    rows, cols = np.nonzero(np.triu(adj, k=1))
    keep = is_sampled[rows] | is_sampled[cols]
    return DataBundle(
        node_count=n,
        edges=np.column_stack([rows[keep], cols[keep]]),
        sampled=sampled,
        covariates=covariates,
        outcomes=outcomes,
        peer_covariates=peer_covariates,
        probabilities=probabilities,
    )
