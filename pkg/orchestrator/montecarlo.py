"""
Monte Carlo harness for imputation accuracy and downstream estimation.

Every replication draws its own worlds, samples and shocks from streams keyed
by (seed, replication, purpose), so the report does not depend on the number
of workers or the order in which replications finish.
"""
import asyncio
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import structlog
from pydantic import BaseModel, Field

from estimators.centrality import (
    centrality_ols,
    degree_centrality,
    eigenvector_centrality,
    row_normalize,
)
from estimators.peer_effects import peer_covariates, peer_effects_gmm, simulate_peer_outcomes
from imputers import BaseImputer, build_imputer, fallback_imputation
from models.network import (
    CovariateSet,
    GraphonSpec,
    ImputedNetwork,
    LatentSet,
    Network,
    PartialNetwork,
    ProbabilityMatrix,
)
from models.request import BaselineConfig, ExperimentConfig, ExperimentKind
from models.response import CentralityEstimate, McCell, McReport, PeerEffectsEstimate
from netmodel.formation import generate_world
from netmodel.sampling import egocentric_sample
from utils.errors import ConvergenceError, ImputationError, WeakIdentificationError
from utils.random import derive_seed, stream

logger = structlog.get_logger()

COMPLETE_DATA = "cd"

MatrixLike = Union[ImputedNetwork, np.ndarray]
World = Tuple[CovariateSet, LatentSet, ProbabilityMatrix, Network]


class Draw(BaseModel):
    """Outcome of one (method, sampling rate) cell in one replication."""

    method: str
    phi: Optional[float] = None
    values: Optional[Dict[str, float]] = Field(
        default=None, description="None when the downstream estimator is not identified"
    )
    fallbacks: int = Field(default=0, ge=0)


def missing_block_mse(A_hat: MatrixLike, P: ProbabilityMatrix, sampled: Sequence[int]) -> float:
    """
    Mean squared error over ordered pairs i != j with both endpoints unsampled.

    Raises:
        ValueError: On size mismatches or when fewer than two nodes are unsampled
    """
    A = A_hat.A_hat if isinstance(A_hat, ImputedNetwork) else np.asarray(A_hat, dtype=float)
    if A.shape != P.P.shape:
        raise ValueError(f"imputed matrix {A.shape} and probabilities {P.P.shape} differ in size")
    is_sampled = np.zeros(A.shape[0], dtype=bool)
    is_sampled[np.asarray(sampled, dtype=np.int64)] = True
    C = np.flatnonzero(~is_sampled)
    if C.size < 2:
        raise ValueError("the missing block is empty: fewer than two unsampled nodes")
    diff = A[np.ix_(C, C)] - P.P[np.ix_(C, C)]
    np.fill_diagonal(diff, 0.0)
    return float(np.sum(diff**2) / (C.size * (C.size - 1)))


def rmse_missing_block(A_hat: MatrixLike, P: ProbabilityMatrix, sampled: Sequence[int]) -> float:
    """Root of `missing_block_mse` for a single replication."""
    return float(np.sqrt(missing_block_mse(A_hat, P, sampled)))


def aggregate_rmse(mses: Sequence[float]) -> float:
    """Average the per-replication MSEs, then take the root."""
    if len(mses) == 0:
        raise ValueError("no replications to aggregate")
    return float(np.sqrt(np.mean(mses)))


def _dense_eigenvector(A: np.ndarray) -> np.ndarray:
    _, vectors = np.linalg.eigh(A)
    u = vectors[:, -1]
    if u.sum() < 0:
        u = -u
    return np.sqrt(A.shape[0]) * u


def node_centrality(A: np.ndarray, kind: ExperimentKind) -> Tuple[np.ndarray, int]:
    """Degree or eigenvector centrality; returns the vector and 1 if the dense fallback ran."""
    if kind == "centrality-degree":
        return degree_centrality(A), 0
    try:
        return eigenvector_centrality(A), 0
    except ConvergenceError as e:
        logger.warning("power_iteration_fallback", error=str(e))
        return _dense_eigenvector(np.asarray(A, dtype=float)), 1


class MonteCarloHarness:
    """
    Runs replications concurrently and aggregates them into an McReport.
    """

    def __init__(self, config: ExperimentConfig):
        """
        Initialize the harness.

        Args:
            config: Experiment design
        """
        self.config = config
        self.graphon = GraphonSpec(beta=config.beta)

        logger.info(
            "harness_initialized",
            experiment=config.experiment,
            replications=config.replications,
            methods=config.methods,
            phi_list=config.phi_list,
            max_workers=config.max_workers,
        )

    async def run(self) -> McReport:
        """
        Execute every replication and aggregate the cells.

        Returns:
            Report with one cell per (method, sampling rate), plus complete data
            for downstream experiments

        Raises:
            RuntimeError: If every replication failed
        """
        cfg = self.config
        start_time = asyncio.get_event_loop().time()
        semaphore = asyncio.Semaphore(cfg.max_workers)

        async def bounded(rep: int) -> List[Draw]:
            async with semaphore:
                return await asyncio.to_thread(self.replicate, rep)

        reps = list(range(cfg.replication_offset, cfg.replication_offset + cfg.replications))
        logger.info("harness_execution_start", experiment=cfg.experiment, first=reps[0], last=reps[-1])

        outcomes = await asyncio.gather(*(bounded(rep) for rep in reps), return_exceptions=True)

        completed: List[List[Draw]] = []
        failed_count = 0
        for rep, outcome in zip(reps, outcomes):
            if isinstance(outcome, Exception):
                logger.warning(
                    "replication_failed",
                    replication=rep,
                    error=str(outcome),
                    error_type=type(outcome).__name__,
                )
                failed_count += 1
            else:
                completed.append(outcome)

        if not completed:
            raise RuntimeError("All replications failed")

        cells = self._aggregate(completed, failed_count)
        execution_time = asyncio.get_event_loop().time() - start_time
        logger.info(
            "harness_execution_complete",
            experiment=cfg.experiment,
            execution_time=round(execution_time, 2),
            failed_replications=failed_count,
            cells=len(cells),
        )
        return McReport(
            experiment=cfg.experiment,
            replications=cfg.replications,
            replication_offset=cfg.replication_offset,
            seed=cfg.seed,
            cells=cells,
            wall_clock_seconds=execution_time,
        )

    def replicate(self, rep: int) -> List[Draw]:
        """All draws of replication `rep` (a global index, offset included)."""
        if self.config.experiment == "imputation":
            return self._imputation_draws(rep)
        if self.config.experiment == "peer-effects":
            return self._peer_draws(rep)
        return self._centrality_draws(rep)

    def _imputers(self, rep: int) -> Dict[str, BaseImputer]:
        cfg = self.config
        seed = derive_seed(cfg.seed, rep, "impute")
        impute = cfg.impute.model_copy(update={"seed": seed})
        baseline = BaselineConfig(rank_grid=cfg.rank_grid, k_grid=cfg.k_grid, seed=seed)
        return {method: build_imputer(method, impute, baseline) for method in cfg.methods}

    def _impute(self, imputer: BaseImputer, pn: PartialNetwork, cov: CovariateSet) -> ImputedNetwork:
        """Run one method; a failure is replaced by the first-stage fallback and still scored."""
        try:
            return imputer.execute(pn, cov)
        except (ImputationError, np.linalg.LinAlgError) as e:
            logger.warning("method_failed", method=imputer.method, error=str(e), error_type=type(e).__name__)
            return fallback_imputation(pn, cov, imputer.config)

    def _shock_sds(self) -> Tuple[float, float]:
        cfg = self.config
        if cfg.noiseless:
            return 0.0, 0.0
        if cfg.experiment == "peer-effects":
            return cfg.peer_effect_sd, cfg.peer_noise_sd
        return cfg.centrality_effect_sd, cfg.centrality_noise_sd

    def _imputation_draws(self, rep: int) -> List[Draw]:
        cfg = self.config
        cov, _, prob, net = generate_world(cfg.n_nodes, self.graphon, derive_seed(cfg.seed, rep, "world"))
        imputers = self._imputers(rep)

        draws = []
        for k, phi in enumerate(cfg.phi_list):
            pn = egocentric_sample(net, cfg.sampled_count(phi), derive_seed(cfg.seed, rep, "sample", k))
            for method, imputer in imputers.items():
                imputed = self._impute(imputer, pn, cov)
                mse = missing_block_mse(imputed, prob, pn.sampled)
                draws.append(Draw(method=method, phi=phi, values={"mse": mse}, fallbacks=imputed.fallback_pairs))
        return draws

    def _worlds(self, rep: int) -> List[World]:
        cfg = self.config
        return [
            generate_world(cfg.n_nodes, self.graphon, derive_seed(cfg.seed, rep, "world", m))
            for m in range(cfg.n_networks)
        ]

    def _samples(self, rep: int, k: int, phi: float, worlds: List[World]) -> List[PartialNetwork]:
        cfg = self.config
        return [
            egocentric_sample(net, cfg.sampled_count(phi), derive_seed(cfg.seed, rep, "sample", k, m))
            for m, (_, _, _, net) in enumerate(worlds)
        ]

    def _centrality_draws(self, rep: int) -> List[Draw]:
        cfg = self.config
        kind = cfg.experiment
        alpha_0, alpha_1 = cfg.centrality_alpha
        effect_sd, noise_sd = self._shock_sds()
        rng = stream(cfg.seed, rep, "outcomes")

        worlds = self._worlds(rep)
        true_phi, y = [], []
        for _, _, _, net in worlds:
            phi_m, _ = node_centrality(net.adj, kind)
            u = rng.normal(0.0, effect_sd) if effect_sd > 0 else 0.0
            e = rng.normal(0.0, noise_sd, size=cfg.n_nodes) if noise_sd > 0 else np.zeros(cfg.n_nodes)
            true_phi.append(phi_m)
            y.append(alpha_0 + alpha_1 * phi_m + u + e)

        draws = []
        if cfg.include_complete_data:
            draws.append(self._centrality_draw(COMPLETE_DATA, None, y, true_phi, 0))

        imputers = self._imputers(rep)
        for k, phi in enumerate(cfg.phi_list):
            samples = self._samples(rep, k, phi, worlds)
            for method, imputer in imputers.items():
                phis, fallbacks = [], 0
                for pn, (cov, _, _, _) in zip(samples, worlds):
                    imputed = self._impute(imputer, pn, cov)
                    phi_hat, fallback = node_centrality(imputed.A_hat, kind)
                    phis.append(phi_hat)
                    fallbacks += imputed.fallback_pairs + fallback
                draws.append(self._centrality_draw(method, phi, y, phis, fallbacks))
        return draws

    def _centrality_draw(
        self, method: str, phi: Optional[float], y: List[np.ndarray], centralities: List[np.ndarray], fallbacks: int
    ) -> Draw:
        try:
            estimate = centrality_ols(y, centralities)
        except WeakIdentificationError as e:
            logger.warning("estimator_failed", method=method, phi=phi, error=str(e))
            return Draw(method=method, phi=phi, fallbacks=fallbacks)
        return Draw(method=method, phi=phi, values=estimate.as_dict(), fallbacks=fallbacks)

    def _peer_draws(self, rep: int) -> List[Draw]:
        cfg = self.config
        effect_sd, noise_sd = self._shock_sds()
        rng = stream(cfg.seed, rep, "outcomes")

        worlds = self._worlds(rep)
        covariates, outcomes, true_data = [], [], []
        for cov, lat, _, net in worlds:
            W = peer_covariates(cov, lat)
            G = row_normalize(net.adj)
            u = rng.normal(0.0, effect_sd) if effect_sd > 0 else 0.0
            e = rng.normal(0.0, noise_sd, size=cfg.n_nodes) if noise_sd > 0 else np.zeros(cfg.n_nodes)
            Y = simulate_peer_outcomes(G, W, cfg.peer, u, e)
            covariates.append(W)
            outcomes.append(Y)
            true_data.append((G, W, Y))

        draws = []
        if cfg.include_complete_data:
            draws.append(self._peer_draw(COMPLETE_DATA, None, true_data, 0))

        imputers = self._imputers(rep)
        for k, phi in enumerate(cfg.phi_list):
            samples = self._samples(rep, k, phi, worlds)
            for method, imputer in imputers.items():
                data, fallbacks = [], 0
                for pn, (cov, _, _, _), W, Y in zip(samples, worlds, covariates, outcomes):
                    imputed = self._impute(imputer, pn, cov)
                    data.append((row_normalize(imputed.A_hat), W, Y))
                    fallbacks += imputed.fallback_pairs
                draws.append(self._peer_draw(method, phi, data, fallbacks))
        return draws

    def _peer_draw(self, method: str, phi: Optional[float], data: list, fallbacks: int) -> Draw:
        try:
            estimate = peer_effects_gmm(data)
        except WeakIdentificationError as e:
            logger.warning("estimator_failed", method=method, phi=phi, error=str(e))
            return Draw(method=method, phi=phi, fallbacks=fallbacks)
        return Draw(method=method, phi=phi, values=estimate.as_dict(), fallbacks=fallbacks)

    def _truth(self) -> Dict[str, float]:
        cfg = self.config
        if cfg.experiment == "peer-effects":
            estimate = PeerEffectsEstimate(alpha=cfg.peer.as_vector(), n_networks=1)
            return estimate.as_dict()
        alpha_0, alpha_1 = cfg.centrality_alpha
        return CentralityEstimate(alpha_c=alpha_0, alpha_1=alpha_1, n_networks=1, n_obs=2).as_dict()

    def _cell_keys(self) -> List[Tuple[str, Optional[float]]]:
        cfg = self.config
        keys: List[Tuple[str, Optional[float]]] = []
        if cfg.experiment != "imputation" and cfg.include_complete_data:
            keys.append((COMPLETE_DATA, None))
        keys.extend((method, phi) for phi in cfg.phi_list for method in cfg.methods)
        return keys

    def _aggregate(self, completed: List[List[Draw]], failed_replications: int) -> List[McCell]:
        truth = {} if self.config.experiment == "imputation" else self._truth()
        by_rep = [{(d.method, d.phi): d for d in draws} for draws in completed]

        cells = []
        for key in self._cell_keys():
            draws = [rep[key] for rep in by_rep]
            values = [d.values for d in draws if d.values is not None]
            cell = McCell(
                method=key[0],
                phi=key[1],
                replications=len(values),
                fallback_count=sum(d.fallbacks for d in draws),
                failure_count=failed_replications + sum(d.values is None for d in draws),
                values=values,
            )
            if values and self.config.experiment == "imputation":
                cell = cell.model_copy(update={"rmse": aggregate_rmse([v["mse"] for v in values])})
            elif values:
                bias, std = {}, {}
                for name, target in truth.items():
                    series = np.array([v[name] for v in values])
                    bias[name] = float(series.mean() - target)
                    std[name] = float(series.std(ddof=1)) if series.size > 1 else 0.0
                cell = cell.model_copy(update={"bias": bias, "std": std})
            cells.append(cell)
        return cells


def _as_experiment(cfg: ExperimentConfig, kinds: Sequence[ExperimentKind]) -> ExperimentConfig:
    if cfg.experiment in kinds:
        return cfg
    return ExperimentConfig.model_validate({**cfg.model_dump(), "experiment": kinds[0]})


def run_experiment(cfg: ExperimentConfig) -> McReport:
    """Run the harness to completion from synchronous code."""
    return asyncio.run(MonteCarloHarness(cfg).run())


def run_imputation_experiment(cfg: ExperimentConfig) -> McReport:
    """Imputation accuracy: RMSE against the true probabilities on the missing block."""
    return run_experiment(_as_experiment(cfg, ["imputation"]))


def run_centrality_experiment(cfg: ExperimentConfig) -> McReport:
    """Centrality regression: bias and std of (alpha_c, alpha_1); degree unless eigen is requested."""
    return run_experiment(_as_experiment(cfg, ["centrality-degree", "centrality-eigen"]))


def run_peereffects_experiment(cfg: ExperimentConfig) -> McReport:
    """Peer effects: bias and std of every GMM coefficient."""
    return run_experiment(_as_experiment(cfg, ["peer-effects"]))
