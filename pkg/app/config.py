"""
Application configuration management.

Every knob has a flat key. Values come from, in increasing precedence:
defaults, EGONET_* environment variables, a key=value config file, and
command-line flags. List-valued keys are comma-separated.
"""
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, List, Optional

import structlog
from dotenv import dotenv_values
from pydantic_settings import BaseSettings

from models.request import (
    BaselineConfig,
    ExperimentConfig,
    ImputeConfig,
    PeerEffectsParameters,
)

logger = structlog.get_logger()


def parse_floats(text: str) -> List[float]:
    """'0.2, 0.4' -> [0.2, 0.4]; an empty string is an empty list."""
    return [float(part) for part in text.split(",") if part.strip()]


def parse_ints(text: str) -> List[int]:
    return [int(part) for part in text.split(",") if part.strip()]


def parse_names(text: str) -> List[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


class Settings(BaseSettings):
    """Run settings with environment variable and config-file support."""

    # Run
    seed: int = 0
    threads: int = 4
    log_level: str = "INFO"
    debug: bool = False

    # Imputation
    method: str = "x-ltwfe"
    kernel: str = "epanechnikov"
    h_grid: str = "auto"
    auto_grid_points: int = 8
    cv_pair_cap: int = 20_000
    undersmooth: float = 1.0
    symmetrize: bool = True
    include_diagonal: bool = True
    first_stage: str = "auto"
    feature_mode: str = "squared-difference"
    pi_bandwidth: Optional[float] = None

    # Baselines
    rank_grid: str = "1,2,3,4,5,6"
    k_grid: str = "10,20,30"
    holdout_fraction: float = 0.1
    holdout_cap: int = 500

    # Estimation
    model: str = "centrality-degree"
    weight: str = "identity"
    undersmooth_sweep: str = ""

    # Experiments and simulation
    experiment: str = "imputation"
    n_nodes: int = 200
    n_networks: int = 40
    beta: str = "-0.5,-0.5"
    phi_list: str = "0.2,0.3,0.4,0.5"
    methods: str = "x,lr,lpca,x-lpca,ltwfe,x-ltwfe,x-ltwfe-sp"
    replications: int = 200
    replication_offset: int = 0
    include_complete_data: bool = True
    noiseless: bool = False
    centrality_alpha: str = "0,0.5"
    centrality_effect_sd: float = 0.5
    centrality_noise_sd: float = 0.5
    peer_alpha_c: float = 0.0
    peer_alpha_ybar: float = 0.5
    peer_alpha_w: str = "1,1"
    peer_alpha_wbar: str = "1,1"
    peer_effect_sd: float = 0.2
    peer_noise_sd: float = 1.0

    class Config:
        env_prefix = "EGONET_"
        case_sensitive = False
        extra = "forbid"

    def impute_config(self) -> ImputeConfig:
        """Imputation knobs; the split variant is selected by the method name."""
        h_grid: Any = "auto" if self.h_grid.strip() == "auto" else parse_floats(self.h_grid)
        return ImputeConfig(
            kernel=self.kernel,
            h_grid=h_grid,
            auto_grid_points=self.auto_grid_points,
            cv_pair_cap=self.cv_pair_cap,
            undersmooth_multiplier=self.undersmooth,
            split=self.method == "x-ltwfe-sp",
            symmetrize=self.symmetrize,
            include_diagonal=self.include_diagonal,
            first_stage=self.first_stage,
            feature_mode=self.feature_mode,
            pi_bandwidth=self.pi_bandwidth,
            seed=self.seed,
        )

    def baseline_config(self) -> BaselineConfig:
        return BaselineConfig(
            rank_grid=parse_ints(self.rank_grid),
            k_grid=parse_ints(self.k_grid),
            holdout_fraction=self.holdout_fraction,
            holdout_cap=self.holdout_cap,
            seed=self.seed,
        )

    def peer_parameters(self) -> PeerEffectsParameters:
        return PeerEffectsParameters(
            alpha_c=self.peer_alpha_c,
            alpha_ybar=self.peer_alpha_ybar,
            alpha_w=parse_floats(self.peer_alpha_w),
            alpha_wbar=parse_floats(self.peer_alpha_wbar),
        )

    def experiment_config(self) -> ExperimentConfig:
        baseline = self.baseline_config()
        return ExperimentConfig(
            experiment=self.experiment,
            n_nodes=self.n_nodes,
            n_networks=self.n_networks,
            beta=parse_floats(self.beta),
            phi_list=parse_floats(self.phi_list),
            methods=parse_names(self.methods),
            replications=self.replications,
            replication_offset=self.replication_offset,
            seed=self.seed,
            max_workers=self.threads,
            include_complete_data=self.include_complete_data,
            noiseless=self.noiseless,
            impute=self.impute_config(),
            rank_grid=baseline.rank_grid,
            k_grid=baseline.k_grid,
            centrality_alpha=parse_floats(self.centrality_alpha),
            centrality_effect_sd=self.centrality_effect_sd,
            centrality_noise_sd=self.centrality_noise_sd,
            peer=self.peer_parameters(),
            peer_effect_sd=self.peer_effect_sd,
            peer_noise_sd=self.peer_noise_sd,
        )

    def undersmooth_multipliers(self) -> List[float]:
        """The sweep, or the single configured multiplier when no sweep is set."""
        sweep = parse_floats(self.undersmooth_sweep)
        return sweep or [self.undersmooth]

    def validate_configuration(self) -> bool:
        """
        Validate configuration settings.

        Returns:
            True if configuration is valid

        Raises:
            ValueError: If a setting is out of range or does not parse
        """
        if self.threads < 1:
            raise ValueError("threads must be at least 1")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")
        if any(not 0 < m <= 1 for m in self.undersmooth_multipliers()):
            raise ValueError("undersmoothing multipliers must lie in (0, 1]")

        self.impute_config()
        self.baseline_config()

        logger.info(
            "configuration_validated",
            method=self.method,
            seed=self.seed,
            threads=self.threads,
        )

        return True


def load_settings(config_path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> Settings:
    """
    Build settings from a key=value file and explicit overrides.

    Args:
        config_path: Optional flat key=value file; keys are the Settings field names
        overrides: Values that win over the file, typically command-line flags

    Returns:
        Validated settings

    Raises:
        OSError: If the config file does not exist
        ValueError: On unknown keys or invalid values
    """
    values: Dict[str, Any] = {}
    if config_path is not None:
        if not Path(config_path).is_file():
            raise FileNotFoundError(f"config file not found: {config_path}")
        values = {k.lower(): v for k, v in dotenv_values(config_path).items() if v is not None}
        logger.debug("config_file_loaded", path=config_path, keys=sorted(values))
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})

    settings = Settings(**values)
    settings.validate_configuration()
    return settings


@lru_cache()
def get_settings() -> Settings:
    """
    Get cached settings from the environment alone.

    Returns:
        Settings instance
    """
    settings = Settings()
    settings.validate_configuration()
    return settings
