"""
Base class for all imputation methods.
"""
import time
from abc import ABC, abstractmethod
from typing import Any, ClassVar, Dict, Optional

import numpy as np
import structlog

from models.network import CovariateSet, ImputedNetwork, PartialNetwork
from models.request import BaselineConfig, ImputeConfig

logger = structlog.get_logger()


class BaseImputer(ABC):
    """Abstract base class for imputers of the unsampled-by-unsampled block."""

    method: ClassVar[str] = ""
    uses_covariates: ClassVar[bool] = False

    def __init__(
        self,
        config: Optional[ImputeConfig] = None,
        baseline: Optional[BaselineConfig] = None,
    ):
        """
        Initialize the imputer.

        Args:
            config: Two-way fixed-effects and first-stage knobs
            baseline: Grids for the comparison methods
        """
        self.config = config or ImputeConfig()
        self.baseline = baseline or BaselineConfig()

        logger.debug(
            "imputer_initialized",
            method=self.method,
            imputer_type=self.__class__.__name__,
        )

    @abstractmethod
    def impute(self, pn: PartialNetwork, cov: CovariateSet) -> ImputedNetwork:
        """
        Fill the missing block of a partially observed network.

        Args:
            pn: Partially observed network
            cov: Node covariates (ignored by methods that do not use them)

        Returns:
            Imputed network
        """

    def execute(self, pn: PartialNetwork, cov: CovariateSet) -> ImputedNetwork:
        """
        Run `impute` with logging and error reporting.
        """
        start = time.perf_counter()
        logger.info(
            "imputation_start",
            method=self.method,
            n_nodes=pn.n_nodes,
            n_sampled=pn.n_sampled,
            d_x=cov.d_x,
        )
        try:
            result = self.impute(pn, cov)
        except Exception as e:
            logger.error(
                "imputation_error",
                method=self.method,
                error=str(e),
                error_type=type(e).__name__,
            )
            raise

        logger.info(
            "imputation_complete",
            method=self.method,
            bandwidth=result.bandwidth,
            fallback_pairs=result.fallback_pairs,
            imputed_pairs=result.imputed_count,
            execution_time=round(time.perf_counter() - start, 4),
        )
        return result

    def get_imputer_info(self) -> Dict[str, Any]:
        """
        Get information about this imputer.

        Returns:
            Imputer metadata
        """
        return {
            "method": self.method,
            "imputer_type": self.__class__.__name__,
            "uses_covariates": self.uses_covariates,
            "config": self.config.model_dump(),
        }


def fill_missing_block(
    pn: PartialNetwork, block: np.ndarray, method: str, fallback_pairs: int = 0
) -> ImputedNetwork:
    """
    Merge an unsampled-by-unsampled block into the observed adjacency.

    The block is truncated to [0, 1] and its diagonal zeroed; it must already be symmetric.
    """
    targets = pn.unsampled
    a_hat = np.array(pn.observed_adj, dtype=float)
    provenance = np.zeros((pn.n_nodes, pn.n_nodes), dtype=bool)
    block = np.clip(block, 0.0, 1.0)
    np.fill_diagonal(block, 0.0)
    a_hat[np.ix_(targets, targets)] = block
    provenance[np.ix_(targets, targets)] = True
    np.fill_diagonal(provenance, False)
    return ImputedNetwork(
        A_hat=a_hat, provenance=provenance, method=method, fallback_pairs=fallback_pairs
    )
