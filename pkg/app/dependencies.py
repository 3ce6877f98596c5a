"""
Factories that turn settings into configured imputers.
"""
from typing import Optional

import structlog

from imputers import BaseImputer, build_imputer

from .config import Settings

logger = structlog.get_logger()


def get_imputer(
    settings: Settings,
    method: Optional[str] = None,
    undersmooth: Optional[float] = None,
) -> BaseImputer:
    """
    Get an imputer configured from settings.

    Args:
        settings: Validated settings
        method: Overrides settings.method
        undersmooth: Overrides the undersmoothing multiplier

    Returns:
        Configured imputer
    """
    method = method or settings.method
    config = settings.impute_config().model_copy(
        update={
            "split": method == "x-ltwfe-sp",
            "undersmooth_multiplier": undersmooth or settings.undersmooth,
        }
    )
    imputer = build_imputer(method, config, settings.baseline_config())

    logger.debug(
        "imputer_created",
        method=method,
        undersmooth=config.undersmooth_multiplier,
        seed=config.seed,
    )

    return imputer
