"""Network formation models and egocentric sampling."""

from .formation import (
    generate_block_population,
    generate_population,
    generate_world,
    probability_matrix,
    sample_network,
)
from .sampling import egocentric_sample, observe, split_sample

__all__ = [
    "generate_population",
    "generate_block_population",
    "probability_matrix",
    "sample_network",
    "generate_world",
    "egocentric_sample",
    "observe",
    "split_sample",
]
