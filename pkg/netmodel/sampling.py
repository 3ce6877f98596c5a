"""
Egocentric sampling and sample splitting.
"""
from typing import Tuple

import numpy as np
import structlog

from models.network import Network, PartialNetwork
from utils.random import stream

logger = structlog.get_logger()


def egocentric_sample(net: Network, n_sampled: int, seed: int) -> PartialNetwork:
    """
    Survey a uniform random subset of nodes and record all their links.

    Links between two unsurveyed nodes are not observed; they are zeroed in the
    returned network so no imputer can read them.

    Args:
        net: Full network
        n_sampled: Size of the surveyed set, 2 <= n_sampled < N
        seed: Seed of the draw

    Returns:
        Partially observed network

    Raises:
        ValueError: If n_sampled is out of range
    """
    if not 2 <= n_sampled < net.n_nodes:
        raise ValueError(f"n_sampled must lie in [2, {net.n_nodes - 1}], got {n_sampled}")

    rng = stream(seed, "egocentric")
    sampled = rng.choice(net.n_nodes, size=n_sampled, replace=False)
    return observe(net, sampled)


def observe(net: Network, sampled: np.ndarray) -> PartialNetwork:
    """Partial network induced by a given sampled set."""
    mask = np.zeros(net.n_nodes, dtype=bool)
    mask[np.asarray(sampled, dtype=np.int64)] = True
    observed = mask[:, None] | mask[None, :]
    masked = Network(adj=np.where(observed, net.adj, 0.0))
    pn = PartialNetwork(base=masked, sampled=sampled)
    logger.debug(
        "egocentric_sample_drawn",
        n_nodes=net.n_nodes,
        n_sampled=pn.n_sampled,
        missing_pairs=pn.missing_pair_count,
    )
    return pn


def split_sample(pn: PartialNetwork, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Random near-equal split of the sampled set into (S1, S2).

    S1 receives the extra node when |S| is odd. Both halves come back sorted.
    """
    if pn.n_sampled < 4:
        raise ValueError(f"sample splitting needs at least 4 sampled nodes, got {pn.n_sampled}")

    rng = stream(seed, "split")
    shuffled = rng.permutation(pn.sampled)
    n_first = (pn.n_sampled + 1) // 2
    return np.sort(shuffled[:n_first]), np.sort(shuffled[n_first:])
