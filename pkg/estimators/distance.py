"""
Pseudo-distance between nodes from the observed part of the network.

For a target t and reference r the distance is the largest absolute contrast
over third nodes k:

    d(t, r) = max_{k != t, r} | (1/n) sum_{l in anchors} A_kl (A_tl - A_rl) |

All inner sums come from one product B = A[:, anchors] A[:, anchors]', so
d(t, r) = max_k |B[k, t] - B[k, r]| / n.
"""
from typing import Sequence

import numpy as np
import structlog

from models.network import PartialNetwork
from models.response import PseudoDistanceTable

logger = structlog.get_logger()

TARGET_BLOCK = 64


def _as_nodes(nodes: Sequence[int], n_nodes: int, name: str) -> np.ndarray:
    index = np.asarray(nodes, dtype=np.int64).reshape(-1)
    if index.size and (index.min() < 0 or index.max() >= n_nodes):
        raise ValueError(f"{name} indices must lie in [0, {n_nodes})")
    return index


def _contrast_max(
    adj: np.ndarray, anchors: np.ndarray, targets: np.ndarray, references: np.ndarray
) -> np.ndarray:
    cols = adj[:, anchors]
    inner = cols @ cols.T  # inner[k, i] = sum_l A_kl A_il

    d = np.zeros((targets.size, references.size))
    ref_inner = inner[:, references]
    ref_pos = np.arange(references.size)
    for start in range(0, targets.size, TARGET_BLOCK):
        block = targets[start : start + TARGET_BLOCK]
        diff = np.abs(inner[:, block][:, :, None] - ref_inner[:, None, :])
        # excluded k: all candidates are >= 0 so zeroing never raises the max
        diff[block, np.arange(block.size), :] = 0.0
        diff[references[None, :], np.arange(block.size)[:, None], ref_pos[None, :]] = 0.0
        d[start : start + block.size] = diff.max(axis=0)
    d /= anchors.size
    same = targets[:, None] == references[None, :]
    d[same] = 0.0
    return d


def pseudo_distance(
    pn: PartialNetwork, targets: Sequence[int], references: Sequence[int]
) -> PseudoDistanceTable:
    """
    Distances from every target to every reference using all sampled nodes as anchors.

    Args:
        pn: Partially observed network
        targets: Row node ids
        references: Column node ids

    Returns:
        Distance table normalized by |S|
    """
    target_idx = _as_nodes(targets, pn.n_nodes, "target")
    reference_idx = _as_nodes(references, pn.n_nodes, "reference")
    d = _contrast_max(pn.observed_adj, pn.sampled, target_idx, reference_idx)

    logger.debug(
        "pseudo_distance_computed",
        n_targets=target_idx.size,
        n_references=reference_idx.size,
        anchors=pn.n_sampled,
    )
    return PseudoDistanceTable(
        targets=target_idx, references=reference_idx, d=d, anchor_count=pn.n_sampled
    )


def pseudo_distance_split(
    pn: PartialNetwork,
    s1: Sequence[int],
    s2: Sequence[int],
    targets: Sequence[int],
) -> PseudoDistanceTable:
    """
    Distances computed from the links of S1 only, against references S2.

    Raises:
        ValueError: If S1 is empty, S1 and S2 overlap, or either is not sampled
    """
    anchors = _as_nodes(s1, pn.n_nodes, "s1")
    reference_idx = _as_nodes(s2, pn.n_nodes, "s2")
    target_idx = _as_nodes(targets, pn.n_nodes, "target")

    if anchors.size == 0:
        raise ValueError("s1 must be nonempty")
    if np.intersect1d(anchors, reference_idx).size:
        raise ValueError("s1 and s2 must be disjoint")
    if not (np.all(pn.is_sampled[anchors]) and np.all(pn.is_sampled[reference_idx])):
        raise ValueError("s1 and s2 must be subsets of the sampled set")

    d = _contrast_max(pn.observed_adj, anchors, target_idx, reference_idx)
    logger.debug(
        "pseudo_distance_split_computed",
        n_targets=target_idx.size,
        n_references=reference_idx.size,
        anchors=anchors.size,
    )
    return PseudoDistanceTable(
        targets=target_idx, references=reference_idx, d=d, anchor_count=anchors.size
    )
