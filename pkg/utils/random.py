"""
Seeded, counter-based random streams.

Every consumer asks for a stream by (seed, key, key, ...). Keys may be ints or
strings; strings are hashed with crc32 so that a purpose name maps to a fixed
spawn key. Streams for different keys are statistically independent, which lets
replications run in any order or on any number of workers.
"""
import zlib
from typing import Union

import numpy as np

StreamKey = Union[int, str]


def _encode(key: StreamKey) -> int:
    if isinstance(key, str):
        return zlib.crc32(key.encode("utf-8"))
    if key < 0:
        raise ValueError(f"stream keys must be nonnegative, got {key}")
    return int(key)


def stream(seed: int, *keys: StreamKey) -> np.random.Generator:
    """
    Derive an independent Philox generator for a (seed, keys...) path.

    Args:
        seed: Root seed of the run
        *keys: Replication index, purpose name, ...

    Returns:
        numpy Generator backed by the counter-based Philox bit generator
    """
    if seed < 0:
        raise ValueError(f"seed must be nonnegative, got {seed}")
    seq = np.random.SeedSequence(entropy=seed, spawn_key=tuple(_encode(k) for k in keys))
    return np.random.Generator(np.random.Philox(seq))


def derive_seed(seed: int, *keys: StreamKey) -> int:
    """Integer seed for APIs that take one, drawn from the (seed, keys...) stream."""
    return int(stream(seed, *keys).integers(0, 2**63 - 1))
