"""Per-replica random streams.

Every replica ``r`` of a run with base seed ``s`` draws from its own PCG64
generator seeded by ``numpy.random.SeedSequence(entropy=s, spawn_key=(r,))``.
SeedSequence hashes the pair into the generator state, so the stream of a
replica depends only on ``(s, r)``: replicas can be computed in any order, in
any number of threads, and give the same numbers.
"""

import numpy as np

from .errors import ParameterError

SEED_MAX = 2**64 - 1


def check_seed(seed):
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise ParameterError(f"seed must be an integer, got {seed!r}")
    if not 0 <= int(seed) <= SEED_MAX:
        raise ParameterError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return int(seed)


def replica_rng(seed: int, replica: int = 0) -> np.random.Generator:
    """Generator for replica ``replica`` of base seed ``seed``."""
    seq = np.random.SeedSequence(entropy=check_seed(seed), spawn_key=(int(replica),))
    return np.random.Generator(np.random.PCG64(seq))
