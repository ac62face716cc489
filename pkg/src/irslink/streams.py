"""Seeded random streams.

Every stochastic routine takes an explicit ``numpy.random.Generator``. Streams
for sub-tasks are derived from a root seed plus a tuple of integer keys, so the
mapping from (seed, task) to random numbers never depends on execution order.
"""

import numpy as np

# Stream namespaces keep derived seeds for different experiments disjoint.
CHANNEL_STATS = 1
OUTAGE_SWEEP = 2
DDPG = 3
REALIZATIONS = 4


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Return a PCG64 generator keyed by ``seed`` and optional sub-keys."""
    if seed < 0:
        raise ValueError("seed must be non-negative")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, *keys])))


def child_seed(rng: np.random.Generator) -> int:
    """Draw a 63-bit integer from ``rng`` to key a family of child streams."""
    return int(rng.integers(0, 2**63 - 1))
