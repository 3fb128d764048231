"""Deterministic, splittable random streams.

Every stochastic quantity in the package is drawn from a counter-based
Philox generator keyed by ``(seed, *path)``.  Streams with distinct paths
are statistically independent, and the same path always reproduces the
same stream, which makes parallel and serial runs byte-identical.
"""
from __future__ import annotations

import os

import numpy as np

# Stream namespaces.  Never reuse a tag for a different purpose.
GEOMETRY = 0
PARAMS = 1
SHUFFLE = 2
DROPOUT = 3
SWEEP = 4
BOOTSTRAP = 5


def stream(seed: int, *path: int) -> np.random.Generator:
    """Independent generator for a (seed, path) pair."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))


def fingerprint(seed: int, *path: int) -> int:
    """Stable 64-bit identifier of a stream, storable next to its outputs."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(p) for p in path))
    return int(ss.generate_state(1, np.uint64)[0])


def worker_count() -> int:
    """Worker cap: BEAMNET_THREADS if set, else hardware concurrency."""
    env = os.environ.get("BEAMNET_THREADS", "").strip()
    if env:
        try:
            n = int(env)
        except ValueError:
            n = 1
        return max(1, n)
    return max(1, os.cpu_count() or 1)
