"""Deterministic random-number streams.

All randomness in the simulator flows through Philox counter-based
generators keyed by (master_seed, *path).  Substreams derived from the
same master seed are independent and reproduce bit-exactly across runs,
platforms and worker counts, so ensemble results never depend on
scheduling order.
"""

from __future__ import annotations

import numpy as np


def stream(master_seed: int, *path: int) -> np.random.Generator:
    """Return an independent generator for the given (seed, path) key."""
    ss = np.random.SeedSequence(master_seed, spawn_key=tuple(path))
    return np.random.Generator(np.random.Philox(ss))


def child_seed(master_seed: int, *path: int) -> int:
    """Fold (seed, path) into a single 64-bit seed for APIs taking one int."""
    ss = np.random.SeedSequence(master_seed, spawn_key=tuple(path))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
