"""Seed-path substream derivation."""

import numpy as np

from uwblink import rng


def test_stream_deterministic():
    a = rng.stream(1, 2, 3).normal(size=5)
    b = rng.stream(1, 2, 3).normal(size=5)
    assert np.array_equal(a, b)


def test_streams_differ_by_path():
    base = rng.stream(1).normal(size=5)
    assert not np.array_equal(base, rng.stream(2).normal(size=5))
    assert not np.array_equal(base, rng.stream(1, 0).normal(size=5))
    assert not np.array_equal(
        rng.stream(1, 2, 3).normal(size=5), rng.stream(1, 3, 2).normal(size=5)
    )


def test_child_seed_stable():
    s = rng.child_seed(7, 1, 4)
    assert s == rng.child_seed(7, 1, 4)
    assert s != rng.child_seed(7, 1, 5)
    assert 0 <= s < 2**64
