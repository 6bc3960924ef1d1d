"""Shared helpers for the uwblink test suite."""

import numpy as np
import pytest

from uwblink import rng
from uwblink.txrx import CompositeChannel


def random_composite(generator, max_side=4, spread=0.3):
    """A random symbol-spaced composite channel with a dominant cursor."""
    n1 = int(generator.integers(0, max_side))
    n2 = int(generator.integers(0, max_side))
    alpha = generator.normal(0.0, spread, size=n1 + n2 + 1)
    alpha[n1] = 1.0
    alpha /= np.linalg.norm(alpha)
    return CompositeChannel(alpha, n1, n2)


@pytest.fixture
def gen():
    return rng.stream(12345)
