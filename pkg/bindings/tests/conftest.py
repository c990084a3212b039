import math

import numpy as np
import pytest


def random_box_rows(rng, n, span=300.0, size_lo=5.0, size_hi=60.0):
    """(n, 5) rows of valid (cx, cy, w, h, theta)."""
    rows = np.empty((n, 5))
    rows[:, 0] = rng.uniform(0, span, n)
    rows[:, 1] = rng.uniform(0, span, n)
    rows[:, 2] = rng.uniform(size_lo, size_hi, n)
    rows[:, 3] = rng.uniform(size_lo, size_hi, n)
    rows[:, 4] = rng.uniform(-math.pi / 2 + 1e-9, math.pi / 2, n)
    return rows


def random_hbox_rows(rng, n, span=300.0, size_lo=5.0, size_hi=60.0):
    return random_box_rows(rng, n, span, size_lo, size_hi)[:, :4].copy()


@pytest.fixture
def rng():
    return np.random.default_rng(90210)
