import numpy as np
import pytest

from rboxkit.geom import HorizontalBox, RotatedBox


def random_rbox(rng, span=1000.0, size_lo=1.0, size_hi=100.0):
    return RotatedBox(
        float(rng.uniform(0.0, span)),
        float(rng.uniform(0.0, span)),
        float(rng.uniform(size_lo, size_hi)),
        float(rng.uniform(size_lo, size_hi)),
        float(rng.uniform(-np.pi / 2 + 1e-9, np.pi / 2)),
    )


def random_hbox(rng, span=1000.0, size_lo=1.0, size_hi=100.0):
    return HorizontalBox(
        float(rng.uniform(0.0, span)),
        float(rng.uniform(0.0, span)),
        float(rng.uniform(size_lo, size_hi)),
        float(rng.uniform(size_lo, size_hi)),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
