import math

import numpy as np
import pytest
from hypothesis import settings
from scipy.stats import kstwobign

from bridge_info.default_law import (
    DiscreteAtoms,
    Exponential,
    PiecewiseEmpirical,
    UniformInterval,
    Weibull,
)

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


LAWS = {
    "exponential": Exponential(1.0),
    "uniform": UniformInterval(0.5, 3.0),
    "weibull": Weibull(1.7, 1.2),
    "atoms": DiscreteAtoms((1.0, 2.0), (0.5, 0.5)),
    "empirical": PiecewiseEmpirical((0.2, 1.0, 1.0, 2.5), (0.1, 0.4, 0.7, 1.0)),
}


@pytest.fixture(params=sorted(LAWS))
def any_law(request):
    return LAWS[request.param]


@pytest.fixture
def two_atoms():
    return LAWS["atoms"]


@pytest.fixture
def expo():
    return LAWS["exponential"]


def ks_distance(samples, cdf, cdf_left=None):
    """Two-sided KS distance, exact for cdfs with jumps when ``cdf_left`` is given."""
    xs = np.sort(np.asarray(samples, dtype=float))
    n = xs.size
    hi = cdf(xs)
    lo = cdf_left(xs) if cdf_left is not None else hi
    i = np.arange(1, n + 1)
    return max(np.max(i / n - hi), np.max(lo - (i - 1) / n))


def ks_critical(n, level=0.01):
    return kstwobign.ppf(1 - level) / math.sqrt(n)


class FixedUniform:
    """Stand-in random stream whose uniforms are all ``value``."""

    def __init__(self, value):
        self.value = value

    def random(self, size=None):
        return self.value if size is None else np.full(size, self.value)
