import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate
from scipy.stats import norm

from bridge_info.bridge_core import (
    Path,
    PathGrid,
    bridge_covariance,
    bridge_density,
    simulate_bridge,
    simulate_bridges,
    stopped_bm_from_bridge,
    stopped_bm_values,
    transition_kernel,
)

from conftest import ks_critical, ks_distance


def test_density_examples():
    assert bridge_density(1.0, 0.5, 0.0) == pytest.approx(1 / math.sqrt(2 * math.pi * 0.25), rel=1e-15)
    assert bridge_density(1.0, 0.5, 0.0) == pytest.approx(0.7978846, abs=1e-7)
    assert bridge_density(1.0, 1.2, 3.0) == 0.0
    assert bridge_density(1.0, 1.0, 0.1) == 0.0


def test_density_rejects_time_zero():
    with pytest.raises(ValueError):
        bridge_density(1.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        bridge_density(0.0, 0.5, 0.0)


def test_density_matches_histogram():
    n, h, x = 1_000_000, 0.02, 0.5
    grid = PathGrid.from_points([1.0])
    values = simulate_bridges(np.full(n, 2.0), grid, np.random.default_rng(3))[:, 1]
    p = np.mean(np.abs(values - x) < h / 2)
    est, se = p / h, math.sqrt(p * (1 - p) / n) / h
    exact = (norm.cdf(x + h / 2, scale=math.sqrt(0.5)) - norm.cdf(x - h / 2, scale=math.sqrt(0.5))) / h
    assert abs(est - exact) <= 3 * se
    assert bridge_density(2.0, 1.0, x) == pytest.approx(exact, rel=1e-4)


@pytest.mark.parametrize("r,t", [(1.0, 0.5), (2.0, 0.1), (3.0, 2.9), (0.01, 0.005)])
def test_density_integrates_to_one(r, t):
    total, _ = integrate.quad(lambda x: bridge_density(r, t, x), -np.inf, np.inf, epsabs=1e-12)
    assert total == pytest.approx(1.0, abs=1e-8)


def test_covariance_examples():
    assert bridge_covariance(1.0, 0.5, 0.5) == 0.25
    assert bridge_covariance(1.0, 0.3, 0.6) == pytest.approx(0.12, abs=1e-15)
    assert bridge_covariance(1.0, 0.5, 1.5) == 0.0


@given(st.floats(0.01, 5), st.floats(0, 6), st.floats(0, 6))
def test_covariance_symmetric(r, s, t):
    assert bridge_covariance(r, s, t) == bridge_covariance(r, t, s)
    assert bridge_covariance(r, s, t) >= -1e-15


def test_transition_kernel_examples():
    k = transition_kernel(1.0, 0.25, 0.5, 1.0)
    assert k.mean == pytest.approx(2 / 3)
    assert k.variance == pytest.approx(1 / 6)
    absorbed = transition_kernel(1.0, 0.25, 1.7, 5.0)
    assert absorbed.is_point_mass and absorbed.mean == 0.0
    k0 = transition_kernel(2.0, 0.0, 1.0, 0.0)
    assert (k0.mean, k0.variance) == (0.0, 0.5)


def test_transition_kernel_errors():
    with pytest.raises(ValueError):
        transition_kernel(1.0, 1.0, 1.5, 0.0)
    with pytest.raises(ValueError):
        transition_kernel(1.0, 0.5, 0.5, 0.0)


@given(st.floats(0.1, 5), st.lists(st.floats(0.01, 0.99), min_size=3, max_size=3, unique=True),
       st.floats(-3, 3))
def test_chapman_kolmogorov(r, fracs, x):
    t, u, v = sorted(f * r for f in fracs)
    first = transition_kernel(r, t, u, x)
    second_slope = (r - v) / (r - u)
    second = transition_kernel(r, u, v, 0.0)
    direct = transition_kernel(r, t, v, x)
    # the second kernel is linear in its starting point
    assert second_slope * first.mean == pytest.approx(direct.mean, rel=1e-12, abs=1e-12)
    composed_var = second.variance + second_slope ** 2 * first.variance
    assert composed_var == pytest.approx(direct.variance, rel=1e-12, abs=1e-14)


def test_simulate_bridge_examples():
    grid = PathGrid.uniform(2.0, 0.01)
    path = simulate_bridge(1.0, grid, np.random.default_rng(0))
    assert path.values[0] == 0.0
    assert np.all(path.values[grid.times >= 1.0] == 0.0)
    assert np.any(path.values[grid.times < 1.0] != 0.0)


def test_simulated_marginal_ks():
    n, r, t = 100_000, 1.0, 0.3
    grid = PathGrid.from_points([t, 0.7])
    xs = simulate_bridges(np.full(n, r), grid, np.random.default_rng(5))[:, 1]
    sd = math.sqrt(t * (r - t) / r)
    assert ks_distance(xs, lambda v: norm.cdf(v, scale=sd)) < ks_critical(n)


def _cov_se(a, b):
    n = a.size
    a, b = a - a.mean(), b - b.mean()
    return float(np.mean(a * b)), float(np.std(a * b, ddof=1) / math.sqrt(n))


def test_covariance_matrix_five_points():
    n = 200_000
    pts = [0.1, 0.3, 0.5, 0.7, 0.9]
    grid = PathGrid.from_points(pts)
    values = simulate_bridges(np.ones(n), grid, np.random.default_rng(7))[:, 1:]
    for i, s in enumerate(pts):
        for j in range(i, len(pts)):
            est, se = _cov_se(values[:, i], values[:, j])
            assert abs(est - bridge_covariance(1.0, s, pts[j])) <= 3 * se, (s, pts[j])


def test_sample_covariance_example():
    n = 200_000
    grid = PathGrid.from_points([0.3, 0.6])
    values = simulate_bridges(np.ones(n), grid, np.random.default_rng(8))
    est, se = _cov_se(values[:, 1], values[:, 2])
    assert abs(est - 0.12) <= 3 * se


def test_stopped_bm_zero_path():
    grid = PathGrid.uniform(2.0, 0.1)
    out = stopped_bm_from_bridge(Path(grid, np.zeros(len(grid)), 1.0))
    assert np.all(out.values == 0.0)


def test_stopped_bm_constant_after_pin():
    grid = PathGrid.uniform(2.0, 0.01)
    path = simulate_bridge(1.0, grid, np.random.default_rng(1))
    b = stopped_bm_from_bridge(path).values
    after = b[grid.times >= 1.0]
    assert np.all(after == after[0])


def test_stopped_bm_moments():
    n, chunk = 100_000, 10_000
    grid = PathGrid.uniform(0.5, 0.001)
    rng = np.random.default_rng(9)
    ends = []
    for _ in range(n // chunk):
        pins = np.ones(chunk)
        values = simulate_bridges(pins, grid, rng)
        ends.append(stopped_bm_values(values, grid.times, pins)[:, -1])
    b = np.concatenate(ends)
    se_mean = b.std(ddof=1) / math.sqrt(n)
    assert abs(b.mean()) <= 3 * se_mean
    var = b.var(ddof=1)
    se_var = math.sqrt(np.var((b - b.mean()) ** 2, ddof=1) / n)
    assert abs(var - 0.5) <= 3 * se_var


def test_grid_validation():
    with pytest.raises(ValueError):
        PathGrid.uniform(1.0, 0.0)
    with pytest.raises(ValueError):
        PathGrid(np.array([0.0, 0.5, 0.5]))
    with pytest.raises(ValueError):
        PathGrid(np.array([0.1, 0.5]))
    grid = PathGrid.uniform(1.0, 0.3, extra=[0.5])
    np.testing.assert_allclose(grid.times, [0, 0.3, 0.5, 0.6, 0.9, 1.0])
    assert grid.index(0.5) == 2
    with pytest.raises(ValueError):
        grid.index(0.55)
