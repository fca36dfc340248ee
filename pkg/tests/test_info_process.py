import math

import numpy as np
import pytest
from scipy.special import ndtr

from bridge_info.bayes_filter import DriftProjector
from bridge_info.bridge_core import Path, PathGrid, bridge_covariance, stopped_bm_values
from bridge_info.default_law import DiscreteAtoms, Exponential, UniformInterval, integrate_dF, stieltjes_rule
from bridge_info.info_process import (
    DefaultCheck,
    InfoPath,
    decompose,
    decompose_values,
    default_indicator_diagnostic,
    drift_Z,
    quadratic_variation,
    simulate_ensemble,
    simulate_info,
)

from conftest import ks_critical, ks_distance

DIRAC = DiscreteAtoms((1.0,), (1.0,), allow_dirac=True)


def test_drift_examples():
    assert drift_Z(0.3, 1.0, 0.5) == pytest.approx(0.6)
    assert drift_Z(0.7, 1.0, 1.5) == 0.0
    assert drift_Z(0.0, 2.0, 0.5) == 0.0
    np.testing.assert_allclose(drift_Z(np.array([0.3, 0.3]), np.array([1.0, 0.4]), 0.5), [0.6, 0.0])


def test_starts_at_zero(any_law):
    ip = simulate_info(any_law, PathGrid.uniform(1.0, 0.05), np.random.default_rng(0))
    assert ip.values[0] == 0.0
    assert ip.tau > 0
    assert np.all(ip.values[ip.grid.times >= ip.tau] == 0.0)


def test_dirac_law_gives_standard_bridges():
    n = 50_000
    grid = PathGrid.from_points([0.25, 0.5, 1.0, 1.5])
    ens = simulate_ensemble(DIRAC, grid, n, np.random.default_rng(2))
    assert np.all(ens.taus == 1.0)
    assert np.all(ens.values[:, 3:] == 0.0)
    a, b = ens.values[:, 1], ens.values[:, 2]
    se = np.std(a * b, ddof=1) / math.sqrt(n)
    assert abs(np.mean(a * b) - bridge_covariance(1.0, 0.25, 0.5)) <= 3 * se


def test_zero_frequency_is_default_probability():
    n, t = 100_000, 0.5
    law = Exponential(1.0)
    grid = PathGrid.from_points([t])
    ens = simulate_ensemble(law, grid, n, np.random.default_rng(4))
    p = np.mean(ens.values[:, 1] == 0.0)
    se = math.sqrt(law.cdf(t) * law.survival(t) / n)
    assert abs(p - law.cdf(t)) <= 3 * se


def test_taus_drawn_before_bridge_noise():
    law = Exponential(1.0)
    a = simulate_ensemble(law, PathGrid.uniform(1.0, 0.1), 100, np.random.default_rng(6))
    b = simulate_ensemble(law, PathGrid.uniform(2.0, 0.01), 100, np.random.default_rng(6))
    np.testing.assert_array_equal(a.taus, b.taus)


def test_mixture_marginal_ks():
    n, t = 100_000, 0.5
    law = Exponential(1.0)
    ens = simulate_ensemble(law, PathGrid.from_points([t]), n, np.random.default_rng(12))
    rule = stieltjes_rule(law, (t, math.inf))
    sd = np.sqrt(t * rule.gaps / rule.nodes)
    assert rule.weights.sum() == pytest.approx(law.survival(t), abs=1e-12)

    def mixture(x):
        out = np.empty_like(x)
        for lo in range(0, x.size, 5000):
            xs = x[lo:lo + 5000]
            out[lo:lo + 5000] = ndtr(xs[:, None] / sd[None, :]) @ rule.weights
        return out

    def cdf(x):
        return law.cdf(t) * (x >= 0) + mixture(x)

    def cdf_left(x):
        return law.cdf(t) * (x > 0) + mixture(x)

    assert ks_distance(ens.values[:, 1], cdf, cdf_left) < ks_critical(n)


def test_decompose_invariants():
    law = Exponential(1.0)
    grid = PathGrid.uniform(2.0, 0.01)
    projector = DriftProjector(law, grid.times)
    ip = simulate_info(law, grid, np.random.default_rng(3))
    dec = decompose(ip, projector)
    np.testing.assert_array_equal(dec.innovation, ip.values + dec.drift_integral)
    after = dec.innovation[grid.times > ip.tau + 0.01]
    if after.size:
        np.testing.assert_allclose(after, after[0], atol=1e-12)


def test_immediate_default_has_zero_innovation():
    law = UniformInterval(1e-4, 2e-4)
    grid = PathGrid.uniform(1.0, 0.01)
    ip = simulate_info(law, grid, np.random.default_rng(0))
    dec = decompose(ip, DriftProjector(law, grid.times))
    assert np.all(dec.innovation == 0.0)


def test_decompose_rejects_mismatch():
    grid = PathGrid.uniform(1.0, 0.1)
    ip = simulate_info(Exponential(1.0), grid, np.random.default_rng(0))
    with pytest.raises(ValueError):
        decompose(ip, DriftProjector(Exponential(2.0), grid.times))
    with pytest.raises(ValueError):
        decompose(ip, DriftProjector(Exponential(1.0), PathGrid.uniform(1.0, 0.05).times))


@pytest.mark.slow
def test_innovation_martingale_and_variance():
    law = Exponential(1.0)
    n, chunk, t = 100_000, 10_000, 0.75
    grid = PathGrid.uniform(t, 0.002)
    projector = DriftProjector(law, grid.times)
    rng = np.random.default_rng(21)
    bs = []
    for _ in range(n // chunk):
        ens = simulate_ensemble(law, grid, chunk, rng)
        bs.append(decompose_values(ens.values, projector)[1][:, -1])
    b = np.concatenate(bs)
    assert abs(b.mean()) <= 3 * b.std(ddof=1) / math.sqrt(n)
    target = integrate_dF(law, lambda r: np.minimum(r, t))
    assert target == pytest.approx(1 - math.exp(-t), rel=1e-10)
    se_var = math.sqrt(np.var((b - b.mean()) ** 2, ddof=1) / n)
    assert abs(b.var(ddof=1) - target) <= 3 * se_var


def test_drift_integrability_bound():
    law = Exponential(1.0)
    n, t = 10_000, 1.0
    grid = PathGrid.uniform(t, 0.001)
    ens = simulate_ensemble(law, grid, n, np.random.default_rng(13))
    a = np.abs(ens.values)
    integral = (stopped_bm_values(a, grid.times, ens.taus) - a)[:, -1]
    assert np.all(integral >= 0)
    assert integral.mean() + 3 * integral.std(ddof=1) / math.sqrt(n) <= 2 * math.sqrt(t)


def test_quadratic_variation_examples():
    grid = PathGrid.uniform(1.0, 0.1)
    assert np.all(quadratic_variation(np.zeros(len(grid))) == 0.0)
    grid = PathGrid.uniform(2.0, 1e-3)
    ens = simulate_ensemble(DIRAC, grid, 2000, np.random.default_rng(1))
    qv = quadratic_variation(ens.values)
    assert qv[:, grid.index(0.5)].mean() == pytest.approx(0.5, abs=0.01)
    assert qv[:, grid.index(2.0)].mean() == pytest.approx(1.0, abs=0.01)
    single = quadratic_variation(ens.path(0))
    np.testing.assert_allclose(single, qv[0])


def _manual_path(values, times, tau):
    grid = PathGrid.from_points(times)
    return InfoPath(Path(grid, np.asarray(values, float), tau), tau, DIRAC)


def test_diagnostic_examples():
    ip = _manual_path([0.0, 0.4, 0.0, 0.0], [0.5, 1.0, 2.0], 1.0)
    assert default_indicator_diagnostic(ip, 2.0) is DefaultCheck.CONSISTENT
    assert default_indicator_diagnostic(ip, 0.5, zero_tol=1e-9) is DefaultCheck.CONSISTENT
    early = _manual_path([0.0, 1e-12, 0.3], [0.5, 1.0], 1.5)
    assert default_indicator_diagnostic(early, 0.5) is DefaultCheck.SPURIOUS_ZERO
    missed = _manual_path([0.0, 0.2], [0.5], 0.4)
    assert default_indicator_diagnostic(missed, 0.5) is DefaultCheck.MISSED_DEFAULT


def test_spurious_zero_rate_monotone_in_tolerance():
    law = Exponential(1.0)
    t = 0.5
    grid = PathGrid.uniform(1.0, 0.05)
    ens = simulate_ensemble(law, grid, 20_000, np.random.default_rng(17))
    rates = []
    for tol in (1e-1, 1e-2, 1e-3, 1e-6, 1e-9):
        checks = [default_indicator_diagnostic(ens.path(i), t, tol) for i in range(len(ens))]
        rates.append(np.mean([c is DefaultCheck.SPURIOUS_ZERO for c in checks]))
        assert not any(c is DefaultCheck.MISSED_DEFAULT for c in checks)
    assert all(a >= b for a, b in zip(rates, rates[1:]))
    assert rates[0] > 0 and rates[-1] < 1e-3
