import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bridge_info.default_law import (
    DiscreteAtoms,
    Exponential,
    PiecewiseEmpirical,
    TimeInterval,
    UniformInterval,
    Weibull,
    integrate_dF,
    integrate_time,
    law_from_params,
    stieltjes_rule,
)
from bridge_info.errors import InvalidLaw, NonIntegrable

from conftest import LAWS, FixedUniform, ks_critical, ks_distance


def test_cdf_examples(two_atoms):
    assert Exponential(1.0).cdf(0.0) == 0.0
    assert Exponential(1.0).cdf(math.log(2)) == pytest.approx(0.5, abs=1e-15)
    assert two_atoms.cdf(1.5) == 0.5


def test_survival_examples(any_law):
    assert Exponential(2.0).survival(1.0) == pytest.approx(math.exp(-2), rel=1e-15)
    assert UniformInterval(1, 3).survival(2.0) == 0.5
    assert any_law.survival(0.0) == 1.0


def test_sample_inverse_cdf_convention():
    half = FixedUniform(0.5)
    assert Exponential(1.0).sample(half) == pytest.approx(math.log(2))
    assert Weibull(1.0, 1.0).sample(half) == pytest.approx(math.log(2))
    dirac = DiscreteAtoms((1.0,), (1.0,), allow_dirac=True)
    assert np.all(dirac.sample(np.random.default_rng(0), 100) == 1.0)


def test_sample_never_returns_zero():
    # a zero uniform would map to tau = 0 for laws starting at 0
    assert Exponential(1.0).sample(FixedUniform(0.0)) > 0


def test_dirac_rejected_by_default():
    with pytest.raises(InvalidLaw):
        DiscreteAtoms((1.0,), (1.0,))
    with pytest.raises(InvalidLaw):
        PiecewiseEmpirical((1.0, 1.0), (0.0, 1.0))


@pytest.mark.parametrize("bad", [
    dict(locations=(1.0, 2.0), weights=(0.5, 0.6)),
    dict(locations=(0.0, 2.0), weights=(0.5, 0.5)),
    dict(locations=(1.0, 1.0), weights=(0.5, 0.5)),
    dict(locations=(1.0, 2.0), weights=(1.0, 0.0)),
])
def test_invalid_atoms(bad):
    with pytest.raises(InvalidLaw):
        DiscreteAtoms(**bad)


def test_invalid_parameters():
    for make in (lambda: Exponential(0.0), lambda: UniformInterval(2, 1),
                 lambda: Weibull(-1, 1), lambda: PiecewiseEmpirical((1, 0.5), (0.2, 1.0))):
        with pytest.raises(InvalidLaw):
            make()


def test_integrate_examples(two_atoms):
    e = Exponential(1.0)
    assert integrate_dF(e, np.ones_like) == pytest.approx(1.0, abs=1e-12)
    assert integrate_dF(e, lambda r: r) == pytest.approx(1.0, abs=1e-10)
    assert integrate_dF(two_atoms, lambda r: r) == pytest.approx(1.5, abs=1e-15)


def test_total_mass(any_law):
    assert integrate_dF(any_law, np.ones_like) == pytest.approx(1.0, abs=1e-10)


def test_cdf_plus_survival(any_law):
    ts = np.linspace(0, 5, 1001)
    np.testing.assert_allclose(any_law.cdf(ts) + any_law.survival(ts), 1.0, atol=1e-15)


def test_cdf_left_and_atoms():
    law = LAWS["empirical"]
    locs, w = law.atoms()
    np.testing.assert_allclose(locs, [0.2, 1.0])
    np.testing.assert_allclose(w, [0.1, 0.3])
    assert law.cdf(1.0) - law.cdf_left(1.0) == pytest.approx(0.3)
    assert law.cdf(0.6) == pytest.approx(0.25)
    assert law.ppf(0.25) == pytest.approx(0.6)
    assert law.ppf(0.5) == 1.0


@pytest.mark.parametrize("name", sorted(LAWS))
def test_ks_sampling(name):
    law = LAWS[name]
    n = 100_000
    xs = law.sample(np.random.default_rng(11), n)
    assert np.all(xs > 0)
    assert ks_distance(xs, law.cdf, law.cdf_left) < ks_critical(n)


@given(st.floats(0.0, 6.0), st.floats(0.0, 6.0), st.sampled_from(sorted(LAWS)))
def test_integration_additive(a, b, name):
    law = LAWS[name]
    lo, mid = min(a, b), max(a, b)

    def g(r):
        return np.cos(r) + r ** 2

    whole = integrate_dF(law, g, (lo, math.inf))
    parts = integrate_dF(law, g, (lo, mid)) + integrate_dF(law, g, (mid, math.inf))
    assert whole == pytest.approx(parts, rel=1e-9, abs=1e-11)


@given(st.floats(0.0, 4.0), st.floats(0.0, 8.0))
def test_integral_of_indicator_is_cdf_increment(lo, width):
    law = LAWS["weibull"]
    hi = lo + width
    got = integrate_dF(law, np.ones_like, (lo, hi))
    assert got == pytest.approx(law.cdf(hi) - law.cdf(lo), abs=1e-11)


def test_square_root_singularity_at_lower_end():
    lo = 0.5
    got = integrate_dF(Exponential(1.0), lambda r, d: d ** -0.5, (lo, math.inf), with_gap=True)
    assert got == pytest.approx(math.sqrt(math.pi) * math.exp(-lo), rel=1e-10)


@pytest.mark.parametrize("name", sorted(LAWS))
def test_rule_matches_adaptive(name):
    law = LAWS[name]
    lo = 0.3

    def g(r):
        return np.exp(-0.3 * r) * np.sqrt(r)

    rule = stieltjes_rule(law, (lo, math.inf))
    # nodes may round onto lo; the exact offsets must stay positive
    assert np.all(rule.weights > 0) and np.all(rule.gaps > 0) and np.all(rule.nodes >= lo)
    assert rule.integrate(g(rule.nodes)) == pytest.approx(integrate_dF(law, g, (lo, math.inf)), rel=1e-9)


def test_rule_gaps_are_exact():
    rule = stieltjes_rule(Exponential(1.0), (0.7, math.inf))
    assert rule.gaps.min() < 1e-15
    np.testing.assert_allclose(rule.nodes - 0.7, rule.gaps, atol=2e-16)


def test_jump_in_integrand_is_resolved():
    got = integrate_dF(Exponential(1.0), lambda r: (r > 1.2345).astype(float))
    assert got == pytest.approx(math.exp(-1.2345), rel=1e-10)


def test_interior_pole_not_integrable():
    with pytest.raises(NonIntegrable):
        integrate_dF(Exponential(1.0), lambda r: 1.0 / np.abs(r - 1.2345))


def test_nonfinite_integrand():
    with pytest.raises(NonIntegrable):
        integrate_dF(Exponential(1.0), lambda r: np.full_like(r, np.nan))


def test_integrate_time_breaks():
    law = DiscreteAtoms((1.0, 2.0), (0.5, 0.5))
    assert integrate_time(law.survival, 0.0, 3.0, law.breakpoints()) == pytest.approx(1.5)


def test_time_interval_validation():
    assert TimeInterval(0.5).hi == math.inf
    with pytest.raises(ValueError):
        TimeInterval(2.0, 1.0)


def test_law_from_params():
    assert law_from_params({"kind": "exponential", "rate": 2}) == Exponential(2.0)
    law = law_from_params({"kind": "atoms", "atoms": [[1, 0.5], [2, 0.5]]})
    assert law == DiscreteAtoms((1.0, 2.0), (0.5, 0.5))
    with pytest.raises(KeyError):
        law_from_params({"kind": "gamma"})
    with pytest.raises(KeyError):
        law_from_params({"kind": "exponential", "rate": 1, "shape": 2})
