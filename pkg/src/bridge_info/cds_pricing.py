"""Credit default swap prices and fair spreads under two information sets.

``H`` observes only whether default has happened; ``F_beta`` observes the
information process.  In both cases a CDS started at ``t`` and alive is

    price = protection - kappa * fee
    protection = int_{(t, T]} e^{-r_d (v - t)} delta(v) dPi(v)
    fee        = int_t^T e^{-r_d (v - t)} Pibar(v) dv

with ``Pi`` the conditional law of ``tau`` (the normalised prior tail for
``H``, the posterior for ``F_beta``) and ``Pibar = 1 - Pi``.  The fee leg is
evaluated through Fubini as ``int_{(t, T]} A(r) dPi(r) + A(T) Pibar(T)`` with
``A(s) = int_t^s e^{-r_d (v - t)} dv``, so both legs are Stieltjes integrals
against the same measure and atoms are handled exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bayes_filter import PosteriorCurve
from .default_law import integrate_dF, integrate_time
from .errors import DegenerateFeeLeg, ZeroSurvival


@dataclass(frozen=True)
class Recovery:
    """Piecewise-linear recovery through ``(v, delta)`` knots, flat outside them."""

    knots: tuple

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.knots, dtype=float))
        if pts.shape[1] != 2 or pts.shape[0] == 0:
            raise ValueError("recovery knots must be (time, value) pairs")
        if np.any(np.diff(pts[:, 0]) <= 0):
            raise ValueError("recovery knot times must be strictly increasing")
        if np.any(pts[:, 1] < 0):
            raise ValueError("recovery must be nonnegative")
        object.__setattr__(self, "knots", tuple(map(tuple, pts.tolist())))
        object.__setattr__(self, "_v", pts[:, 0].copy())
        object.__setattr__(self, "_d", pts[:, 1].copy())

    @classmethod
    def constant(cls, value):
        return cls(((0.0, float(value)),))

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        out = np.interp(v, self._v, self._d)
        return float(out) if out.ndim == 0 else out

    @property
    def breakpoints(self):
        return tuple(self._v.tolist())


@dataclass(frozen=True)
class CdsContract:
    maturity: float
    kappa: float
    recovery: Recovery
    discount_rate: float = 0.0

    def __post_init__(self):
        if not self.maturity > 0:
            raise ValueError(f"maturity must be positive, got {self.maturity}")
        if not self.kappa >= 0:
            raise ValueError(f"fee rate must be nonnegative, got {self.kappa}")
        if not self.discount_rate >= 0:
            raise ValueError(f"discount rate must be nonnegative, got {self.discount_rate}")
        if not isinstance(self.recovery, Recovery):
            object.__setattr__(self, "recovery", Recovery.constant(self.recovery))

    def with_kappa(self, kappa):
        return CdsContract(self.maturity, kappa, self.recovery, self.discount_rate)


@dataclass(frozen=True)
class Quote:
    t: float
    price: float
    branch: str
    filtration: str
    protection: float = 0.0
    fee: float = 0.0


def _accrual(t, rd):
    """``s -> int_t^s e^{-rd (v - t)} dv``."""
    if rd == 0:
        return lambda s: np.asarray(s, dtype=float) - t
    return lambda s: -np.expm1(-rd * (np.asarray(s, dtype=float) - t)) / rd


def _discount(t, rd):
    return lambda s: np.exp(-rd * (np.asarray(s, dtype=float) - t))


def _check_time(t, contract):
    if not 0 <= t:
        raise ValueError(f"valuation time must be >= 0, got {t}")
    if t >= contract.maturity:
        return False
    return True


def _legs_prior(law, contract, t):
    """Both legs under the prior conditioned on survival to ``t``."""
    T, rd = contract.maturity, contract.discount_rate
    g_t = float(law.survival(t))
    g_T = float(law.survival(T))
    if not g_T > 0:
        raise ZeroSurvival(f"survival vanishes on [{t}, {T}] (G(T) = {g_T})")
    disc, acc = _discount(t, rd), _accrual(t, rd)
    delta = contract.recovery
    prot = integrate_dF(law, lambda r: disc(r) * delta(r), (t, T)) / g_t
    fee = (integrate_dF(law, acc, (t, T)) + float(acc(T)) * g_T) / g_t
    return prot, fee


def _legs_posterior(curve, contract):
    T, rd = contract.maturity, contract.discount_rate
    t = curve.obs.t
    disc, acc = _discount(t, rd), _accrual(t, rd)
    delta = contract.recovery
    prot = curve.integrate(lambda r: disc(r) * delta(r), hi=T)
    fee = curve.integrate(acc, hi=T) + float(acc(T)) * curve.survival(T)
    return prot, fee


def legs(law, contract, obs, mode):
    """``(protection, fee)`` per unit fee rate for a live contract."""
    if mode not in ("H", "F_beta"):
        raise ValueError(f"mode must be 'H' or 'F_beta', got {mode!r}")
    if mode == "H" or obs.t == 0:
        return _legs_prior(law, contract, obs.t)
    curve = PosteriorCurve(law, obs)
    curve._require_alive()
    return _legs_posterior(curve, contract)


def _quote(t, prot, fee, kappa, filtration):
    return Quote(t, prot - kappa * fee, "pre_default", filtration, prot, fee)


def _dead(t, filtration):
    return Quote(t, 0.0, "post_default", filtration)


def _require_undiscounted(contract):
    if contract.discount_rate != 0:
        raise ValueError("this formula is the zero-rate one; use price_discounted")


def price_H(law, contract, t, alive=True):
    """Price when only the default indicator is observed (zero rates)."""
    _require_undiscounted(contract)
    if not alive or not _check_time(t, contract):
        return _dead(t, "H") if not alive else Quote(t, 0.0, "pre_default", "H")
    prot, fee = _legs_prior(law, contract, t)
    return _quote(t, prot, fee, contract.kappa, "H")


def price_beta(law, contract, obs):
    """Price when the information process is observed (zero rates).

    On the defaulted branch the quote is 0.  At ``t == 0`` the posterior is
    the prior and the result coincides with ``price_H``.
    """
    _require_undiscounted(contract)
    return price_discounted(law, contract, obs, "F_beta")


def price_discounted(law, contract, obs, mode):
    """Price with a constant discount rate, for either information set."""
    filtration = "H" if mode == "H" else "F_beta"
    if obs.defaulted:
        return _dead(obs.t, filtration)
    if not _check_time(obs.t, contract):
        return Quote(obs.t, 0.0, "pre_default", filtration)
    prot, fee = legs(law, contract, obs, mode)
    return _quote(obs.t, prot, fee, contract.kappa, filtration)


def fair_spread(law, contract, obs, mode):
    """Fee rate that sets the price to zero: protection / fee."""
    if obs.defaulted:
        raise ValueError("no spread after default")
    prot, fee = legs(law, contract, obs, mode)
    if not fee > 0:
        raise DegenerateFeeLeg(f"fee leg is {fee} at t={obs.t}")
    return prot / fee


def fee_leg_lebesgue(law, contract, obs, mode, levels=12, order=16):
    """Fee leg as ``int_t^T e^{-r_d (v - t)} Pibar(v) dv`` by direct quadrature.

    Much slower than the Stieltjes route used for pricing; kept as an
    independent cross-check.
    """
    t, T, rd = obs.t, contract.maturity, contract.discount_rate
    disc = _discount(t, rd)
    if mode == "H" or t == 0:
        g_t = float(law.survival(t))
        return integrate_time(lambda v: disc(v) * law.survival(v), t, T,
                              law.breakpoints()) / g_t
    curve = PosteriorCurve(law, obs)
    curve._require_alive()

    def f(v):
        return disc(v) * np.array([curve.survival(float(s)) for s in np.atleast_1d(v)])

    return integrate_time(f, t, T, law.breakpoints(), singular_lo=True, levels=levels, order=order)
