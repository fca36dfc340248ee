"""Posterior of the default time given one observation of the information process.

Given ``beta_t = x != 0`` the posterior of ``tau`` has density

    phi_t(r, x) = k(r) / int_{(t, inf)} k dF,
    k(r) = sqrt(r / (r - t)) * exp(-x**2 / (2 (r - t)))

with respect to ``dF`` on ``(t, inf)``.  ``k`` is the bridge density with the
``r``-independent factors (``exp(-x**2 / (2 t))`` and ``1 / sqrt(2 pi t)``)
removed: they cancel in the ratio and would otherwise underflow.  All
weights are handled in log space, shifted by their maximum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import ndtr

from . import _kernels
from .bridge_core import transition_kernel
from .default_law import (
    RULE_ORDER,
    StieltjesRule,
    integrate_dF,
    stieltjes_rule,
)
from .errors import DefaultedNeedsTau, DegenerateObservation

HERMITE_ORDER = 64


@lru_cache(maxsize=None)
def _hermite(order):
    z, w = np.polynomial.hermite_e.hermegauss(order)
    return z, w / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class Observation:
    """A value ``x`` of the information process seen at time ``t``.

    ``defaulted`` defaults to ``x == 0 and t > 0``: a zero reading after time
    0 is taken as default (it happens before default with probability 0).
    ``zero_crossing=True`` overrides this and treats ``x == 0`` as an
    undefaulted reading, which is outside the model's almost-sure semantics.
    ``tau`` may carry the realised default time on the defaulted branch.
    """

    t: float
    x: float = 0.0
    defaulted: bool | None = None
    tau: float | None = None
    zero_crossing: bool = False

    def __post_init__(self):
        t, x = float(self.t), float(self.x)
        if not (t >= 0 and math.isfinite(t)) or not math.isfinite(x):
            raise ValueError(f"invalid observation (t={self.t}, x={self.x})")
        if t == 0 and x != 0:
            raise ValueError("the process starts at 0: x must be 0 at t = 0")
        defaulted = self.defaulted
        if defaulted is None:
            defaulted = t > 0 and x == 0 and not self.zero_crossing
        if defaulted and x != 0:
            raise ValueError("a defaulted observation must have x = 0")
        if defaulted and t == 0:
            raise ValueError("default cannot have happened by t = 0")
        if self.tau is not None and defaulted and not 0 < self.tau <= t:
            raise ValueError(f"tau={self.tau} contradicts default by t={t}")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "defaulted", bool(defaulted))


def _log_kernel(r, d, x):
    return 0.5 * np.log(r / d) - 0.5 * x * x / d


class PosteriorCurve:
    """Posterior law of ``tau`` given an observation.

    At ``t == 0`` the posterior is the prior.  On the defaulted branch only
    ``cdf`` is available, and only when ``obs.tau`` is known.

    The normalising constant is computed once at construction.
    """

    def __init__(self, law, obs: Observation):
        self.law = law
        self.obs = obs
        self.prior = obs.t == 0
        self._shift = 0.0
        self._norm = 1.0
        if self.prior or obs.defaulted:
            return
        t, x = obs.t, obs.x
        rule = stieltjes_rule(law, (t, math.inf))
        if len(rule) == 0:
            raise DegenerateObservation(f"no prior mass after t={t}: the observation is impossible")
        with np.errstate(divide="ignore"):
            self._shift = float(np.max(_log_kernel(rule.nodes, rule.gaps, x)))
        if not math.isfinite(self._shift):
            raise DegenerateObservation(f"all posterior weights underflow at (t={t}, x={x})")
        norm = integrate_dF(law, lambda r, d: np.exp(_log_kernel(r, d, x) - self._shift),
                            (t, math.inf), with_gap=True)
        if not (norm > 0 and math.isfinite(norm)):
            raise DegenerateObservation(f"posterior normaliser is {norm} at (t={t}, x={x})")
        self._norm = norm

    # -- internals ------------------------------------------------------
    def _require_alive(self):
        if self.obs.defaulted:
            raise DefaultedNeedsTau(
                f"beta_{self.obs.t} = 0 means default has occurred; the posterior is the "
                "point mass at the realised default time"
            )

    def _weight(self, r, d):
        if self.prior:
            return np.ones_like(r)
        return np.exp(_log_kernel(r, d, self.obs.x) - self._shift) / self._norm

    def integrate(self, g, lo=None, hi=math.inf):
        """``int_{(lo, hi]} g(r) phi_t(r, x) dF(r)`` with ``lo`` defaulting to ``t``.

        ``g`` receives arrays of ``r``; ``lo`` is clipped to at least ``t``.
        """
        self._require_alive()
        t = self.obs.t
        lo = t if lo is None else max(lo, t)
        if hi <= lo:
            return 0.0
        if lo == t:
            def f(r, d):
                return np.asarray(g(r), dtype=float) * self._weight(r, d)
            return integrate_dF(self.law, f, (lo, hi), with_gap=True)
        return integrate_dF(self.law, lambda r: np.asarray(g(r), dtype=float) * self._weight(r, r - t),
                            (lo, hi))

    # -- public ---------------------------------------------------------
    def density(self, r):
        """``phi_t(r, x)``; zero for ``r <= t``.  Equal to 1 at ``t == 0``."""
        self._require_alive()
        r = np.asarray(r, dtype=float)
        t = self.obs.t
        alive = r > t
        rr = np.where(alive, r, t + 1.0)
        out = np.where(alive, self._weight(rr, rr - t), 0.0)
        return float(out) if out.ndim == 0 else out

    def cdf(self, u):
        """``P(tau <= u | beta_t = x)``."""
        if self.obs.defaulted:
            if self.obs.tau is None:
                self._require_alive()
            return 1.0 if self.obs.tau <= u else 0.0
        if self.prior:
            return float(self.law.cdf(u))
        if u <= self.obs.t:
            return 0.0
        return min(1.0, self.integrate(np.ones_like, hi=u))

    def cdf_grid(self, us):
        """Posterior cdf on an increasing grid, accumulated from nonnegative increments."""
        us = np.asarray(us, dtype=float)
        if np.any(np.diff(us) < 0):
            raise ValueError("grid must be nondecreasing")
        if self.prior or self.obs.defaulted:
            return np.array([self.cdf(u) for u in us])
        out = np.zeros(us.size)
        acc, prev = 0.0, self.obs.t
        for i, u in enumerate(us):
            if u > prev:
                acc += self.integrate(np.ones_like, lo=prev, hi=u)
                prev = u
            out[i] = min(acc, 1.0)
        return out

    def survival(self, u):
        """``P(tau > u | beta_t = x)``, computed directly from the upper tail."""
        if self.obs.defaulted:
            return 1.0 - self.cdf(u)
        if self.prior:
            return float(self.law.survival(u))
        if u <= self.obs.t:
            return 1.0
        return min(1.0, self.integrate(np.ones_like, lo=u))

    def expectation(self, g):
        return self.integrate(g)


def posterior_density(law, t, x, r):
    """Posterior density of ``tau`` at ``r`` w.r.t. ``dF`` given ``beta_t = x``."""
    if not t > 0:
        raise ValueError("posterior density needs t > 0")
    return PosteriorCurve(law, Observation(t, x, defaulted=False)).density(r)


def posterior_cdf(law, obs, u):
    return PosteriorCurve(law, obs).cdf(u)


def posterior_expectation(law, obs, g):
    return PosteriorCurve(law, obs).expectation(g)


def survival_curve_Psi(law, obs, u):
    """Conditional survival ``P(u < tau | beta_t = x)`` for ``u >= t``."""
    if u < obs.t:
        raise ValueError(f"u={u} precedes the observation time {obs.t}")
    curve = PosteriorCurve(law, obs)
    curve._require_alive()
    return curve.survival(u)


# --------------------------------------------------------------------------
# prediction
# --------------------------------------------------------------------------

def predictive_kernel_Gtu(r, t, u, x, g):
    """``E[g(beta_u) | beta_t = x]`` for a bridge of length ``r > u > t``.

    Gauss-Hermite quadrature (exact for polynomials of degree < 128).
    """
    k = transition_kernel(r, t, u, x)
    if k.is_point_mass:
        return float(g(np.array([k.mean]))[0])
    z, w = _hermite(HERMITE_ORDER)
    return float(np.dot(w, g(k.mean + math.sqrt(k.variance) * z)))


def _kernel_moments(r, t, u, x):
    span = r - t
    return x * (r - u) / span, (r - u) * (u - t) / span


def predict_expectation(law, obs, u, g):
    """``E[g(tau, beta_u) | beta_t = x]`` for ``u > t`` before default.

    ``g(r, y)`` must broadcast over arrays.  Paths defaulting in ``(t, u]``
    contribute ``g(r, 0)``; the rest a Gaussian average under the bridge
    transition from ``(t, x)`` to ``u``.
    """
    if not u > obs.t:
        raise ValueError(f"need u > t, got t={obs.t}, u={u}")
    curve = PosteriorCurve(law, obs)
    curve._require_alive()
    t, x = obs.t, obs.x
    z, w = _hermite(HERMITE_ORDER)

    def outer(r):
        m, v = _kernel_moments(r, t, u, x)
        y = m[:, None] + np.sqrt(v)[:, None] * z[None, :]
        return np.asarray(g(r[:, None], y), dtype=float) @ w

    inner = curve.integrate(lambda r: g(r, np.zeros_like(r)), hi=u)
    return inner + curve.integrate(outer, lo=u)


def zero_mass(law, obs, u):
    """Mass of the atom of ``beta_u`` at 0 given the observation: ``P(tau <= u | ...)``."""
    return posterior_cdf(law, obs, u)


def conditional_mean(law, obs, u):
    """``E[beta_u | beta_t = x] = x int_{(u, inf)} (r - u)/(r - t) phi dF``."""
    curve = PosteriorCurve(law, obs)
    if not u > obs.t:
        raise ValueError(f"need u > t, got t={obs.t}, u={u}")
    curve._require_alive()
    if obs.x == 0:
        return 0.0
    t = obs.t
    return obs.x * curve.integrate(lambda r: (r - u) / (r - t), lo=u)


def conditional_second_moment(law, obs, u):
    curve = PosteriorCurve(law, obs)
    if not u > obs.t:
        raise ValueError(f"need u > t, got t={obs.t}, u={u}")
    curve._require_alive()
    t, x = obs.t, obs.x

    def g(r):
        m, v = _kernel_moments(r, t, u, x)
        return v + m * m

    return curve.integrate(g, lo=u)


def conditional_cdf(law, obs, u, y):
    """``P(beta_u <= y | beta_t = x)`` for ``u > t``: the atom at 0 plus a normal mixture."""
    curve = PosteriorCurve(law, obs)
    if not u > obs.t:
        raise ValueError(f"need u > t, got t={obs.t}, u={u}")
    curve._require_alive()
    t, x = obs.t, obs.x

    def g(r):
        m, v = _kernel_moments(r, t, u, x)
        # a node at r == u has v == 0: the kernel is the point mass at m
        sd = np.sqrt(v)
        z = np.where(sd > 0, (y - m) / np.where(sd > 0, sd, 1.0), np.where(y >= m, np.inf, -np.inf))
        return ndtr(z)

    atom = curve.cdf(u) if y >= 0 else 0.0
    return atom + curve.integrate(g, lo=u)


def optional_projection_oZ(law, obs):
    """Filtered drift ``x int_{(t, inf)} phi_t(r, x) / (r - t) dF(r)``; 0 at ``x = 0``."""
    if not obs.t > 0:
        raise ValueError("the projected drift needs t > 0")
    if obs.x == 0:
        return 0.0
    curve = PosteriorCurve(law, Observation(obs.t, obs.x))
    return obs.x * integrate_dF(
        law, lambda r, d: curve._weight(r, d) / d, (obs.t, math.inf), with_gap=True
    )


# --------------------------------------------------------------------------
# vectorised evaluation over many observations at a common time
# --------------------------------------------------------------------------

class VectorPosterior:
    """Posterior functionals for many ``x`` at one time ``t > 0``.

    Uses a fixed Stieltjes rule on ``(t, inf)`` split at ``cuts`` so that
    posterior probabilities of ``(t, c]`` are exact sums over segments.
    """

    def __init__(self, law, t, cuts=(), order=RULE_ORDER):
        if not t > 0:
            raise ValueError("vector posterior needs t > 0")
        self.law = law
        self.t = float(t)
        self.cuts = tuple(sorted(c for c in cuts if c > t))
        edges = (self.t,) + self.cuts + (math.inf,)
        nodes, weights, dists, seg = [], [], [], []
        for i, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
            rule = stieltjes_rule(law, (a, b), order=order)
            nodes.append(rule.nodes)
            weights.append(rule.weights)
            dists.append(rule.gaps if i == 0 else rule.nodes - self.t)
            seg.append(np.full(len(rule), i))
        self.rule = StieltjesRule(np.concatenate(nodes), np.concatenate(weights),
                                  np.concatenate(dists))
        self.segment = np.concatenate(seg)
        if len(self.rule) == 0:
            raise DegenerateObservation(f"no prior mass after t={t}")
        r, d = self.rule.nodes, self.rule.gaps
        self.base = np.log(self.rule.weights) + 0.5 * np.log(r / d)
        self.inv = 0.5 / d

    def ratios(self, xs, aux):
        """Posterior means of the rows of ``aux`` (node values) for each ``x``."""
        xs = np.ascontiguousarray(xs, dtype=float)
        aux = np.ascontiguousarray(np.atleast_2d(aux), dtype=float)
        return _kernels.posterior_ratios(xs, self.base, self.inv, aux)

    def cdf(self, xs):
        """Posterior ``P(tau <= c)`` for each cut ``c``: array ``(len(cuts), len(xs))``."""
        aux = np.stack([(self.segment <= i).astype(float) for i in range(len(self.cuts))])
        return self.ratios(xs, aux)[0]

    def density(self, xs, r):
        """``phi_t(r, x)`` at one ``r > t`` for each ``x``."""
        xs = np.asarray(xs, dtype=float)
        _, log_norm = self.ratios(xs, np.zeros((1, len(self.rule))))
        d = r - self.t
        return np.exp(0.5 * math.log(r / d) - 0.5 * xs * xs / d - log_norm)

    def drift(self, xs):
        """Projected drift ``x E[1/(tau - t) | x]`` for each ``x``."""
        xs = np.asarray(xs, dtype=float)
        h = self.ratios(xs, (1.0 / self.rule.gaps)[None, :])[0][0]
        return xs * h


DRIFT_TABLE_SIZE = 800
DRIFT_TABLE_RANGE = (1e-6, 10.0)
DRIFT_RULE_ORDER = 16


class DriftProjector:
    """Tabulated projected drift on a time grid.

    For each grid time ``s > 0`` the odd function ``x -> ^oZ_s(x)`` is stored
    as ``a -> a E[1/(tau - s) | |beta_s| = a]`` on ``a = u sqrt(s)`` for a
    geometric ``u`` grid.  That function stays bounded and continuous down to
    ``a -> 0`` even though the drift itself jumps at 0 (from ``-c`` to ``c``);
    the value at ``x == 0`` is set to 0.
    """

    def __init__(self, law, times, size=DRIFT_TABLE_SIZE, u_range=DRIFT_TABLE_RANGE,
                 order=DRIFT_RULE_ORDER):
        self.law = law
        self.times = np.ascontiguousarray(times, dtype=float)
        self.u_grid = np.geomspace(u_range[0], u_range[1], size)
        self.scale = np.sqrt(self.times)
        tables = np.zeros((self.times.size, size))
        for k, s in enumerate(self.times):
            if s <= 0 or law.survival(s) <= 0:
                continue
            vp = VectorPosterior(law, s, order=order)
            tables[k] = vp.drift(self.u_grid * self.scale[k])
        self.tables = tables

    def drift(self, values):
        """Projected drift for an ``(n, len(times))`` array of path values."""
        values = np.ascontiguousarray(np.atleast_2d(values), dtype=float)
        if values.shape[1] != self.times.size:
            raise ValueError("path values do not match the projector's grid")
        return _kernels.table_drift(values, self.scale, self.u_grid, self.tables)
