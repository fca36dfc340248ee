"""Laws of the default time and integration of functions against ``dF``.

Every law is split into an atomic part (finitely many locations with
weights) and an absolutely continuous part described by a density on a few
compact-or-halfline pieces.  Integrals over ``(lo, hi]`` combine an exact
atom sum with Gauss-Legendre quadrature on the continuous pieces.

Quadrature on a continuous piece ``[a, b]`` uses the substitution
``r = a + q**2``.  That removes ``(r - a)**(-1/2)`` singularities exactly and
turns the posterior kernels (which concentrate at scale ``x**2`` next to the
observation time) into functions that are smooth on geometrically shrinking
``q`` pieces.  Unbounded supports are cut at the point beyond which less
than ``1e-12`` of the remaining mass lies; that residual mass is carried as a
pseudo-atom at the cut.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import InvalidLaw, NonIntegrable

TAIL_EPS = 1e-12
GL_ORDER = 64
RULE_ORDER = 32
SINGULAR_LEVELS = 30
PLAIN_LEVELS = 2
MAX_DEPTH = 40

_TINY_U = np.nextafter(0.0, 1.0)


@lru_cache(maxsize=None)
def gauss_legendre(order):
    x, w = np.polynomial.legendre.leggauss(order)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


@dataclass(frozen=True)
class TimeInterval:
    """Half-open time range ``(lo, hi]``; ``hi`` may be ``inf``."""

    lo: float = 0.0
    hi: float = math.inf

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if math.isnan(lo) or math.isnan(hi) or lo < 0.0 or lo > hi:
            raise ValueError(f"invalid interval ({lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)


def _as_interval(iv):
    if iv is None:
        return TimeInterval()
    if isinstance(iv, TimeInterval):
        return iv
    lo, hi = iv
    return TimeInterval(lo, hi)


class DefaultLaw(ABC):
    """Distribution of a strictly positive default time."""

    kind = "abstract"

    # -- representation -------------------------------------------------
    @property
    @abstractmethod
    def support_lo(self) -> float: ...

    @property
    @abstractmethod
    def support_hi(self) -> float: ...

    def atoms(self):
        """Atom locations and weights (possibly empty arrays)."""
        return np.empty(0), np.empty(0)

    def density(self, r):
        """Density of the absolutely continuous part."""
        return np.zeros_like(np.asarray(r, dtype=float))

    def ac_pieces(self):
        """Intervals ``(a, b)`` on which the density is smooth (``b`` may be inf)."""
        return []

    def tail_cut(self, lo):
        """Point beyond which at most ``TAIL_EPS * survival(lo)`` mass remains."""
        return self.support_hi

    def breakpoints(self):
        """Times where the cdf or the density is not smooth."""
        pts = set(self.atoms()[0].tolist())
        for a, b in self.ac_pieces():
            pts.add(a)
            if math.isfinite(b):
                pts.add(b)
        return np.array(sorted(p for p in pts if p > 0.0))

    # -- distribution functions ----------------------------------------
    @abstractmethod
    def cdf(self, t): ...

    def survival(self, t):
        return 1.0 - self.cdf(t)

    def cdf_left(self, t):
        """``P(tau < t)``."""
        t = np.asarray(t, dtype=float)
        locs, w = self.atoms()
        jump = (t[..., None] == locs).astype(float) @ w if locs.size else 0.0
        return self.cdf(t) - jump

    @abstractmethod
    def ppf(self, u): ...

    def sample(self, rng, size=None):
        """Inverse-cdf draws; the uniform is kept away from 0 so tau > 0."""
        u = np.asarray(rng.random(size))
        u = np.where(u <= 0.0, _TINY_U, u)
        out = self.ppf(u)
        return float(out) if size is None else out

    def mean(self):
        return integrate_dF(self, lambda r: r)

    def params(self) -> dict:
        raise NotImplementedError


def _scalar_or_array(out, like):
    return float(out) if np.ndim(like) == 0 else out


@dataclass(frozen=True)
class Exponential(DefaultLaw):
    rate: float
    kind = "exponential"

    def __post_init__(self):
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise InvalidLaw(f"exponential rate must be positive, got {self.rate}")

    @property
    def support_lo(self):
        return 0.0

    @property
    def support_hi(self):
        return math.inf

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        return _scalar_or_array(-np.expm1(-self.rate * np.maximum(t, 0.0)), t)

    def survival(self, t):
        t = np.asarray(t, dtype=float)
        return _scalar_or_array(np.exp(-self.rate * np.maximum(t, 0.0)), t)

    def cdf_left(self, t):
        return self.cdf(t)

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        return _scalar_or_array(-np.log1p(-u) / self.rate, u)

    def density(self, r):
        r = np.asarray(r, dtype=float)
        return np.where(r > 0, self.rate * np.exp(-self.rate * np.maximum(r, 0.0)), 0.0)

    def ac_pieces(self):
        return [(0.0, math.inf)]

    def tail_cut(self, lo):
        return lo - math.log(TAIL_EPS) / self.rate

    def params(self):
        return {"kind": self.kind, "rate": self.rate}


@dataclass(frozen=True)
class UniformInterval(DefaultLaw):
    a: float
    b: float
    kind = "uniform"

    def __post_init__(self):
        if not (0.0 <= self.a < self.b and math.isfinite(self.b)):
            raise InvalidLaw(f"uniform law needs 0 <= a < b < inf, got ({self.a}, {self.b})")

    @property
    def support_lo(self):
        return float(self.a)

    @property
    def support_hi(self):
        return float(self.b)

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        return _scalar_or_array(np.clip((t - self.a) / (self.b - self.a), 0.0, 1.0), t)

    def survival(self, t):
        t = np.asarray(t, dtype=float)
        return _scalar_or_array(np.clip((self.b - t) / (self.b - self.a), 0.0, 1.0), t)

    def cdf_left(self, t):
        return self.cdf(t)

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        return _scalar_or_array(self.a + u * (self.b - self.a), u)

    def density(self, r):
        r = np.asarray(r, dtype=float)
        return np.where((r > self.a) & (r < self.b), 1.0 / (self.b - self.a), 0.0)

    def ac_pieces(self):
        return [(float(self.a), float(self.b))]

    def params(self):
        return {"kind": self.kind, "a": self.a, "b": self.b}


@dataclass(frozen=True)
class Weibull(DefaultLaw):
    shape: float
    scale: float
    kind = "weibull"

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise InvalidLaw(f"weibull needs shape > 0 and scale > 0, got {self.shape}, {self.scale}")

    @property
    def support_lo(self):
        return 0.0

    @property
    def support_hi(self):
        return math.inf

    def _z(self, t):
        return (np.maximum(t, 0.0) / self.scale) ** self.shape

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        return _scalar_or_array(-np.expm1(-self._z(t)), t)

    def survival(self, t):
        t = np.asarray(t, dtype=float)
        return _scalar_or_array(np.exp(-self._z(t)), t)

    def cdf_left(self, t):
        return self.cdf(t)

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        return _scalar_or_array(self.scale * (-np.log1p(-u)) ** (1.0 / self.shape), u)

    def density(self, r):
        r = np.asarray(r, dtype=float)
        y = np.where(r > 0, r, 1.0) / self.scale
        dens = self.shape / self.scale * y ** (self.shape - 1.0) * np.exp(-(y ** self.shape))
        return np.where(r > 0, dens, 0.0)

    def ac_pieces(self):
        return [(0.0, math.inf)]

    def tail_cut(self, lo):
        z = (lo / self.scale) ** self.shape - math.log(TAIL_EPS)
        return self.scale * z ** (1.0 / self.shape)

    def params(self):
        return {"kind": self.kind, "shape": self.shape, "scale": self.scale}


@dataclass(frozen=True)
class DiscreteAtoms(DefaultLaw):
    """Finitely many default dates.

    A single atom is a deterministic default time, which the model excludes;
    ``allow_dirac=True`` lifts the check for pure simulation work (a bridge of
    fixed length).
    """

    locations: tuple
    weights: tuple
    allow_dirac: bool = field(default=False, compare=False)
    kind = "atoms"

    def __post_init__(self):
        locs = np.asarray(self.locations, dtype=float).ravel()
        w = np.asarray(self.weights, dtype=float).ravel()
        if locs.size == 0 or locs.size != w.size:
            raise InvalidLaw("atoms need matching, non-empty location and weight lists")
        if np.any(~np.isfinite(locs)) or np.any(locs <= 0):
            raise InvalidLaw("atom locations must be finite and strictly positive")
        if np.any(w <= 0):
            raise InvalidLaw("atom weights must be strictly positive")
        if abs(w.sum() - 1.0) > 1e-12:
            raise InvalidLaw(f"atom weights sum to {w.sum()!r}, not 1")
        if np.unique(locs).size != locs.size:
            raise InvalidLaw("atom locations must be distinct")
        if locs.size == 1 and not self.allow_dirac:
            raise InvalidLaw("a single atom makes the default time deterministic")
        order = np.argsort(locs)
        object.__setattr__(self, "locations", tuple(locs[order].tolist()))
        object.__setattr__(self, "weights", tuple(w[order].tolist()))
        object.__setattr__(self, "_locs", locs[order])
        object.__setattr__(self, "_w", w[order])
        object.__setattr__(self, "_cum", np.cumsum(w[order]))

    @property
    def support_lo(self):
        return float(self._locs[0])

    @property
    def support_hi(self):
        return float(self._locs[-1])

    def atoms(self):
        return self._locs, self._w

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        out = (t[..., None] >= self._locs) @ self._w
        return _scalar_or_array(out, t)

    def survival(self, t):
        t = np.asarray(t, dtype=float)
        out = (t[..., None] < self._locs) @ self._w
        return _scalar_or_array(out, t)

    def cdf_left(self, t):
        t = np.asarray(t, dtype=float)
        return _scalar_or_array((t[..., None] > self._locs) @ self._w, t)

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        idx = np.searchsorted(self._cum, u, side="left")
        idx = np.minimum(idx, self._locs.size - 1)
        return _scalar_or_array(self._locs[idx], u)

    def params(self):
        return {"kind": self.kind, "atoms": [list(p) for p in zip(self.locations, self.weights)]}


@dataclass(frozen=True)
class PiecewiseEmpirical(DefaultLaw):
    """Right-continuous cdf, linear between knots.

    Knot times are nondecreasing; a time listed twice carries an atom equal to
    the jump of the cdf values there.  ``F`` is 0 before the first knot, so a
    positive first value is an atom at the first knot.
    """

    times: tuple
    probs: tuple
    kind = "empirical"

    def __post_init__(self):
        ts = np.asarray(self.times, dtype=float).ravel()
        ps = np.asarray(self.probs, dtype=float).ravel()
        if ts.size < 2 or ts.size != ps.size:
            raise InvalidLaw("empirical law needs at least two (time, cdf) knots")
        if np.any(~np.isfinite(ts)) or ts[0] < 0 or np.any(np.diff(ts) < 0):
            raise InvalidLaw("knot times must be finite, >= 0 and nondecreasing")
        if ts.size > 2 and np.any((ts[2:] == ts[1:-1]) & (ts[1:-1] == ts[:-2])):
            raise InvalidLaw("a knot time may appear at most twice")
        if np.any(np.diff(ps) < 0) or ps[0] < 0:
            raise InvalidLaw("cdf values must be nondecreasing and nonnegative")
        if abs(ps[-1] - 1.0) > 1e-12:
            raise InvalidLaw("last cdf value must be 1")
        ps = ps.copy()
        ps[-1] = 1.0
        locs, w = [], []
        if ps[0] > 0:
            locs.append(ts[0])
            w.append(ps[0])
        for i in range(1, ts.size):
            if ts[i] == ts[i - 1] and ps[i] > ps[i - 1]:
                locs.append(ts[i])
                w.append(ps[i] - ps[i - 1])
        locs = np.array(locs)
        if np.any(locs <= 0):
            raise InvalidLaw("an atom at time 0 contradicts tau > 0")
        if locs.size == 1 and abs(w[0] - 1.0) <= 1e-12:
            raise InvalidLaw("a single atom makes the default time deterministic")
        object.__setattr__(self, "times", tuple(ts.tolist()))
        object.__setattr__(self, "probs", tuple(ps.tolist()))
        object.__setattr__(self, "_t", ts)
        object.__setattr__(self, "_p", ps)
        object.__setattr__(self, "_locs", locs)
        object.__setattr__(self, "_w", np.array(w))

    @property
    def support_lo(self):
        return float(self._t[0])

    @property
    def support_hi(self):
        return float(self._t[-1])

    def atoms(self):
        return self._locs, self._w

    def _interp(self, t, idx):
        ts, ps = self._t, self._p
        out = np.zeros_like(t)
        inside = (idx >= 0) & (idx < ts.size - 1)
        last = idx >= ts.size - 1
        out[last] = 1.0
        i = idx[inside]
        t0, t1 = ts[i], ts[i + 1]
        p0, p1 = ps[i], ps[i + 1]
        span = np.where(t1 > t0, t1 - t0, 1.0)
        frac = np.where(t1 > t0, (t[inside] - t0) / span, 1.0)
        out[inside] = p0 + frac * (p1 - p0)
        return out

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        tt = np.atleast_1d(t)
        out = self._interp(tt, np.searchsorted(self._t, tt, side="right") - 1)
        return _scalar_or_array(out.reshape(t.shape), t)

    def cdf_left(self, t):
        t = np.asarray(t, dtype=float)
        tt = np.atleast_1d(t)
        out = self._interp(tt, np.searchsorted(self._t, tt, side="left") - 1)
        return _scalar_or_array(out.reshape(t.shape), t)

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        uu = np.atleast_1d(u)
        ts, ps = self._t, self._p
        j = np.minimum(np.searchsorted(ps, uu, side="left"), ts.size - 1)
        out = ts[j].copy()
        mid = j > 0
        jm = j[mid]
        t0, t1, p0, p1 = ts[jm - 1], ts[jm], ps[jm - 1], ps[jm]
        lin = (t1 > t0) & (p1 > p0)
        span = np.where(lin, p1 - p0, 1.0)
        out[mid] = np.where(lin, t0 + (uu[mid] - p0) / span * (t1 - t0), t1)
        return _scalar_or_array(out.reshape(u.shape), u)

    def density(self, r):
        r = np.asarray(r, dtype=float)
        ts, ps = self._t, self._p
        idx = np.searchsorted(ts, r, side="right") - 1
        ok = (idx >= 0) & (idx < ts.size - 1)
        i = np.where(ok, idx, 0)
        dt = ts[i + 1] - ts[i]
        dens = np.where(dt > 0, (ps[i + 1] - ps[i]) / np.where(dt > 0, dt, 1.0), 0.0)
        return np.where(ok, dens, 0.0)

    def ac_pieces(self):
        ts, ps = self._t, self._p
        return [(float(ts[i]), float(ts[i + 1])) for i in range(ts.size - 1)
                if ts[i + 1] > ts[i] and ps[i + 1] > ps[i]]

    def params(self):
        return {"kind": self.kind, "knots": [list(p) for p in zip(self.times, self.probs)]}


# --------------------------------------------------------------------------
# integration
# --------------------------------------------------------------------------

def _q_breaks(length, refine):
    top = math.sqrt(length)
    levels = SINGULAR_LEVELS if refine else PLAIN_LEVELS
    return [0.0] + [top * 2.0 ** (-k) for k in range(levels, 0, -1)] + [top]


def _continuous_parts(law, lo, hi):
    """Clipped continuous pieces, the cut point and the pseudo-atom tail mass."""
    cut = law.tail_cut(lo)
    upper = min(hi, cut)
    parts = []
    for a, b in law.ac_pieces():
        a2, b2 = max(a, lo), min(b, upper)
        if b2 > a2:
            parts.append((a2, b2, a2 == lo))
    tail = 0.0
    if math.isfinite(cut) and hi > cut:
        tail = float(law.survival(cut) - (law.survival(hi) if math.isfinite(hi) else 0.0))
    return parts, cut, max(tail, 0.0)


def _gl(fq, a, b, order=GL_ORDER):
    x, w = gauss_legendre(order)
    half = 0.5 * (b - a)
    return half * float(np.dot(w, fq(0.5 * (a + b) + half * x)))


def _adaptive(fq, a, b, rtol, atol, order=GL_ORDER):
    total = 0.0
    stack = [(a, b, _gl(fq, a, b, order), 0)]
    while stack:
        lo, hi, whole, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        left, right = _gl(fq, lo, mid, order), _gl(fq, mid, hi, order)
        both = left + right
        if not math.isfinite(both):
            raise NonIntegrable(f"non-finite integrand on [{lo}, {hi}]")
        if abs(both - whole) <= max(rtol * abs(both), atol):
            total += both
        elif depth >= MAX_DEPTH:
            raise NonIntegrable(
                f"quadrature did not converge on [{lo:.3g}, {hi:.3g}] (|diff|={abs(both - whole):.3g})"
            )
        else:
            stack.append((mid, hi, right, depth + 1))
            stack.append((lo, mid, left, depth + 1))
    return total


def integrate_dF(law, g, iv=None, *, with_gap=False, rtol=1e-10, atol=1e-15):
    """Stieltjes integral of ``g`` against ``dF`` over ``(iv.lo, iv.hi]``.

    ``g`` must accept a numpy array of times.  With ``with_gap=True`` it is
    called as ``g(r, d)`` where ``d = r - iv.lo`` is computed without
    cancellation, which lets integrands singular at ``iv.lo`` stay accurate
    right up to the end point.  Raises ``NonIntegrable`` when the adaptive
    bisection fails to meet ``rtol``.
    """
    iv = _as_interval(iv)
    lo, hi = iv.lo, iv.hi

    def call(r, d):
        out = g(r, d) if with_gap else g(r)
        return np.asarray(out, dtype=float)

    total = 0.0
    locs, w = law.atoms()
    if locs.size:
        inside = (locs > lo) & (locs <= hi)
        if inside.any():
            total += float(np.dot(w[inside], call(locs[inside], locs[inside] - lo)))
    parts, cut, tail = _continuous_parts(law, lo, hi)
    for a, b, refine in parts:
        def fq(q, a=a):
            q2 = q * q
            r = a + q2
            return call(r, q2 + (a - lo)) * law.density(r) * 2.0 * q

        qs = _q_breaks(b - a, refine)
        for qa, qb in zip(qs[:-1], qs[1:]):
            total += _adaptive(fq, qa, qb, rtol, atol)
    if tail > 0.0:
        total += tail * float(call(np.array([cut]), np.array([cut - lo]))[0])
    return total


@dataclass(frozen=True)
class StieltjesRule:
    """Fixed nodes and positive weights approximating ``dF`` on ``(lo, hi]``.

    ``gaps`` holds ``nodes - lo`` computed without cancellation.
    """

    nodes: np.ndarray
    weights: np.ndarray
    gaps: np.ndarray

    def integrate(self, values):
        return float(np.dot(self.weights, values))

    def __len__(self):
        return self.nodes.size


def stieltjes_rule(law, iv=None, order=RULE_ORDER):
    """Nodes/weights for ``dF`` on ``(lo, hi]``: atoms, quadrature, tail pseudo-atom.

    The rule is refined geometrically next to ``lo`` so that kernels peaked at
    arbitrarily small distances from ``lo`` are resolved.
    """
    iv = _as_interval(iv)
    lo, hi = iv.lo, iv.hi
    nodes, weights, gaps = [], [], []
    locs, w = law.atoms()
    if locs.size:
        inside = (locs > lo) & (locs <= hi)
        nodes.append(locs[inside])
        weights.append(w[inside])
        gaps.append(locs[inside] - lo)
    x, wq = gauss_legendre(order)
    parts, cut, tail = _continuous_parts(law, lo, hi)
    for a, b, refine in parts:
        qs = _q_breaks(b - a, refine)
        for qa, qb in zip(qs[:-1], qs[1:]):
            half = 0.5 * (qb - qa)
            q = 0.5 * (qa + qb) + half * x
            r = a + q * q
            nodes.append(r)
            weights.append(half * wq * law.density(r) * 2.0 * q)
            gaps.append(q * q + (a - lo))
    if tail > 0.0:
        nodes.append(np.array([cut]))
        weights.append(np.array([tail]))
        gaps.append(np.array([cut - lo]))
    if not nodes:
        return StieltjesRule(np.empty(0), np.empty(0), np.empty(0))
    nodes = np.concatenate(nodes)
    weights = np.concatenate(weights)
    gaps = np.concatenate(gaps)
    keep = (weights > 0) & (gaps > 0)
    return StieltjesRule(nodes[keep], weights[keep], gaps[keep])


def integrate_time(f, lo, hi, breaks=(), *, singular_lo=False, levels=SINGULAR_LEVELS,
                   order=GL_ORDER, rtol=1e-10, atol=1e-15):
    """Lebesgue integral of ``f`` over ``[lo, hi]``, split at ``breaks``.

    With ``singular_lo`` the first piece is integrated in ``q = sqrt(v - lo)``
    on geometrically refined sub-pieces, for integrands that vary on very
    small scales next to ``lo``.
    """
    if hi <= lo:
        return 0.0
    pts = [lo] + sorted(b for b in breaks if lo < b < hi) + [hi]
    total = 0.0
    for k, (a, b) in enumerate(zip(pts[:-1], pts[1:])):
        if k == 0 and singular_lo:
            def fq(q, a=a):
                return np.asarray(f(a + q * q), dtype=float) * 2.0 * q

            top = math.sqrt(b - a)
            qs = [0.0] + [top * 2.0 ** (-j) for j in range(levels, 0, -1)] + [top]
            for qa, qb in zip(qs[:-1], qs[1:]):
                total += _adaptive(fq, qa, qb, rtol, atol, order)
        else:
            total += _adaptive(f, a, b, rtol, atol, order)
    return total


# --------------------------------------------------------------------------
# construction from key-value blocks
# --------------------------------------------------------------------------

LAW_KINDS = {
    "exponential": (Exponential, {"rate"}),
    "uniform": (UniformInterval, {"a", "b"}),
    "weibull": (Weibull, {"shape", "scale"}),
    "atoms": (DiscreteAtoms, {"atoms"}),
    "empirical": (PiecewiseEmpirical, {"knots"}),
}


def law_from_params(params: dict) -> DefaultLaw:
    """Build a law from ``{"kind": ..., <parameters>}``.

    Raises ``KeyError`` for unknown kinds/keys and ``InvalidLaw`` for bad values.
    """
    params = dict(params)
    kind = params.pop("kind", None)
    if kind not in LAW_KINDS:
        raise KeyError(f"unknown law kind {kind!r}; expected one of {sorted(LAW_KINDS)}")
    cls, keys = LAW_KINDS[kind]
    allow_dirac = bool(params.pop("allow_dirac", False)) if kind == "atoms" else False
    extra = set(params) - keys
    missing = keys - set(params)
    if extra:
        raise KeyError(f"unknown key(s) for {kind} law: {sorted(extra)}")
    if missing:
        raise KeyError(f"missing key(s) for {kind} law: {sorted(missing)}")
    if kind == "atoms":
        pairs = params["atoms"]
        return DiscreteAtoms(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs),
                             allow_dirac=allow_dirac)
    if kind == "empirical":
        pairs = params["knots"]
        return PiecewiseEmpirical(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs))
    return cls(**{k: float(v) for k, v in params.items()})
