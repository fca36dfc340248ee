"""Brownian bridges of deterministic length: densities, kernels, simulation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels


@dataclass(frozen=True, eq=False)
class PathGrid:
    """Strictly increasing simulation times starting at 0."""

    times: np.ndarray
    dt: float | None = None

    def __post_init__(self):
        times = np.array(self.times, dtype=float).ravel()
        if times.size == 0 or times[0] != 0.0:
            raise ValueError("grid must start at 0")
        if not np.all(np.isfinite(times)):
            raise ValueError("grid times must be finite")
        if times.size > 1 and np.any(np.diff(times) <= 0):
            raise ValueError("grid times must be strictly increasing")
        times.flags.writeable = False
        object.__setattr__(self, "times", times)

    @classmethod
    def uniform(cls, t_max, dt, extra=()):
        """Grid ``0, dt, 2dt, ...`` up to ``t_max`` (included), merged with ``extra``."""
        if not dt > 0:
            raise ValueError(f"dt must be positive, got {dt}")
        if not t_max > 0:
            raise ValueError(f"t_max must be positive, got {t_max}")
        n = int(math.floor(t_max / dt + 1e-9))
        times = np.arange(n + 1) * dt
        return cls.from_points(np.concatenate([times, [t_max], np.asarray(extra, float)]), dt=dt)

    @classmethod
    def from_points(cls, points, dt=None):
        """Sorted union of ``points`` and 0; points closer than 1e-12 are merged."""
        pts = np.unique(np.concatenate([[0.0], np.asarray(points, dtype=float)]))
        keep = np.concatenate([[True], np.diff(pts) > 1e-12])
        return cls(pts[keep], dt)

    def index(self, t):
        """Index of grid time ``t`` (must be on the grid to within 1e-12)."""
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-12:
            raise ValueError(f"time {t} is not on the grid")
        return k

    def __len__(self):
        return self.times.size


@dataclass(frozen=True, eq=False)
class Path:
    grid: PathGrid
    values: np.ndarray
    pin: float


@dataclass(frozen=True)
class GaussianKernel:
    """Normal law; ``variance == 0`` is the point mass at ``mean``."""

    mean: float
    variance: float

    @property
    def is_point_mass(self):
        return self.variance == 0.0


def bridge_variance(r, t):
    """``t (r - t) / r`` for ``t < r``, else 0."""
    r = np.asarray(r, dtype=float)
    t = np.asarray(t, dtype=float)
    return np.where(t < r, t * np.maximum(r - t, 0.0) / r, 0.0)


def bridge_density(r, t, x):
    """Density of a length-``r`` bridge at time ``t``, evaluated at ``x``.

    Zero once ``t >= r``.  At ``t == 0`` the bridge sits at 0 with certainty
    and there is no density, so ``t <= 0`` raises ``ValueError``.
    """
    if not r > 0:
        raise ValueError(f"bridge length must be positive, got {r}")
    if not t > 0:
        raise ValueError("no density at t <= 0: the bridge starts at the point mass 0")
    x = np.asarray(x, dtype=float)
    if t >= r:
        out = np.zeros_like(x)
    else:
        var = t * (r - t) / r
        out = np.exp(-0.5 * x * x / var) / math.sqrt(2.0 * math.pi * var)
    return float(out) if out.ndim == 0 else out


def bridge_covariance(r, s, t):
    """``Cov(beta_s, beta_t) = s^t^r - (s^r)(t^r)/r``."""
    sr, tr = min(s, r), min(t, r)
    return min(s, t, r) - sr * tr / r


def transition_kernel(r, t, u, x):
    """Law of ``beta_u`` given ``beta_t = x`` for a bridge of length ``r``."""
    if not t < r:
        raise ValueError(f"bridge of length {r} is already absorbed at t={t}")
    if not u > t:
        raise ValueError(f"need u > t, got t={t}, u={u}")
    if u >= r:
        return GaussianKernel(0.0, 0.0)
    return GaussianKernel(x * (r - u) / (r - t), (r - u) * (u - t) / (r - t))


def simulate_bridges(pins, grid, rng):
    """Exact bridge values for each pin on the grid, shape ``(len(pins), len(grid))``.

    Draws ``len(pins) * (len(grid) - 1)`` standard normals from ``rng`` in
    row-major order.
    """
    pins = np.ascontiguousarray(pins, dtype=float)
    normals = rng.standard_normal((pins.size, len(grid) - 1))
    return _kernels.bridge_paths(pins, np.ascontiguousarray(grid.times), normals)


def simulate_bridge(r, grid, rng):
    """One exact bridge of length ``r`` sampled on ``grid``."""
    if not r > 0:
        raise ValueError(f"bridge length must be positive, got {r}")
    values = simulate_bridges(np.array([r]), grid, rng)[0]
    return Path(grid, values, float(r))


def stopped_bm_values(values, times, pins):
    """``B_t = beta_t + int_0^t beta_s / (r - s) ds`` for rows of bridge values.

    Trapezoid rule between grid times before the pin.  On the grid step that
    contains the pin, the bridge is taken linear from its last value down to
    0 at the pin, which makes the integrand constant there, so the step
    contributes exactly the last pre-pin value.  After the pin nothing
    accumulates.
    """
    values = np.atleast_2d(values)
    pins = np.asarray(pins, dtype=float).reshape(-1, 1)
    t = times[None, :]
    before = t < pins
    f = np.where(before, values / np.where(before, pins - t, 1.0), 0.0)
    dt = np.diff(times)[None, :]
    inner = before[:, 1:]
    straddle = before[:, :-1] & ~before[:, 1:]
    inc = np.where(inner, 0.5 * (f[:, 1:] + f[:, :-1]) * dt, 0.0)
    inc = np.where(straddle, values[:, :-1], inc)
    integral = np.zeros_like(values)
    integral[:, 1:] = np.cumsum(inc, axis=1)
    return values + integral


def stopped_bm_from_bridge(path):
    """Brownian motion stopped at the pin, rebuilt from a bridge path."""
    out = stopped_bm_values(path.values[None, :], path.grid.times, [path.pin])[0]
    return Path(path.grid, out, path.pin)
