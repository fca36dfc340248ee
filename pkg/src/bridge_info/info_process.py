"""The information process: a Brownian bridge pinned at a random default time.

Paths carry the realised default time alongside the values; detecting default
from a zero reading is only a diagnostic on a discrete grid.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .bridge_core import Path, PathGrid, simulate_bridges


@dataclass(frozen=True, eq=False)
class InfoPath:
    path: Path
    tau: float
    law: object

    @property
    def grid(self):
        return self.path.grid

    @property
    def values(self):
        return self.path.values


@dataclass(frozen=True, eq=False)
class InfoEnsemble:
    """``n`` paths on a shared grid: values ``(n, m)`` and default times ``(n,)``."""

    grid: PathGrid
    values: np.ndarray
    taus: np.ndarray
    law: object

    def __len__(self):
        return self.taus.size

    def path(self, i):
        return InfoPath(Path(self.grid, self.values[i], float(self.taus[i])), float(self.taus[i]), self.law)


@dataclass(frozen=True, eq=False)
class DecomposedPath:
    """``innovation = beta + drift_integral`` at every grid time."""

    beta: InfoPath
    drift_integral: np.ndarray
    innovation: np.ndarray


def simulate_ensemble(law, grid, n, rng):
    """Draw ``n`` default times, then ``n`` bridges pinned at them.

    The default times are drawn before any bridge noise, so they do not
    depend on the grid.
    """
    taus = np.atleast_1d(law.sample(rng, n)).astype(float)
    values = simulate_bridges(taus, grid, rng)
    return InfoEnsemble(grid, values, taus, law)


def simulate_info(law, grid, rng):
    return simulate_ensemble(law, grid, 1, rng).path(0)


def drift_Z(beta_val, tau, t):
    """``beta / (tau - t)`` before default, else 0."""
    beta_val = np.asarray(beta_val, dtype=float)
    alive = t < np.asarray(tau)
    out = np.where(alive, beta_val / np.where(alive, np.asarray(tau) - t, 1.0), 0.0)
    return float(out) if out.ndim == 0 else out


def decompose_values(values, projector):
    """``(drift_integral, innovation)`` for an ``(n, m)`` block of paths.

    The projected drift is accumulated with the trapezoid rule on the grid.
    """
    drift = projector.drift(values)
    integral = _kernels.cumulative_trapezoid(drift, projector.times)
    return integral, values + integral


def decompose(ip, projector):
    """Innovation path of ``ip`` using a projector built on the same grid and law."""
    if ip.law is not projector.law and ip.law != projector.law:
        raise ValueError("path and projector were built for different laws")
    if not np.array_equal(ip.grid.times, projector.times):
        raise ValueError("path and projector use different grids")
    integral, innovation = decompose_values(ip.values[None, :], projector)
    return DecomposedPath(ip, integral[0], innovation[0])


def quadratic_variation(ip):
    """Running sum of squared increments on the grid."""
    values = ip.values if isinstance(ip, InfoPath) else np.asarray(ip, dtype=float)
    if values.ndim == 1:
        return _kernels.running_square_sum(values[None, :])[0]
    return _kernels.running_square_sum(np.ascontiguousarray(values))


class DefaultCheck(str, enum.Enum):
    CONSISTENT = "consistent"
    SPURIOUS_ZERO = "spurious_zero"
    MISSED_DEFAULT = "missed_default"


def default_indicator_diagnostic(ip, t, zero_tol=1e-9):
    """Compare ``|beta_t| <= zero_tol`` with ``tau <= t`` at a grid time."""
    k = ip.grid.index(t)
    looks_dead = abs(ip.values[k]) <= zero_tol
    dead = ip.tau <= t
    if looks_dead == dead:
        return DefaultCheck.CONSISTENT
    return DefaultCheck.SPURIOUS_ZERO if looks_dead else DefaultCheck.MISSED_DEFAULT
