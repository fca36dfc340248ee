"""Inner loops shared by the simulators and the filter.

Every kernel exists twice: a pure-numpy version (``*_numpy``) and a numba
``@njit`` version (``*_numba``).  The public names bind to the numba variant
unless numba is missing or ``BRIDGE_INFO_NUMBA`` is set to ``0``/``false``/
``off`` before import.
"""

import math
import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    numba = None


def _numba_requested():
    flag = os.environ.get("BRIDGE_INFO_NUMBA", "1").strip().lower()
    return flag not in {"0", "false", "no", "off"}


USE_NUMBA = numba is not None and _numba_requested()

# rows of the (x, node) matrix processed at once by the numpy fallback
_CHUNK_CELLS = 2_000_000


# --------------------------------------------------------------------------
# exact bridge transitions
# --------------------------------------------------------------------------

def bridge_paths_numpy(pins, times, normals):
    """Sequential exact Gaussian transitions of bridges pinned at ``pins``.

    ``normals`` has shape ``(n, len(times) - 1)``; column ``k`` drives the move
    from ``times[k]`` to ``times[k + 1]``.
    """
    n = pins.shape[0]
    m = times.shape[0]
    out = np.zeros((n, m))
    x = np.zeros(n)
    for k in range(1, m):
        t = times[k - 1]
        u = times[k]
        alive = pins > u
        rt = np.where(alive, pins - t, 1.0)
        ru = np.where(alive, pins - u, 0.0)
        mean = x * ru / rt
        var = ru * (u - t) / rt
        x = np.where(alive, mean + np.sqrt(var) * normals[:, k - 1], 0.0)
        out[:, k] = x
    return out


def _bridge_paths_loop(pins, times, normals):
    n = pins.shape[0]
    m = times.shape[0]
    out = np.zeros((n, m))
    for i in range(n):
        r = pins[i]
        x = 0.0
        for k in range(1, m):
            t = times[k - 1]
            u = times[k]
            if r > u:
                rt = r - t
                ru = r - u
                mean = x * ru / rt
                var = ru * (u - t) / rt
                x = mean + math.sqrt(var) * normals[i, k - 1]
            else:
                x = 0.0
            out[i, k] = x
    return out


# --------------------------------------------------------------------------
# posterior ratios over a fixed Stieltjes rule
# --------------------------------------------------------------------------

def posterior_ratios_numpy(xs, base, inv, aux):
    """Normalised posterior averages for many observations.

    For each ``x`` the unnormalised log weight of node ``j`` is
    ``base[j] - x**2 * inv[j]``.  Returns ``(ratios, log_norm)`` where
    ``ratios[k, i] = sum_j aux[k, j] w_ij / sum_j w_ij`` and ``log_norm[i]`` is
    the log of ``sum_j w_ij``.
    """
    n = xs.shape[0]
    nk = aux.shape[0]
    nj = base.shape[0]
    ratios = np.empty((nk, n))
    log_norm = np.empty(n)
    step = max(1, _CHUNK_CELLS // max(nj, 1))
    for lo in range(0, n, step):
        hi = min(n, lo + step)
        x2 = xs[lo:hi, None] ** 2
        lw = base[None, :] - x2 * inv[None, :]
        top = lw.max(axis=1)
        w = np.exp(lw - top[:, None])
        den = w.sum(axis=1)
        ratios[:, lo:hi] = (w @ aux.T).T / den
        log_norm[lo:hi] = top + np.log(den)
    return ratios, log_norm


def _posterior_ratios_loop(xs, base, inv, aux):
    n = xs.shape[0]
    nk = aux.shape[0]
    nj = base.shape[0]
    ratios = np.empty((nk, n))
    log_norm = np.empty(n)
    num = np.empty(nk)
    for i in range(n):
        x2 = xs[i] * xs[i]
        top = -np.inf
        for j in range(nj):
            v = base[j] - x2 * inv[j]
            if v > top:
                top = v
        den = 0.0
        for k in range(nk):
            num[k] = 0.0
        for j in range(nj):
            w = math.exp(base[j] - x2 * inv[j] - top)
            den += w
            for k in range(nk):
                num[k] += aux[k, j] * w
        for k in range(nk):
            ratios[k, i] = num[k] / den
        log_norm[i] = top + math.log(den)
    return ratios, log_norm


# --------------------------------------------------------------------------
# path functionals
# --------------------------------------------------------------------------

def cumulative_trapezoid_numpy(values, times):
    """Running trapezoid integral along axis 1, starting from 0."""
    dt = np.diff(times)
    out = np.zeros_like(values)
    out[:, 1:] = np.cumsum(0.5 * (values[:, 1:] + values[:, :-1]) * dt, axis=1)
    return out


def _cumulative_trapezoid_loop(values, times):
    n, m = values.shape
    out = np.zeros((n, m))
    for i in range(n):
        acc = 0.0
        for k in range(1, m):
            acc += 0.5 * (values[i, k] + values[i, k - 1]) * (times[k] - times[k - 1])
            out[i, k] = acc
    return out


def running_square_sum_numpy(values):
    """Running sum of squared increments along axis 1."""
    out = np.zeros_like(values)
    out[:, 1:] = np.cumsum(np.diff(values, axis=1) ** 2, axis=1)
    return out


def _running_square_sum_loop(values):
    n, m = values.shape
    out = np.zeros((n, m))
    for i in range(n):
        acc = 0.0
        for k in range(1, m):
            d = values[i, k] - values[i, k - 1]
            acc += d * d
            out[i, k] = acc
    return out


def table_drift_numpy(values, scale, u_grid, tables):
    """Odd extension of a tabulated drift: ``sign(x) * g_k(|x| / scale_k)``.

    ``tables[k]`` holds ``g_k`` on ``u_grid`` for grid column ``k``; values
    outside the table are clamped to its end points.
    """
    out = np.zeros_like(values)
    for k in range(values.shape[1]):
        if scale[k] <= 0.0:
            continue
        col = values[:, k]
        out[:, k] = np.sign(col) * np.interp(np.abs(col) / scale[k], u_grid, tables[k])
    return out


def _table_drift_loop(values, scale, u_grid, tables):
    n, m = values.shape
    out = np.zeros((n, m))
    for k in range(m):
        if scale[k] <= 0.0:
            continue
        col = values[:, k]
        g = np.interp(np.abs(col) / scale[k], u_grid, tables[k])
        for i in range(n):
            out[i, k] = np.sign(col[i]) * g[i]
    return out


if numba is not None:
    _jit = numba.njit(cache=True)
    bridge_paths_numba = _jit(_bridge_paths_loop)
    posterior_ratios_numba = _jit(_posterior_ratios_loop)
    cumulative_trapezoid_numba = _jit(_cumulative_trapezoid_loop)
    running_square_sum_numba = _jit(_running_square_sum_loop)
    table_drift_numba = _jit(_table_drift_loop)
else:  # pragma: no cover
    bridge_paths_numba = None
    posterior_ratios_numba = None
    cumulative_trapezoid_numba = None
    running_square_sum_numba = None
    table_drift_numba = None


if USE_NUMBA:
    bridge_paths = bridge_paths_numba
    posterior_ratios = posterior_ratios_numba
    cumulative_trapezoid = cumulative_trapezoid_numba
    running_square_sum = running_square_sum_numba
    table_drift = table_drift_numba
else:
    bridge_paths = bridge_paths_numpy
    posterior_ratios = posterior_ratios_numpy
    cumulative_trapezoid = cumulative_trapezoid_numpy
    running_square_sum = running_square_sum_numpy
    table_drift = table_drift_numpy


def backend():
    """Name of the active kernel backend."""
    return "numba" if USE_NUMBA else "numpy"
