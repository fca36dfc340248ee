"""Brute-force Monte-Carlo checks of the closed-form results.

Random streams: every check derives its own ``numpy.random.SeedSequence``
from the master seed and a CRC32 of the check name, and spawns one child per
chunk of ``CHUNK_PATHS`` paths.  Each chunk draws its default times first,
then the bridge normals.  Results therefore depend only on the master seed,
the configuration and the kernel backend, and statistics are reduced in
path order.

Pass rule: ``|estimate - target| <= 3 * std_error`` unless a check states
its own tolerance.
"""

from __future__ import annotations

import csv
import math
import time
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bayes_filter import (
    DriftProjector,
    Observation,
    PosteriorCurve,
    VectorPosterior,
    conditional_cdf,
)
from .bridge_core import PathGrid, bridge_covariance, simulate_bridges
from .cds_pricing import CdsContract, fair_spread, price_discounted
from .default_law import DiscreteAtoms, Exponential, UniformInterval, integrate_dF
from .errors import EmptyBin
from .info_process import decompose_values, quadratic_variation

CHUNK_PATHS = 5000
MIN_BIN = 100
N_SIGMA = 3.0
BASE_PATHS = 100_000
BONFERRONI_THRESHOLD = 20


@dataclass(frozen=True)
class McConfig:
    n_paths: int
    grid: PathGrid
    master_seed: int
    bin_width: float = 0.01

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValueError("n_paths must be at least 1")
        if not self.bin_width > 0:
            raise ValueError("bin_width must be positive")


@dataclass(frozen=True)
class McReport:
    name: str
    estimate: float
    std_error: float
    n_effective: int
    target: float
    tolerance: float
    passed: bool
    note: str = field(default="", compare=False)


def within(name, estimate, std_error, n, target, tolerance=None, note=""):
    """Report passing when ``|estimate - target| <= tolerance`` (default 3 s.e.)."""
    tol = N_SIGMA * std_error if tolerance is None else tolerance
    ok = bool(np.isfinite(estimate) and abs(estimate - target) <= tol)
    return McReport(name, float(estimate), float(std_error), int(n), float(target), float(tol), ok, note)


def insufficient(name, n, target, note=""):
    return McReport(name, math.nan, math.nan, int(n), float(target), math.nan, False,
                    note or f"insufficient sample ({n} < {MIN_BIN} paths in bin)")


# --------------------------------------------------------------------------
# random streams and simulation
# --------------------------------------------------------------------------

def seed_for(master_seed, name):
    """Independent seed sequence for the check called ``name``."""
    return np.random.SeedSequence(master_seed, spawn_key=(zlib.crc32(name.encode()),))


def chunked(n, seq, chunk=CHUNK_PATHS):
    """Yield ``(size, Generator)`` covering ``n`` paths in fixed-size chunks."""
    n_chunks = max(1, -(-n // chunk))
    for i, child in enumerate(seq.spawn(n_chunks)):
        size = min(chunk, n - i * chunk)
        if size > 0:
            yield size, np.random.default_rng(child)


def simulate_chunks(law, grid, n, seq, chunk=CHUNK_PATHS):
    """Yield ``(taus, values)`` blocks of jointly simulated default times and paths."""
    for size, rng in chunked(n, seq, chunk):
        taus = np.atleast_1d(law.sample(rng, size)).astype(float)
        yield taus, simulate_bridges(taus, grid, rng)


def sample_marginal(law, t, n, seq):
    """``(taus, beta_t)`` for ``n`` paths, simulated on the grid ``{0, t}``."""
    grid = PathGrid.from_points([t])
    taus, vals = zip(*simulate_chunks(law, grid, n, seq))
    return np.concatenate(taus), np.concatenate(vals)[:, -1]


def scaled(base, cfg_paths):
    """Path count for a check whose nominal size is ``base`` at 1e5 configured paths."""
    return max(2, int(round(base * cfg_paths / BASE_PATHS)))


# --------------------------------------------------------------------------
# estimators
# --------------------------------------------------------------------------

def _in_bin(beta, x, width):
    return (np.abs(beta - x) <= 0.5 * width) & (beta != 0.0)


def _binomial_se(k, n):
    # shrunk proportion keeps the error positive when k is 0 or n
    p = (k + 0.5) / (n + 1.0)
    return math.sqrt(p * (1 - p) / n)


def binned_posterior(law, cfg: McConfig, t, x_bin_center, u, name=None):
    """Relative frequency of ``tau <= u`` among paths with ``beta_t`` in the bin."""
    name = name or f"binned_posterior[t={t},x={x_bin_center},u={u}]"
    taus, beta = sample_marginal(law, t, cfg.n_paths, seed_for(cfg.master_seed, name))
    sel = _in_bin(beta, x_bin_center, cfg.bin_width)
    n = int(sel.sum())
    if n == 0:
        raise EmptyBin(f"no path has beta_{t} within {cfg.bin_width / 2} of {x_bin_center}")
    target = PosteriorCurve(law, Observation(t, x_bin_center)).cdf(u)
    if n < MIN_BIN:
        return insufficient(name, n, target)
    k = int((taus[sel] <= u).sum())
    return within(name, k / n, _binomial_se(k, n), n, target)


def ensemble_stats(innovation, qv, tau, t, name="ensemble", dt=None):
    """Martingale, variance and QV statistics of innovations at one time.

    ``innovation``, ``qv`` and ``tau`` are per-path arrays at time ``t``.  The
    targets ``E[t ^ tau]`` use the empirical default times when no law is
    available, so this also works for arbitrary ensembles.
    """
    b = np.asarray(innovation, dtype=float)
    q = np.asarray(qv, dtype=float)
    n = b.size
    stopped = np.minimum(t, np.asarray(tau, dtype=float))
    target = float(stopped.mean()) if n else 0.0
    sq = (b - b.mean()) ** 2
    out = [
        within(f"{name}:mean_b[t={t}]", b.mean(), b.std() / math.sqrt(n), n, 0.0),
        within(f"{name}:var_b[t={t}]", b.var(ddof=1) if n > 1 else 0.0,
               sq.std() / math.sqrt(n), n, target),
    ]
    # the grid sum of squares undershoots t ^ tau by O(dt log(1/dt)) near default
    allowance = 0.0 if dt is None else math.sqrt(dt)
    se_q = (q - stopped).std() / math.sqrt(n)
    out.append(within(f"{name}:mean_qv[t={t}]", q.mean(), se_q, n, target,
                      N_SIGMA * se_q + allowance))
    return out


def ensemble_stats_paths(paths, t):
    """``ensemble_stats`` for a collection of ``DecomposedPath`` on a common grid."""
    paths = list(paths)
    if not paths:
        return ensemble_stats(np.zeros(0), np.zeros(0), np.zeros(0), t)
    grid = paths[0].beta.grid
    k = grid.index(t)
    b = np.array([p.innovation[k] for p in paths])
    q = np.array([quadratic_variation(p.beta)[k] for p in paths])
    tau = np.array([p.beta.tau for p in paths])
    return ensemble_stats(b, q, tau, t)


def increment_correlation(x, y, name):
    """Correlation of two increment samples; tested through their covariance."""
    n = x.size
    xc, yc = x - x.mean(), y - y.mean()
    prod = xc * yc
    sd = x.std() * y.std()
    scale = sd if sd > 0 else 1.0
    return within(name, prod.mean() / scale, prod.std() / math.sqrt(n) / scale, n, 0.0)


# --------------------------------------------------------------------------
# acceptance checks
# --------------------------------------------------------------------------

def check_bridge_covariance(seed, n_cfg, budget=60.0):
    """Sample covariances of a length-1 bridge on ``{0.1, ..., 0.9}``."""
    n = scaled(200_000, n_cfg)
    times = np.round(np.arange(1, 10) * 0.1, 12)
    grid = PathGrid.from_points(times)
    start = time.perf_counter()
    seq = seed_for(seed, "bridge_covariance")
    vals = np.concatenate([simulate_bridges(np.ones(size), grid, rng)
                           for size, rng in chunked(n, seq)])[:, 1:]
    reports = []
    for i in range(9):
        for j in range(i, 9):
            prod = (vals[:, i] - vals[:, i].mean()) * (vals[:, j] - vals[:, j].mean())
            est, se = prod.mean(), prod.std() / math.sqrt(n)
            reports.append(within(f"bridge_cov[{times[i]:.1f},{times[j]:.1f}]", est, se, n,
                                  bridge_covariance(1.0, times[i], times[j])))
    elapsed = time.perf_counter() - start
    reports.append(within("bridge_cov_runtime_ok", float(elapsed < budget), 0.0, n, 1.0, 0.0,
                          note=f"{elapsed:.2f}s of {budget:.0f}s"))
    return reports


def check_default_mass(seed, n_cfg):
    """Frequency of an exact zero at ``t`` against ``F(t)`` for Exp(1)."""
    law = Exponential(1.0)
    n = scaled(100_000, n_cfg)
    times = [0.25, 0.5, 1.0]
    grid = PathGrid.from_points(times)
    chunks = list(simulate_chunks(law, grid, n, seed_for(seed, "default_mass")))
    vals = np.concatenate([v for _, v in chunks])
    out = []
    for k, t in enumerate(times, 1):
        p = float(law.cdf(t))
        est = float((vals[:, k] == 0.0).mean())
        out.append(within(f"default_mass[t={t}]", est, math.sqrt(p * (1 - p) / n), n, p))
    return out


BAYES_U_GRID = np.round(np.arange(0.5, 4.0 + 1e-9, 0.25), 12)
BAYES_X = (0.1, 0.2, 0.5)


def check_bayes_oracle(seed, n_cfg, bin_width, t=0.5, tolerance=0.02):
    """Sup-distance between binned empirical and closed-form posterior cdfs."""
    laws = {"exponential": Exponential(1.0), "two_atom": DiscreteAtoms((1.0, 2.0), (0.5, 0.5))}
    n = scaled(1_000_000, n_cfg)
    out = []
    for lname, law in laws.items():
        taus, beta = sample_marginal(law, t, n, seed_for(seed, f"bayes_oracle:{lname}"))
        for x in BAYES_X:
            name = f"bayes_sup[{lname},x={x}]"
            sel = _in_bin(beta, x, bin_width)
            m = int(sel.sum())
            if m < MIN_BIN:
                out.append(insufficient(name, m, 0.0))
                continue
            curve = PosteriorCurve(law, Observation(t, x))
            closed = np.array([curve.cdf(u) for u in BAYES_U_GRID])
            ts = np.sort(taus[sel])
            emp = np.searchsorted(ts, BAYES_U_GRID, side="right") / m
            se = max(_binomial_se(int(round(p * m)), m) for p in emp)
            out.append(within(name, float(np.max(np.abs(emp - closed))), se, m, 0.0, tolerance))
    return out


def two_atom_reference(t=0.5, x=0.3):
    """Posterior weight of ``r = 1`` for atoms ``{1, 2}`` by direct normal densities."""
    def dens(r):
        var = t * (r - t) / r
        return math.exp(-0.5 * x * x / var) / math.sqrt(2 * math.pi * var)

    a, b = 0.5 * dens(1.0), 0.5 * dens(2.0)
    return a / (a + b)


def check_two_atom(tolerance=1e-10):
    law = DiscreteAtoms((1.0, 2.0), (0.5, 0.5))
    curve = PosteriorCurve(law, Observation(0.5, 0.3))
    est = curve.density(1.0) * 0.5
    return [within("two_atom_weight", est, 0.0, 1, two_atom_reference(), tolerance)]


def check_innovation(seed, n_cfg, dt, t_points=(0.5, 1.0, 2.0)):
    """Mean, variance and increment correlations of the innovation process for Exp(1)."""
    law = Exponential(1.0)
    n = scaled(100_000, n_cfg)
    grid = PathGrid.uniform(max(t_points), dt, extra=t_points)
    cols = [grid.index(t) for t in t_points]
    projector = DriftProjector(law, grid.times)
    blocks, taus = [], []
    for tau, vals in simulate_chunks(law, grid, n, seed_for(seed, "innovation")):
        _, b = decompose_values(vals, projector)
        blocks.append(b[:, cols])
        taus.append(tau)
    b = np.concatenate(blocks)
    out = []
    for j, t in enumerate(t_points):
        target = integrate_dF(law, lambda r, t=t: np.minimum(r, t))
        col = b[:, j]
        sq = (col - col.mean()) ** 2
        out.append(within(f"innovation_mean[t={t}]", col.mean(), col.std() / math.sqrt(n), n, 0.0))
        out.append(within(f"innovation_var[t={t}]", col.var(ddof=1), sq.std() / math.sqrt(n), n, target))
    inc = np.diff(np.concatenate([np.zeros((n, 1)), b], axis=1), axis=1)
    names = [f"({a},{c}]" for a, c in zip((0.0,) + tuple(t_points[:-1]), t_points)]
    for i in range(len(t_points)):
        for j in range(i + 1, len(t_points)):
            out.append(increment_correlation(inc[:, i], inc[:, j],
                                             f"innovation_corr[{names[i]},{names[j]}]"))
    return out


def check_quadratic_variation(seed, n_cfg, dt=1e-4, tolerance=0.01):
    """Ensemble-mean quadratic variation of a length-1 bridge at 0.5 and 2."""
    law = DiscreteAtoms((1.0,), (1.0,), allow_dirac=True)
    n = scaled(2_000, n_cfg)
    grid = PathGrid.uniform(2.0, dt, extra=(0.5,))
    cols = [grid.index(0.5), grid.index(2.0)]
    qv = np.concatenate([
        quadratic_variation(vals)[:, cols]
        for _, vals in simulate_chunks(law, grid, n, seed_for(seed, "quadratic_variation"), chunk=250)
    ])
    se = qv.std(axis=0) / math.sqrt(n)
    return [within(f"qv_mean[t={t}]", qv[:, j].mean(), se[j], n, min(t, 1.0), tolerance)
            for j, t in enumerate((0.5, 2.0))]


def realised_cash_flow(taus, contract, t):
    """Per-path discounted CDS cash flow seen from ``t`` for paths alive at ``t``."""
    T, rd, kappa = contract.maturity, contract.discount_rate, contract.kappa
    end = np.minimum(taus, T)
    disc = np.exp(-rd * (taus - t))
    prot = np.where(taus <= T, disc * contract.recovery(taus), 0.0)
    accrual = end - t if rd == 0 else -np.expm1(-rd * (end - t)) / rd
    return prot - kappa * accrual


def check_pricing(seed, n_cfg, law, contract, bin_width, t=0.5, x=0.2):
    out = []
    zero = Observation(0.0)
    ph = price_discounted(law, contract, zero, "H").price
    pb = price_discounted(law, contract, zero, "F_beta").price
    out.append(within("price_t0_filtrations_agree", pb, 0.0, 1, ph, 1e-8))

    lam = 1.0
    flat = CdsContract(contract.maturity, 0.0, 1.0)
    out.append(within("exponential_fair_spread", fair_spread(Exponential(lam), flat, zero, "H"),
                      0.0, 1, lam, 1e-10))

    obs = Observation(t, x)
    worst = 0.0
    for mode in ("H", "F_beta"):
        k = fair_spread(law, contract, obs, mode)
        worst = max(worst, abs(price_discounted(law, contract.with_kappa(k), obs, mode).price))
    out.append(within("repricing_at_fair_spread", worst, 0.0, 1, 0.0, 1e-10))

    n = scaled(100_000, n_cfg)
    taus, beta = sample_marginal(law, t, n, seed_for(seed, "pricing_cash_flows"))
    sel = _in_bin(beta, x, bin_width) & (taus > t)
    m = int(sel.sum())
    target = price_discounted(law, contract, obs, "F_beta").price
    name = f"mc_price_beta[t={t},x={x}]"
    if m < MIN_BIN:
        out.append(insufficient(name, m, target))
    else:
        flows = realised_cash_flow(taus[sel], contract, t)
        out.append(within(name, flows.mean(), flows.std(ddof=1) / math.sqrt(m), m, target))
    return out


def check_posterior_martingale(seed, n_cfg, law, pairs=((0.5, 1.0), (1.0, 2.0))):
    """Average of ``P(tau <= u | beta_t)`` over simulated ``beta_t`` against ``F(u)``."""
    n = scaled(100_000, n_cfg)
    out = []
    for t, u in pairs:
        taus, beta = sample_marginal(law, t, n, seed_for(seed, f"posterior_martingale[{t},{u}]"))
        alive = taus > t
        vals = np.ones(n)  # default by t implies default by u > t
        if alive.any():
            vals[alive] = VectorPosterior(law, t, cuts=(u,)).cdf(beta[alive])[0]
        out.append(within(f"posterior_martingale[t={t},u={u}]", vals.mean(),
                          vals.std(ddof=1) / math.sqrt(n), n, float(law.cdf(u))))
    return out


SMALL_TIMES = (0.1, 0.05, 0.01, 0.001)


def check_small_time_density(seed, n_cfg, r=1.0, tolerance=0.05):
    """Path-averaged ``|phi_t(r, beta_t) - 1|`` as ``t`` decreases to 0.001."""
    law = UniformInterval(0.5, 3.0)
    n = scaled(2_000, n_cfg)
    grid = PathGrid.from_points(SMALL_TIMES)
    vals = np.concatenate([v for _, v in simulate_chunks(law, grid, n, seed_for(seed, "small_time_density"))])
    means, out = [], []
    for t in SMALL_TIMES:
        dev = np.abs(VectorPosterior(law, t).density(vals[:, grid.index(t)], r) - 1.0)
        means.append(dev.mean())
        if t == SMALL_TIMES[-1]:
            out.append(within(f"small_time_density[t={t}]", dev.mean(), dev.std() / math.sqrt(n),
                              n, 0.0, tolerance))
    rises = int(np.sum(np.diff(means) > 0))
    out.append(within("small_time_density_monotone", rises, 0.0, n, 0.0, 0.0,
                      note=" ".join(f"{m:.3g}" for m in means)))
    return out


def check_nonhomogeneity(x=0.2, threshold=1e-9):
    """Largest difference between conditional cdfs over two equal-length horizons."""
    law = Exponential(1.0)
    ys = np.linspace(-1.0, 1.0, 21)
    a = np.array([conditional_cdf(law, Observation(0.2, x), 0.4, y) for y in ys])
    b = np.array([conditional_cdf(law, Observation(0.6, x), 0.8, y) for y in ys])
    diff = float(np.max(np.abs(a - b)))
    return [McReport("nonhomogeneity_max_cdf_gap", diff, 0.0, 1, threshold, 0.0, diff > threshold,
                     note="passes when the estimate exceeds the target")]


# --------------------------------------------------------------------------
# suite driver
# --------------------------------------------------------------------------

CRITERIA = (
    "bridge_covariance",
    "default_mass",
    "bayes_oracle",
    "two_atom",
    "innovation",
    "quadratic_variation",
    "pricing",
    "posterior_martingale",
    "small_time_density",
    "nonhomogeneity",
)


def run_criterion(name, cfg):
    """Run one acceptance criterion against a ``RunConfig``."""
    seed, n = cfg.seed, cfg.mc.n_paths
    if name == "bridge_covariance":
        return check_bridge_covariance(seed, n)
    if name == "default_mass":
        return check_default_mass(seed, n)
    if name == "bayes_oracle":
        return check_bayes_oracle(seed, n, cfg.mc.bin_width)
    if name == "two_atom":
        return check_two_atom()
    if name == "innovation":
        return check_innovation(seed, n, cfg.grid.dt)
    if name == "quadratic_variation":
        return check_quadratic_variation(seed, n)
    if name == "pricing":
        return check_pricing(seed, n, cfg.law, cfg.contract, cfg.mc.bin_width)
    if name == "posterior_martingale":
        return check_posterior_martingale(seed, n, cfg.law)
    if name == "small_time_density":
        return check_small_time_density(seed, n)
    if name == "nonhomogeneity":
        return check_nonhomogeneity()
    raise KeyError(f"unknown criterion {name!r}")


REPORT_COLUMNS = ("check", "estimate", "std_error", "target", "tolerance", "pass")


def write_report(reports, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in reports:
            w.writerow([r.name, f"{r.estimate:.17g}", f"{r.std_error:.17g}", f"{r.target:.17g}",
                        f"{r.tolerance:.17g}", "true" if r.passed else "false"])
        if len(reports) > BONFERRONI_THRESHOLD:
            n_se = sum(1 for r in reports if r.std_error > 0)
            fh.write(f"# note: {len(reports)} checks, {n_se} of them at {N_SIGMA:g} standard errors; "
                     f"about {n_se * 0.0027:.2f} false alarms expected under independence "
                     f"(Bonferroni per-check level for 5% family-wise: {0.05 / len(reports):.2g})\n")
    return path


def run_acceptance_suite(config, report_path=None, criteria=CRITERIA, log=None):
    """Run the criteria; return ``(exit_status, reports)`` (status 0 iff all pass).

    ``config`` is a ``RunConfig`` or a path to a config file.
    """
    from .config import RunConfig, load_config

    cfg = config if isinstance(config, RunConfig) else load_config(config)
    reports = []
    for name in criteria:
        start = time.perf_counter()
        rows = run_criterion(name, cfg)
        reports.extend(rows)
        if log is not None:
            bad = sum(not r.passed for r in rows)
            log(f"{name}: {len(rows) - bad}/{len(rows)} pass ({time.perf_counter() - start:.1f}s)")
    if report_path is not None:
        write_report(reports, report_path)
    return (0 if all(r.passed for r in reports) else 1), reports
