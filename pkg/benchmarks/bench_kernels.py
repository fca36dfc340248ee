"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--paths 20000] [--repeat 3]

Each kernel is run once to warm up (numba compilation, caches), then the
best of ``--repeat`` runs is reported.  Outputs of the two backends are
compared as a sanity check.
"""

import argparse
import time

import numpy as np

from bridge_info import _kernels
from bridge_info.bayes_filter import DriftProjector, VectorPosterior
from bridge_info.default_law import Exponential


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def cases(n_paths):
    rng = np.random.default_rng(0)
    law = Exponential(1.0)
    times = np.linspace(0.0, 2.0, 401)
    pins = law.sample(rng, n_paths)
    normals = rng.standard_normal((n_paths, times.size - 1))
    paths = _kernels.bridge_paths_numpy(pins, times, normals)
    vp = VectorPosterior(law, 0.5, cuts=(1.0,))
    aux = np.stack([(vp.segment == 0).astype(float), 1.0 / vp.rule.gaps])
    xs = paths[:, 100]
    proj = DriftProjector(law, times)
    return {
        "bridge_paths": (lambda k: k(pins, times, normals), "bridge_paths"),
        "posterior_ratios": (lambda k: k(xs, vp.base, vp.inv, aux), "posterior_ratios"),
        "cumulative_trapezoid": (lambda k: k(paths, times), "cumulative_trapezoid"),
        "running_square_sum": (lambda k: k(paths), "running_square_sum"),
        "table_drift": (lambda k: k(paths, proj.scale, proj.u_grid, proj.tables), "table_drift"),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if _kernels.bridge_paths_numba is None:
        raise SystemExit("numba is not installed")

    print(f"{'kernel':<22}{'numpy [s]':>12}{'numba [s]':>12}{'speedup':>10}{'max rel diff':>14}")
    for name, (call, attr) in cases(args.paths).items():
        k_np = getattr(_kernels, f"{attr}_numpy")
        k_nb = getattr(_kernels, f"{attr}_numba")
        t_np = best_of(lambda: call(k_np), args.repeat)
        t_nb = best_of(lambda: call(k_nb), args.repeat)
        a, b = call(k_np), call(k_nb)
        if isinstance(a, tuple):
            a, b = np.concatenate([np.ravel(v) for v in a]), np.concatenate([np.ravel(v) for v in b])
        diff = float(np.max(np.abs(a - b) / np.maximum(np.abs(a), 1.0)))
        print(f"{name:<22}{t_np:>12.4f}{t_nb:>12.4f}{t_np / t_nb:>10.1f}{diff:>14.2e}")


if __name__ == "__main__":
    main()
