"""Command-line front end: ``bridge-info <command> [options]``.

Exit status: 0 success, 1 domain error (or failed verification), 2 config or
usage error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
from pathlib import Path

import numpy as np

from .bayes_filter import (
    DriftProjector,
    Observation,
    PosteriorCurve,
    conditional_mean,
    conditional_second_moment,
)
from .cds_pricing import fair_spread, price_discounted
from .config import SEED_ENV, load_config
from .errors import BridgeInfoError, ConfigError, DefaultedNeedsTau
from .info_process import decompose, quadratic_variation, simulate_info

N_CURVE_POINTS = 401


def _fmt(v):
    return format(float(v), ".17g")


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([r if isinstance(r, (str, int)) and not isinstance(r, bool) else _fmt(r)
                        for r in row])
    return path


def _observation(args):
    return Observation(args.t, args.x)


def _out_dir(args, cfg):
    return Path(args.out) if args.out is not None else cfg.output_dir


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_simulate(args, cfg):
    out = _out_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    grid = cfg.grid.grid()
    projector = DriftProjector(cfg.law, grid.times) if args.n > 0 else None
    header = ["t", "beta", "b", "qv", "tau"]
    manifest = {"master_seed": cfg.seed, "law": cfg.law.params(), "t_max": cfg.grid.t_max,
                "dt": cfg.grid.dt, "seeding": "SeedSequence(master_seed, spawn_key=(path_id,))",
                "format": args.format, "paths": []}
    long_rows = []
    for i in range(args.n):
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(i,)))
        ip = simulate_info(cfg.law, grid, rng)
        dec = decompose(ip, projector)
        qv = quadratic_variation(ip)
        rows = [(t, v, b, q, ip.tau) for t, v, b, q in zip(grid.times, ip.values, dec.innovation, qv)]
        entry = {"path_id": i, "spawn_key": [i], "tau": ip.tau}
        if args.format == "long":
            long_rows.extend((i,) + row for row in rows)
        else:
            name = f"path_{i:05d}.csv"
            write_csv(out / name, header, rows)
            entry["file"] = name
        manifest["paths"].append(entry)
    if args.format == "long" and args.n > 0:
        write_csv(out / "paths.csv", ["path_id"] + header, long_rows)
        manifest["file"] = "paths.csv"
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(f"wrote {args.n} path(s) and manifest.json to {out}")
    return 0


def _u_grid(args, cfg, start=0.0):
    u_max = args.u_max if args.u_max is not None else 50.0 * cfg.law.mean()
    if not u_max > start:
        raise ValueError(f"--u-max={u_max} must exceed {start}")
    return np.linspace(start, u_max, N_CURVE_POINTS)


def cmd_posterior(args, cfg):
    obs = _observation(args)
    curve = PosteriorCurve(cfg.law, obs)
    curve._require_alive()
    us = _u_grid(args, cfg)
    cdf = curve.cdf_grid(us)
    out = _out_dir(args, cfg)
    p1 = write_csv(out / "posterior.csv", ["u", "posterior_cdf"], zip(us, cdf))
    locs, _ = cfg.law.atoms()
    rs = np.unique(np.concatenate([us[us > obs.t], locs[(locs > obs.t) & (locs <= us[-1])]]))
    p2 = write_csv(out / "posterior_weights.csv", ["r", "phi"], zip(rs, curve.density(rs)))
    print(f"wrote {p1} and {p2}")
    return 0


def cmd_predict(args, cfg):
    obs = _observation(args)
    if obs.defaulted:
        raise DefaultedNeedsTau("after default the process stays at 0: nothing to predict")
    curve = PosteriorCurve(cfg.law, obs)
    us = _u_grid(args, cfg, obs.t)[1:]
    rows = [(u, conditional_mean(cfg.law, obs, u), conditional_second_moment(cfg.law, obs, u),
             curve.cdf(u)) for u in us]
    path = write_csv(_out_dir(args, cfg) / "predict.csv",
                     ["u", "mean", "second_moment", "zero_mass"], rows)
    print(f"wrote {path}")
    return 0


PRICE_HEADER = ["t", "x", "price_H", "price_beta", "spread_H", "spread_beta"]


def _price_row(cfg, obs):
    if obs.defaulted:
        return [obs.t, obs.x, 0.0, 0.0, math.nan, math.nan]
    law, c = cfg.law, cfg.contract
    return [obs.t, obs.x,
            price_discounted(law, c, obs, "H").price,
            price_discounted(law, c, obs, "F_beta").price,
            fair_spread(law, c, obs, "H"),
            fair_spread(law, c, obs, "F_beta")]


def _cmd_quote(args, cfg, name):
    row = _price_row(cfg, _observation(args))
    path = write_csv(_out_dir(args, cfg) / f"{name}.csv", PRICE_HEADER, [row])
    print(",".join(PRICE_HEADER))
    print(",".join(_fmt(v) for v in row))
    print(f"wrote {path}")
    return 0


def cmd_price(args, cfg):
    return _cmd_quote(args, cfg, "price")


def cmd_spread(args, cfg):
    return _cmd_quote(args, cfg, "spread")


def cmd_verify(args, cfg):
    from .mc_oracle import run_acceptance_suite

    report = _out_dir(args, cfg) / "report.csv"
    status, reports = run_acceptance_suite(cfg, report, log=print)
    failed = [r.name for r in reports if not r.passed]
    print(f"{len(reports) - len(failed)}/{len(reports)} checks passed; report: {report}")
    for name in failed:
        print(f"FAILED {name}")
    return status


COMMANDS = {
    "simulate": (cmd_simulate, "simulate information-process paths with innovation and QV columns"),
    "posterior": (cmd_posterior, "posterior cdf of the default time given beta_t = x"),
    "predict": (cmd_predict, "conditional mean, second moment and zero mass of beta_u"),
    "price": (cmd_price, "CDS prices and fair spreads under both information sets"),
    "spread": (cmd_spread, "same row as price, written to spread.csv"),
    "verify": (cmd_verify, "run the acceptance suite and write report.csv"),
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML config file (default: the shipped config)")
    common.add_argument("--seed", type=int,
                        help=f"master seed; overrides {SEED_ENV} and the config value")
    common.add_argument("--out", help="output directory (default: output_dir from the config)")
    parser = argparse.ArgumentParser(
        prog="bridge-info",
        description="Information-process default model: simulation, filtering, CDS pricing, verification.",
        epilog="Exit status: 0 ok, 1 domain error or failed verification, 2 config/usage error.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name, (_, helptext) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=helptext, description=helptext)
        if name in ("posterior", "predict", "price", "spread"):
            p.add_argument("--t", type=float, default=0.0, help="observation time (default 0)")
            p.add_argument("--x", type=float, default=0.0,
                           help="observed beta_t; 0 with t > 0 means default has occurred")
        if name in ("posterior", "predict"):
            p.add_argument("--u-max", type=float, default=None,
                           help="end of the u grid (default 50 times the mean default time)")
        if name == "simulate":
            p.add_argument("--n", type=int, default=1, help="number of paths (default 1)")
            p.add_argument("--format", choices=("per-path", "long"), default="per-path",
                           help="one CSV per path, or a single long CSV with path_id")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError(f"--seed must be nonnegative, got {args.seed}")
            cfg = dataclasses.replace(cfg, seed=args.seed)
        if getattr(args, "n", 0) < 0:
            raise ConfigError(f"--n must be nonnegative, got {args.n}")
        return COMMANDS[args.command][0](args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DefaultedNeedsTau as exc:
        print(f"defaulted branch: {exc}; a single observation does not reveal when "
              "default happened", file=sys.stderr)
        return 1
    except (BridgeInfoError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        where = f" ({exc.filename})" if exc.filename else ""
        print(f"I/O error{where}: {exc.strerror or exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
