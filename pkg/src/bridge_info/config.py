"""Run configuration: a TOML file with law, grid, contract and Monte-Carlo blocks.

Example::

    seed = 20240611
    output_dir = "out"

    [law]
    kind = "exponential"
    rate = 1.0

    [grid]
    t_max = 2.0
    dt = 0.002

    [contract]
    maturity = 2.0
    kappa = 0.5
    recovery = [[0.0, 0.6], [2.0, 0.4]]   # or a single number
    discount_rate = 0.0

    [mc]
    n_paths = 100000
    bin_width = 0.01

Law kinds and their keys: ``exponential`` (rate), ``uniform`` (a, b),
``weibull`` (shape, scale), ``atoms`` (atoms = [[r, w], ...], optional
allow_dirac), ``empirical`` (knots = [[t, F], ...]).

The only environment override is ``BRIDGE_INFO_SEED``.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .bridge_core import PathGrid
from .cds_pricing import CdsContract, Recovery
from .default_law import DefaultLaw, law_from_params
from .errors import ConfigError, InvalidLaw

SEED_ENV = "BRIDGE_INFO_SEED"

_SECTIONS = {
    "law": None,
    "grid": {"t_max", "dt"},
    "contract": {"maturity", "kappa", "recovery", "discount_rate"},
    "mc": {"n_paths", "bin_width"},
}
_TOP = {"seed", "output_dir"}


@dataclass(frozen=True)
class GridSpec:
    t_max: float
    dt: float

    def grid(self, extra=()):
        return PathGrid.uniform(self.t_max, self.dt, extra)


@dataclass(frozen=True)
class McSettings:
    n_paths: int = 100_000
    bin_width: float = 0.01


@dataclass(frozen=True)
class RunConfig:
    law: DefaultLaw
    grid: GridSpec
    contract: CdsContract
    mc: McSettings
    seed: int
    output_dir: Path
    source: str = "<memory>"


def _line_of(text, section, key=None):
    """Best-effort line number of ``key`` inside ``[section]`` (or of the header)."""
    lines = text.splitlines()
    current = None
    header = None
    for i, line in enumerate(lines, 1):
        stripped = line.strip()
        m = re.match(r"\[([^\]]+)\]", stripped)
        if m:
            current = m.group(1).strip()
            if current == section or (section is None and current == key):
                header = header or i
            continue
        if key is not None and current == section and re.match(rf"{re.escape(key)}\s*=", stripped):
            return i
    return header


def _number(value, what, kind=float):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"{what} must be a number, got {value!r}")
    if kind is int:
        if isinstance(value, float) and not value.is_integer():
            raise ValueError(f"{what} must be an integer, got {value!r}")
        return int(value)
    return float(value)


def parse_config(text, source="<string>", env=None):
    """Parse and validate configuration text; raises ``ConfigError``."""
    env = os.environ if env is None else env
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"syntax error: {exc}", int(m.group(1)) if m else None, source) from None

    def fail(msg, section=None, key=None):
        line = _line_of(text, section, key) if section else None
        if section is None and key is not None:
            line = _line_of(text, None, key)
        raise ConfigError(msg, line, source)

    for key in data:
        if key not in _TOP and key not in _SECTIONS:
            fail(f"unknown key or section {key!r}", None, key)
        if key in _SECTIONS and not isinstance(data[key], dict):
            fail(f"{key!r} must be a table", None, key)
    for section, allowed in _SECTIONS.items():
        if allowed is None:
            continue
        for key in data.get(section, {}):
            if key not in allowed:
                fail(f"unknown key {key!r} in [{section}]", section, key)

    if "law" not in data:
        raise ConfigError("missing [law] block", None, source)
    try:
        law = law_from_params(data["law"])
    except KeyError as exc:
        key = None
        m = re.search(r"\[?'([^']+)'", str(exc))
        if m:
            key = m.group(1)
        fail(exc.args[0], "law", key if key and key in data["law"] else "kind")
    except (InvalidLaw, TypeError, ValueError, IndexError) as exc:
        fail(f"invalid law: {exc}", "law")

    g = data.get("grid", {})
    try:
        t_max = _number(g.get("t_max", 2.0), "t_max")
        dt = _number(g.get("dt", 0.002), "dt")
    except ValueError as exc:
        fail(str(exc), "grid")
    if not t_max > 0:
        fail(f"t_max must be positive, got {t_max}", "grid", "t_max")
    if not dt > 0:
        fail(f"dt must be positive, got {dt}", "grid", "dt")
    if dt > t_max:
        fail(f"dt={dt} exceeds t_max={t_max}", "grid", "dt")

    c = data.get("contract", {})
    try:
        rec = c.get("recovery", 0.4)
        recovery = Recovery.constant(_number(rec, "recovery")) if not isinstance(rec, list) \
            else Recovery(tuple(tuple(p) for p in rec))
        contract = CdsContract(
            _number(c.get("maturity", 2.0), "maturity"),
            _number(c.get("kappa", 0.0), "kappa"),
            recovery,
            _number(c.get("discount_rate", 0.0), "discount_rate"),
        )
    except (TypeError, ValueError) as exc:
        fail(f"invalid contract: {exc}", "contract")

    m = data.get("mc", {})
    try:
        mc = McSettings(_number(m.get("n_paths", 100_000), "n_paths", int),
                        _number(m.get("bin_width", 0.01), "bin_width"))
    except ValueError as exc:
        fail(str(exc), "mc")
    if mc.n_paths < 1:
        fail("n_paths must be at least 1", "mc", "n_paths")
    if not mc.bin_width > 0:
        fail("bin_width must be positive", "mc", "bin_width")

    seed = data.get("seed", 0)
    if SEED_ENV in env and env[SEED_ENV].strip():
        try:
            seed = int(env[SEED_ENV])
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {env[SEED_ENV]!r}") from None
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        fail(f"seed must be a nonnegative integer, got {seed!r}", None, "seed")
    out = data.get("output_dir", "out")
    if not isinstance(out, str):
        fail("output_dir must be a string", None, "output_dir")
    return RunConfig(law, GridSpec(t_max, dt), contract, mc, seed, Path(out), source)


def load_config(path=None, env=None):
    """Read a config file, or the shipped default when ``path`` is None."""
    if path is None:
        text = resources.files("bridge_info").joinpath("data/default.toml").read_text()
        return parse_config(text, "<default config>", env)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, str(path)) from None
    return parse_config(text, str(path), env)
