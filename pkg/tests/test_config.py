import pytest

from bridge_info.cds_pricing import Recovery
from bridge_info.config import SEED_ENV, load_config, parse_config
from bridge_info.default_law import DiscreteAtoms, Exponential, PiecewiseEmpirical
from bridge_info.errors import ConfigError

BASE = """seed = 3

[law]
kind = "exponential"
rate = 2.0

[grid]
t_max = 1.0
dt = 0.01
"""


def test_shipped_config():
    cfg = load_config(env={})
    assert cfg.law == Exponential(1.0)
    assert cfg.mc.n_paths == 100_000 and cfg.mc.bin_width == 0.01
    assert cfg.grid.dt == 0.002 and cfg.contract.maturity == 2.0
    assert cfg.contract.recovery == Recovery(((0.0, 0.6), (2.0, 0.4)))


def test_defaults_and_seed():
    cfg = parse_config(BASE, env={})
    assert cfg.seed == 3 and cfg.law == Exponential(2.0)
    assert cfg.contract.recovery == Recovery.constant(0.4)
    assert len(cfg.grid.grid()) == 101


def test_env_seed_override():
    assert parse_config(BASE, env={SEED_ENV: "99"}).seed == 99
    with pytest.raises(ConfigError):
        parse_config(BASE, env={SEED_ENV: "abc"})


@pytest.mark.parametrize("extra,line", [
    ("\n[grid2]\nx = 1\n", 11),
    ("colour = 1\n", 10),
])
def test_unknown_keys_rejected(extra, line):
    with pytest.raises(ConfigError) as err:
        parse_config(BASE + extra, "run.toml", env={})
    assert err.value.line == line
    assert str(err.value).startswith(f"run.toml:{line}:")


def test_unknown_key_in_section():
    text = BASE.replace("dt = 0.01", "dt = 0.01\nstep = 2")
    with pytest.raises(ConfigError) as err:
        parse_config(text, env={})
    assert err.value.line == 10


@pytest.mark.parametrize("dt", ["0", "-0.1"])
def test_nonpositive_dt(dt):
    with pytest.raises(ConfigError) as err:
        parse_config(BASE.replace("dt = 0.01", f"dt = {dt}"), env={})
    assert err.value.line == 9


def test_bad_law_values():
    with pytest.raises(ConfigError) as err:
        parse_config(BASE.replace("rate = 2.0", "rate = -1"), env={})
    assert err.value.line == 3
    with pytest.raises(ConfigError):
        parse_config(BASE.replace('"exponential"', '"gamma"'), env={})


def test_other_law_kinds():
    atoms = parse_config('[law]\nkind = "atoms"\natoms = [[1, 0.25], [3, 0.75]]\n', env={})
    assert atoms.law == DiscreteAtoms((1.0, 3.0), (0.25, 0.75))
    emp = parse_config('[law]\nkind = "empirical"\nknots = [[0.5, 0.2], [2, 1]]\n', env={})
    assert emp.law == PiecewiseEmpirical((0.5, 2.0), (0.2, 1.0))


def test_syntax_error_has_line():
    with pytest.raises(ConfigError) as err:
        parse_config(BASE + "oops = \n", env={})
    assert err.value.line == 10


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.toml")
