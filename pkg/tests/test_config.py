import math

import numpy as np
import pytest

from warmcloud.config import (Expression, RunConfig, apply_env, parse_config, parse_config_text,
                              serialize_config)
from warmcloud.core import ConfigError

MINIMAL = """
[grid]
nx = 4
ny = 5
np = 6
[stepping]
t_end = 0.5
"""


def test_minimal_defaults():
    cfg = parse_config_text(MINIMAL)
    assert cfg["grid"]["nx"] == 4 and cfg["grid"]["p0"] == 1e5
    assert cfg["stepping"]["scheme"] == "euler" and cfg["stepping"]["dt_max"] == math.inf
    assert cfg["velocity"]["kind"] == "zero"
    assert cfg.params().c_pd == 1005.0


def test_nondimensional_preset():
    cfg = parse_config_text(MINIMAL + "[physics]\npreset = nondimensional\n")
    par = cfg.params()
    assert par.R_d == 1.0 and cfg["grid"]["p0"] == 1.0 and cfg["grid"]["p1"] == 0.2
    assert par.T_crit == pytest.approx(4.918, abs=1e-3)


def test_round_trip():
    text = MINIMAL + "[velocity]\nkind = analytic\namplitude = 0.3\n[boundary.qv]\nb0 = 0.01 * (1 + x)\n"
    cfg = parse_config_text(text)
    again = parse_config_text(serialize_config(cfg))
    assert again == cfg


@pytest.mark.parametrize("text,match", [
    (MINIMAL + "[bogus]\na = 1\n", "unknown section"),
    (MINIMAL + "[run]\nspeed = 3\n", "unknown key"),
    ("[grid]\nnx = 4\nny = 4\n[stepping]\nt_end = 1\n", "np is required"),
    (MINIMAL + "[physics]\nbeta = 0.5\n", "evaporation exponent"),
    (MINIMAL + "cfl_adv = 1.5\n", "cfl_adv"),
    (MINIMAL + "[stepping]\nscheme = rk2\n", "already exists"),
    (MINIMAL.replace("nx = 4", "nx = four"), "invalid value"),
    (MINIMAL + "[initial]\nT = __import__('os')\n", "initial"),
    (MINIMAL + "[velocity]\nkind = file\n", "file path"),
    ("nx = 3\n" + MINIMAL, "outside any"),
])
def test_rejections(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config_text(text)


def test_error_carries_line_number(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text(MINIMAL + "[run]\nworkers = x\n")
    with pytest.raises(ConfigError, match=r"bad.ini:9: \[run\] workers"):
        parse_config(path)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        parse_config(tmp_path / "nope.ini")


def test_env_override():
    env = {"WARMCLOUD_STEPPING_T_END": "2.5", "WARMCLOUD_BOUNDARY_QV_B0": "0.02", "HOME": "/root"}
    cfg = parse_config_text(MINIMAL, environ=env)
    assert cfg["stepping"]["t_end"] == 2.5
    assert cfg["boundary.qv"]["b0"](0.0, 0.0, 1.0, 0.0) == 0.02


def test_env_unknown_key():
    with pytest.raises(ConfigError, match="no key"):
        apply_env({}, {"WARMCLOUD_GRID_NZ": "3"})


def test_replace():
    cfg = parse_config_text(MINIMAL)
    new = cfg.replace(stepping__t_end=3.0, boundary_T__b0="2")
    assert new["stepping"]["t_end"] == 3.0 and new["boundary.T"]["b0"].is_constant
    assert cfg["stepping"]["t_end"] == 0.5
    assert isinstance(new, RunConfig)


@pytest.mark.parametrize("text,val", [("1 + 2 * 3", 7.0), ("-x + 2", 1.0), ("exp(0) + sin(0) + cos(0)", 2.0),
                                      ("2 ** 3", 8.0), ("pi", math.pi), ("p / 4", 0.25)])
def test_expression_values(text, val):
    assert float(Expression(text)(1.0, 0.0, 1.0, 0.0)) == pytest.approx(val)


@pytest.mark.parametrize("text", ["os.system('x')", "[1, 2]", "x if y else p", "lambda: 1", "z + 1",
                                  "sqrt(x)", "x.real", ""])
def test_expression_rejects(text):
    with pytest.raises(ConfigError):
        Expression(text)


def test_expression_broadcasts():
    e = Expression("x + y * p")
    out = e(np.arange(3.0)[None, :], np.ones((2, 1)), 2.0, 0.0)
    assert out.shape == (2, 3)
    assert Expression("3").is_constant and not e.is_constant
