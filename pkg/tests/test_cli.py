import json

import numpy as np
import pytest

from warmcloud.cli import main
from warmcloud.core import MoistState
from warmcloud.io import read_checkpoint, write_checkpoint

CFG = """
[grid]
nx = 6
ny = 6
np = 6
[physics]
preset = nondimensional
[velocity]
kind = analytic
amplitude = 0.2
[initial]
qv = 0.01
qc = 0.001
[boundary.qv]
alpha0 = 1
b0 = 0.01
[stepping]
t_end = 0.02
[output]
interval = 0.01
formats = checkpoint, vtk, csv
csv_levels = 0
[mms]
case = constant
levels = 4, 5, 6
"""


@pytest.fixture
def cfg(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text(CFG)
    return path


def test_run_writes_outputs(cfg, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", str(cfg), "--out", str(out), "--json"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["violations"] == 0 and summary["ok"]
    names = {p.name for p in out.iterdir()}
    assert {"diagnostics.csv", "violations.csv", "summary.json", "snapshot_0000.chk", "snapshot_0002.vtk",
            "snapshot_0001_k000.csv"} <= names
    assert len((out / "diagnostics.csv").read_text().splitlines()) == 4


def test_config_flag_equivalent(cfg, tmp_path):
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0


def test_check_clean_and_negative(cfg, tmp_path, capsys):
    out = tmp_path / "out"
    main(["run", str(cfg), "--out", str(out)])
    snap = out / "snapshot_0002.chk"
    assert main(["check", str(snap)]) == 0
    state, grid, _ = read_checkpoint(snap)
    bad = MoistState.from_interior(grid, state.t, **{n: state.interior(n).copy() for n in ("T", "qv", "qc", "qr")})
    bad.interior("qc")[0, 1, 2] = -1e-6
    write_checkpoint(tmp_path / "bad.chk", bad, grid)
    capsys.readouterr()
    assert main(["check", str(tmp_path / "bad.chk"), "--json"]) == 1
    rows = json.loads(capsys.readouterr().out)["violations"]
    assert rows[0]["field"] == "qc" and (rows[0]["i"], rows[0]["j"], rows[0]["k"]) == (2, 1, 0)


def test_check_qv_star(cfg, tmp_path):
    out = tmp_path / "out"
    main(["run", str(cfg), "--out", str(out)])
    assert main(["check", str(out / "snapshot_0000.chk"), "--qv-star", "1e-4"]) == 1


def test_validate_velocity(cfg, capsys):
    assert main(["validate-velocity", str(cfg), "--json"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["passed"] and len(rep["reports"]) == 5


def test_print_params(cfg, capsys):
    assert main(["print-params", str(cfg), "--json"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["T_crit"] == pytest.approx(4.918, abs=1e-3)
    assert out["E"] == pytest.approx(0.62189, abs=1e-5)
    assert out["kappa1"] == pytest.approx(0.4592, abs=1e-4)


def test_print_params_echo(cfg, capsys):
    assert main(["print-params", str(cfg), "--echo"]) == 0
    assert "[boundary.qv]" in capsys.readouterr().out


def test_mms_constant(cfg, capsys):
    assert main(["mms", str(cfg), "--json"]) == 0
    assert json.loads(capsys.readouterr().out)["passed"]


@pytest.mark.parametrize("argv", [["bogus"], [], ["run"], ["run", "/nonexistent.ini"],
                                  ["run", "x.ini", "--threads", "0"], ["check", "/nonexistent.chk"],
                                  ["run", "x.ini", "--log-level", "LOUD"]])
def test_usage_errors(argv, capsys):
    assert main(argv) == 2


def test_bad_config_value(tmp_path, capsys):
    path = tmp_path / "bad.ini"
    path.write_text(CFG.replace("amplitude = 0.2", "amplitude = fast"))
    assert main(["run", str(path)]) == 2
    assert "bad.ini" in capsys.readouterr().err


def test_violation_exit_code(tmp_path, capsys):
    # an impossible vapour bound makes every output time a violation
    path = tmp_path / "v.ini"
    path.write_text(CFG + "[diagnostics]\nqv_star = 1e-6\n")
    assert main(["run", str(path), "--out", str(tmp_path / "o")]) == 1
    assert "invariant violation" in capsys.readouterr().err
    assert len((tmp_path / "o" / "violations.csv").read_text().splitlines()) > 1


def test_module_entry_point():
    import subprocess
    import sys

    r = subprocess.run([sys.executable, "-m", "warmcloud", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "print-params" in r.stdout


def test_shipped_config_matches_scenario(capsys):
    from pathlib import Path

    from warmcloud.config import parse_config
    from warmcloud.scenarios import rising_moist_bubble

    path = Path(__file__).parent.parent / "configs" / "rising_moist_bubble.ini"
    assert parse_config(path) == rising_moist_bubble(n=16, t_end=0.5, interval=0.1)
    assert main(["validate-velocity", str(path), "--json"]) == 0
    assert json.loads(capsys.readouterr().out)["passed"]
