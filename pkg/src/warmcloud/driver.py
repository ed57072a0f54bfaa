"""Build solver objects from a :class:`RunConfig` and run them with file output."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import RunConfig
from .core import FIELDS, BoundarySpec, ConfigError, FieldBC, Grid, GridConfig, MoistState, PhysParams, build_grid
from .diagnostics import diagnostics_columns, write_diagnostics_csv, write_violations_csv
from .io import read_checkpoint, write_snapshot
from .solver import Model, RunResult, SimulationError, StepControl, simulate
from .thermo import max_saturation_mixing_ratio
from .velocity import (AnalyticFlowSpec, AnalyticVelocity, ZeroVelocity, load_velocity_series,
                       validate_velocity)

log = logging.getLogger(__name__)

SNAPSHOT_EXT = {"vtk": "vtk", "checkpoint": "chk", "csv": "csv"}


def grid_from_config(cfg: RunConfig, params: PhysParams | None = None) -> Grid:
    g = cfg["grid"]
    params = params or cfg.params()
    tb = g["Tbar"]
    tbar = float(tb(0.0, 0.0, 0.0, 0.0)) if tb.is_constant else (lambda p: tb(0.0, 0.0, p, 0.0))
    return build_grid(GridConfig(g["nx"], g["ny"], g["np"], g["Lx"], g["Ly"], g["p0"], g["p1"], tbar), params)


def boundary_from_config(cfg: RunConfig) -> BoundarySpec:
    return BoundarySpec(**{f: FieldBC(**cfg[f"boundary.{f}"]) for f in FIELDS})


def velocity_from_config(cfg: RunConfig, grid: Grid):
    v = cfg["velocity"]
    if v["kind"] == "zero":
        return ZeroVelocity(grid)
    if v["kind"] == "file":
        path = Path(v["file"])
        if not path.is_absolute() and cfg.source:
            path = Path(cfg.source).parent / path
        return load_velocity_series(path, grid, v["div_tol"], v["flux_tol"])
    mod = v["modulation"]
    modulation = None if (mod.is_constant and mod(0, 0, 0, 0) == 1.0) else (lambda t: float(mod(0, 0, 0, t)))
    spec = AnalyticFlowSpec(v["amplitude"], v["mx"], v["my"], modulation=modulation,
                            regularity=(v["r"], v["q"]))
    spec.check(grid)
    return AnalyticVelocity(spec, grid)


def initial_state(cfg: RunConfig, grid: Grid, params: PhysParams) -> MoistState:
    ini = cfg["initial"]
    if ini["snapshot"]:
        path = Path(ini["snapshot"])
        if not path.is_absolute() and cfg.source:
            path = Path(cfg.source).parent / path
        state, g2, _ = read_checkpoint(path, params)
        if g2.interior_shape != grid.interior_shape:
            raise ConfigError(f"snapshot {path} has shape {g2.interior_shape}, grid is {grid.interior_shape}")
        state.t = 0.0
    else:
        P, Y, X = grid.mesh()
        state = MoistState.from_interior(grid, 0.0, **{f: ini[f](X, Y, P, 0.0) for f in FIELDS})
    if ini["noise"] > 0:
        rng = np.random.default_rng(cfg["run"]["seed"])
        for f in FIELDS:
            a = state.interior(f)
            a *= 1.0 + ini["noise"] * rng.random(a.shape)
    for f in FIELDS:
        a = state.interior(f)
        if not np.all(np.isfinite(a)):
            raise ConfigError(f"[initial] {f} is not finite everywhere")
        if a.min() < 0:
            raise ConfigError(f"[initial] {f} must be nonnegative, min is {a.min():g}")
    return state


@dataclass
class Setup:
    cfg: RunConfig
    params: PhysParams
    grid: Grid
    model: Model
    state: MoistState
    ctrl: StepControl
    qv_star: float
    extras: dict = field(default_factory=dict)


def setup_run(cfg: RunConfig, workers: int | None = None) -> Setup:
    """Everything a run needs, with all cross-checks done before any compute."""
    params = cfg.params()
    grid = grid_from_config(cfg, params)
    bc = boundary_from_config(cfg)
    st = cfg["stepping"]
    times = np.linspace(0.0, st["t_end"], 5)
    bc.validate(grid, times)
    vel = velocity_from_config(cfg, grid)
    for t in times:
        rep = validate_velocity(vel(float(t)), grid, cfg["velocity"]["div_tol"], cfg["velocity"]["flux_tol"])
        if not rep.passed:
            raise ConfigError(f"velocity at t={t:g} fails validation: {'; '.join(rep.failures)}")
    state = initial_state(cfg, grid, params)
    model = Model(grid, params, bc, vel, sources=st["sources"], sedimentation=st["sedimentation"],
                  limiter=None if st["limiter"] == "none" else st["limiter"],
                  workers=workers if workers is not None else cfg["run"]["workers"])
    ctrl = StepControl(t_end=st["t_end"], scheme=st["scheme"], cfl_adv=st["cfl_adv"], cfl_diff=st["cfl_diff"],
                       cfl_sed=st["cfl_sed"], cfl_src=st["cfl_src"], dt_max=st["dt_max"], dt_min=st["dt_min"],
                       clip=st["clip"])
    qv_star = cfg["diagnostics"]["qv_star"]
    if qv_star is None:
        qv_star = max(float(state.interior("qv").max()), bc.sup(grid, times, "qv"),
                      max_saturation_mixing_ratio(grid.p1, params))
    return Setup(cfg, params, grid, model, state, ctrl, qv_star)


@dataclass
class RunOutput:
    result: RunResult
    out_dir: Path | None
    files: list[Path]
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None and not self.result.violations

    def summary(self) -> dict:
        s = dict(self.result.summary)
        s["ok"] = self.ok
        s["error"] = self.error
        s["out_dir"] = str(self.out_dir) if self.out_dir else None
        return s


def run(cfg: RunConfig, out_dir=None, workers: int | None = None, write: bool = True) -> RunOutput:
    """Integrate the configured problem, writing diagnostics and snapshots to ``out_dir``.

    On a solver failure the rows collected so far are still written and the
    error is reported in the returned object.
    """
    s = setup_run(cfg, workers)
    o, d = cfg["output"], cfg["diagnostics"]
    out = Path(out_dir if out_dir is not None else o["directory"]) if write else None
    files: list[Path] = []
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    counter = [0]

    def on_output(state, row):
        if out is None or not o["snapshots"]:
            return
        vel = s.model.velocity(state.t)
        for fmt in o["formats"]:
            path = out / f"snapshot_{counter[0]:04d}.{SNAPSHOT_EXT[fmt]}"
            levels = o["csv_levels"] or None
            files.extend(write_snapshot(state, s.grid, path, fmt, s.params, vel, levels))
        counter[0] += 1

    error = None
    try:
        res = simulate(s.state, s.model, s.ctrl, output_interval=o["interval"], k_max=d["k_max"], M=d["M"],
                       tol_neg=d["tol_neg"], tol_qv=d["tol_qv"], qv_star=s.qv_star, on_output=on_output)
    except SimulationError as err:
        res = err.result
        error = str(err)
        log.error("run failed: %s", err)
    if out is not None:
        diag = out / "diagnostics.csv"
        write_diagnostics_csv(diag, res.rows, diagnostics_columns(d["k_max"]))
        viol = out / "violations.csv"
        write_violations_csv(viol, res.violations)
        files += [diag, viol]
        ro = RunOutput(res, out, files, error)
        summ = out / "summary.json"
        summ.write_text(json.dumps(ro.summary(), indent=2, default=float) + "\n")
        files.append(summ)
        return ro
    return RunOutput(res, None, files, error)
