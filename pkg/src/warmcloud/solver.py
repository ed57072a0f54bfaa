"""Time integration of the truncated moisture/temperature system.

The default scheme is forward Euler with a step chosen so that every cell
update is a convex combination of old values, boundary data and the local
saturation value.  That is the discrete form of the nonnegativity and
vapour-bound arguments: no clipping is needed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import FIELDS, INTERIOR, BoundarySpec, Grid, MoistState, PhysParams, slab_map
from .diagnostics import (LevelSetSeries, Violation, check_bounds, degiorgi_threshold, diagnostics_row,
                          update_level_sets)
from .microphysics import loss_rates, phase_change_tendencies
from .operators import (advect, apply_boundary_ghosts, horizontal_laplacian, robin_coefficient,
                        sedimentation, temperature_extras, weighted_vertical_diffusion)
from .thermo import max_saturation_mixing_ratio, moist_coeffs, saturation_mixing_ratio
from .velocity import VelocityField, ZeroVelocity

log = logging.getLogger(__name__)

SCHEMES = ("euler", "rk2", "strang")


class SimulationError(RuntimeError):
    """Raised on non-finite state or a collapsing time step; carries partial results."""

    def __init__(self, message, state=None, result=None):
        super().__init__(message)
        self.state = state
        self.result = result


@dataclass
class StepControl:
    t_end: float = 1.0
    scheme: str = "euler"
    cfl_adv: float = 0.9
    cfl_diff: float = 0.9
    cfl_sed: float = 0.9
    cfl_src: float = 0.9
    dt_max: float = math.inf
    dt_min: float = 1e-12
    clip: bool = False

    def __post_init__(self):
        for name in ("cfl_adv", "cfl_diff", "cfl_sed", "cfl_src"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ValueError(f"{name} must lie in (0, 1], got {v}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        if self.dt_max <= 0:
            raise ValueError("dt_max must be positive")


@dataclass
class Model:
    """Everything that stays fixed during a run."""

    grid: Grid
    params: PhysParams
    bc: BoundarySpec = field(default_factory=BoundarySpec)
    velocity: Callable[[float], VelocityField] | None = None
    sources: bool = True
    sedimentation: bool = True
    limiter: str | None = None
    # t -> {field: interior array}, added to the tendencies (manufactured solutions)
    forcing: Callable[[float], dict] | None = None
    workers: int = 1

    def __post_init__(self):
        if self.velocity is None:
            self.velocity = ZeroVelocity(self.grid)

    @property
    def V(self) -> float:
        return self.params.V if self.sedimentation else 0.0


def fill_ghosts(state: MoistState, model: Model, t: float) -> None:
    for name in FIELDS:
        apply_boundary_ghosts(state[name], model.bc[name], model.grid, t)


def _micro(model: Model, P, T, qv, qc, qr):
    out = [np.empty_like(T) for _ in range(4)]

    def work(sl):
        res = phase_change_tendencies(P[sl], T[sl], qv[sl], qc[sl], qr[sl], model.params)
        for o, r in zip(out, res):
            o[sl] = r

    slab_map(work, T.shape[0], model.workers)
    return out


def rhs(state: MoistState, model: Model, t: float | None = None, vertical_diffusion: bool = True,
        vel: VelocityField | None = None) -> dict[str, np.ndarray]:
    """Tendencies of (T, qv, qc, qr) with every transport term moved to the right.

    Fills the ghost layers of ``state`` at time ``t`` as a side effect.
    """
    t = state.t if t is None else t
    grid, params = model.grid, model.params
    fill_ghosts(state, model, t)
    vel = vel if vel is not None else model.velocity(t)
    T, qv, qc, qr = (state.interior(n) for n in FIELDS)
    P = np.broadcast_to(grid.p[:, None, None], T.shape)
    out = {}
    for name in FIELDS:
        f = state[name]
        mu, nu = params.diffusivities(name)
        tend = advect(f, vel, grid, model.limiter)
        tend += horizontal_laplacian(f, grid, mu)
        if vertical_diffusion:
            tend += weighted_vertical_diffusion(f, grid, nu)
        out[name] = tend
    coeffs = moist_coeffs(qv, qc, qr, T, params)
    phys = params if model.sedimentation else params.replace(V=0.0)
    out["T"] += temperature_extras(state.T, qv, qc, qr, vel.omega, grid, phys, coeffs)
    if model.sedimentation and params.V > 0:
        out["qr"] += sedimentation(state.qr, grid, params.V)
    if model.sources:
        for name, d in zip(FIELDS, _micro(model, P, T, qv, qc, qr)):
            out[name] += d
    if model.forcing is not None:
        for name, fo in model.forcing(t).items():
            out[name] += fo
    return out


def _diffusion_rate(model: Model, t: float, name: str, vertical: bool) -> float:
    grid, params = model.grid, model.params
    mu, nu = params.diffusivities(name)
    s = model.bc.boundary_samples(grid, t)[name]
    # robin coefficient of each wall (< 2); 0 when alpha = 0
    cl_x = float(np.max(robin_coefficient(s["alphal"], grid.dx), initial=0.0))
    cl_y = float(np.max(robin_coefficient(s["alphal"], grid.dy), initial=0.0))
    rate = mu * (max(2.0, 1.0 + cl_x) / grid.dx**2 + max(2.0, 1.0 + cl_y) / grid.dy**2)
    if vertical:
        w2 = grid.w_faces**2
        c0 = float(np.max(robin_coefficient(s["alpha0"], grid.dp), initial=0.0))
        per_level = w2[:-1] + w2[1:]
        per_level[0] = c0 * w2[0] + w2[1]
        per_level[-1] = w2[-2]  # top face carries no flux
        rate += nu * float(per_level.max()) / grid.dp**2
    return rate


def _advective_rate(vel: VelocityField, grid: Grid) -> float:
    out = (np.maximum(vel.uf[:, :, 1:], 0) + np.maximum(-vel.uf[:, :, :-1], 0)) / grid.dx
    out = out + (np.maximum(vel.vf[:, 1:, :], 0) + np.maximum(-vel.vf[:, :-1, :], 0)) / grid.dy
    out = out + (np.maximum(-vel.wf[1:], 0) + np.maximum(vel.wf[:-1], 0)) / grid.dp
    return float(out.max())


def rate_budget(state: MoistState, model: Model, t: float | None = None,
                vertical_diffusion: bool = True) -> dict[str, dict[str, float]]:
    """Largest per-cell loss coefficient of each process, per field."""
    t = state.t if t is None else t
    grid, params = model.grid, model.params
    vel = model.velocity(t)
    adv = _advective_rate(vel, grid)
    T, qv, qc, qr = (state.interior(n) for n in FIELDS)
    P = grid.p[:, None, None]
    budget = {}
    for name in FIELDS:
        budget[name] = {"adv": adv, "diff": _diffusion_rate(model, t, name, vertical_diffusion),
                        "sed": 0.0, "src": 0.0}
    V = model.V
    if V > 0:
        budget["qr"]["sed"] = V * float(grid.rho_faces[:-1].max()) / grid.dp
        c = moist_coeffs(qv, qc, qr, T, params)
        speed = params.c_l * np.maximum(qr, 0.0) * c.inv_C * V
        budget["T"]["sed"] = float(speed.max()) / grid.dp
    # adiabatic term kappa T omega / p removes heat where omega < 0
    budget["T"]["src"] = params.kappa1 * float(np.max(np.maximum(-vel.omega, 0) / P, initial=0.0))
    if model.sources:
        qvs = saturation_mixing_ratio(P, T, params)
        for name, r in zip(FIELDS, loss_rates(P, T, qv, qc, qr, params, qvs=qvs)):
            budget[name]["src"] += float(np.max(r))
    return budget


def stable_dt(state: MoistState, model: Model, ctrl: StepControl, t: float | None = None) -> float:
    """Step such that sum(rate_i / safety_i) * dt <= 1 for every field, capped at dt_max."""
    vertical = ctrl.scheme != "strang"
    budget = rate_budget(state, model, t, vertical_diffusion=vertical)
    safety = {"adv": ctrl.cfl_adv, "diff": ctrl.cfl_diff, "sed": ctrl.cfl_sed, "src": ctrl.cfl_src}
    dt = ctrl.dt_max
    for rates in budget.values():
        total = sum(r / safety[k] for k, r in rates.items())
        if total > 0:
            dt = min(dt, 1.0 / total)
    if not dt >= ctrl.dt_min:
        raise SimulationError(f"time step {dt:.3e} fell below the floor {ctrl.dt_min:.3e}", state)
    return dt


def _euler(state: MoistState, model: Model, dt: float, t: float, vertical=True) -> MoistState:
    tend = rhs(state, model, t, vertical_diffusion=vertical)
    new = state.copy()
    for name in FIELDS:
        new.interior(name)[...] += dt * tend[name]
    new.t = t + dt
    return new


def _implicit_vertical(state: MoistState, model: Model, tau: float, t: float) -> MoistState:
    """Backward-Euler vertical diffusion over ``tau`` (one tridiagonal solve per column)."""
    grid, params = model.grid, model.params
    new = state.copy()
    w2 = grid.w_faces**2
    n = grid.n_p
    X, Y = grid.x[None, :], grid.y[:, None]
    for name in FIELDS:
        _, nu = params.diffusivities(name)
        bc = model.bc[name]
        r = tau * nu / grid.dp**2
        c0 = robin_coefficient(np.asarray(bc.alpha0(X, Y, grid.p0, t), dtype=float), grid.dp)
        b0 = np.asarray(bc.b0(X, Y, grid.p0, t), dtype=float)
        f = state.interior(name)
        lower = -r * w2[1:n]          # couples k to k-1, k = 1..n-1
        upper = -r * w2[1:n]          # couples k to k+1, k = 0..n-2
        diag = 1.0 + r * (w2[:-1] + w2[1:])
        diag[-1] = 1.0 + r * w2[n - 1]
        d = np.broadcast_to(diag[:, None, None], f.shape).copy()
        d[0] = 1.0 + r * (w2[1] + c0 * w2[0])
        rhs_ = f.copy()
        rhs_[0] += r * c0 * w2[0] * b0
        # Thomas algorithm, vectorised over columns
        cp = np.empty_like(f)
        dp_ = np.empty_like(f)
        cp[0] = upper[0] / d[0]
        dp_[0] = rhs_[0] / d[0]
        for k in range(1, n):
            m = d[k] - lower[k - 1] * cp[k - 1]
            if k < n - 1:
                cp[k] = upper[k] / m
            dp_[k] = (rhs_[k] - lower[k - 1] * dp_[k - 1]) / m
        x = np.empty_like(f)
        x[-1] = dp_[-1]
        for k in range(n - 2, -1, -1):
            x[k] = dp_[k] - cp[k] * x[k + 1]
        new.interior(name)[...] = x
    return new


def step(state: MoistState, model: Model, ctrl: StepControl, dt: float | None = None) -> MoistState:
    """Advance by one step of the selected scheme."""
    t = state.t
    if dt is None:
        dt = stable_dt(state, model, ctrl)
    if ctrl.scheme == "euler":
        new = _euler(state, model, dt, t)
    elif ctrl.scheme == "rk2":
        s1 = _euler(state, model, dt, t)
        s2 = _euler(s1, model, dt, t + dt)
        new = state.copy()
        for name in FIELDS:
            new.interior(name)[...] = 0.5 * (state.interior(name) + s2.interior(name))
    else:
        half = _implicit_vertical(state, model, 0.5 * dt, t + 0.5 * dt)
        half.t = t
        mid = _euler(half, model, dt, t, vertical=False)
        new = _implicit_vertical(mid, model, 0.5 * dt, t + dt)
    new.t = t + dt
    bad = [n for n in FIELDS if not np.all(np.isfinite(new.interior(n)))]
    if bad:
        raise SimulationError(f"non-finite values in {bad} after step to t={t + dt:g}", state)
    return new


@dataclass
class RunResult:
    state: MoistState
    rows: list[dict]
    violations: list
    steps: int
    clip_events: int
    qv_star: float
    qv_sharp_bound: float
    level_sets: LevelSetSeries
    snapshots: list = field(default_factory=list)

    @property
    def summary(self) -> dict:
        last = self.rows[-1] if self.rows else {}
        out = {"t": self.state.t, "steps": self.steps, "violations": len(self.violations),
               "clip_events": self.clip_events, "qv_star": self.qv_star,
               "qv_sharp_bound": self.qv_sharp_bound, "M": self.level_sets.M,
               "J": [float(j) for j in self.level_sets.J]}
        for name in FIELDS:
            for key in ("min", "max", "l2"):
                k = f"{name}_{key}"
                if k in last:
                    out[k] = last[k]
        return out


def _boundary_qv_sup(model: Model, t: float) -> float:
    s = model.bc.boundary_samples(model.grid, t)["qv"]
    return max(float(s["b0"].max()), float(s["bl"].max()))


def simulate(state: MoistState, model: Model, ctrl: StepControl, output_interval: float | None = None,
             k_max: int = 8, M: float | None = None, tol_neg: float = 1e-12, tol_qv: float = 1e-10,
             qv_star: float | None = None, on_output: Callable | None = None) -> RunResult:
    """Integrate to ``ctrl.t_end``, recording diagnostics at every output time.

    Output times are ``t0 + n * output_interval`` and ``t_end``; steps are
    shortened to land on them exactly.
    """
    grid, params = model.grid, model.params
    state = state.copy()
    t0, t_end = state.t, ctrl.t_end
    bsup_times = np.linspace(t0, max(t_end, t0), 5)
    qv_data = max(float(state.interior("qv").max()), model.bc.sup(grid, bsup_times, "qv"))
    if qv_star is None:
        qv_star = max(qv_data, max_saturation_mixing_ratio(grid.p1, params))
    if M is None:
        samples = [model.bc.boundary_samples(grid, t)["T"] for t in bsup_times]
        M = degiorgi_threshold(float(state.interior("T").max()), params.T_crit,
                               max(float(s["b0"].max()) for s in samples),
                               max(float(s["bl"].max()) for s in samples))
    series = LevelSetSeries(M, k_max)
    P = grid.p[:, None, None]
    qv_sharp = max(qv_data, float(saturation_mixing_ratio(P, state.interior("T"), params).max()))
    rows, violations = [], []
    clips = 0
    nstep = 0
    last_dt = 0.0

    def output():
        rep = check_bounds(state, grid, params, qv_star, tol_neg, tol_qv)
        # the sharp bound is tracked separately so a breach is visible on its own
        sharp = state.interior("qv") > qv_sharp + tol_qv
        extra = []
        if sharp.any():
            k, j, i = np.argwhere(sharp)[0]
            extra.append(Violation(state.t, "qv_sharp", int(i), int(j), int(k),
                                   float(state.interior("qv")[k, j, i]), qv_sharp + tol_qv))
        found = list(rep) + extra
        violations.extend(found)
        if state.T[INTERIOR].max() > M:
            k, j, i = np.unravel_index(int(np.argmax(state.interior("T"))), grid.interior_shape)
            found.append(Violation(state.t, "T_above_M", int(i), int(j), int(k),
                                   float(state.interior("T").max()), M))
            violations.append(found[-1])
        update_level_sets(series, state, grid, params, 0.0)
        row = diagnostics_row(state, grid, nstep, last_dt, qv_star, qv_sharp, series, len(found), clips)
        rows.append(row)
        if on_output is not None:
            on_output(state, row)

    next_out = t0 + output_interval if output_interval else math.inf
    eps = 1e-12 * max(1.0, abs(t_end))
    output()
    try:
        while state.t < t_end - eps:
            dt = stable_dt(state, model, ctrl)
            target = min(t_end, next_out)
            if state.t + dt >= target - eps:
                dt = target - state.t
            update_level_sets(series, state, grid, params, dt)
            new = step(state, model, ctrl, dt)
            if ctrl.clip:
                for name in FIELDS:
                    a = new.interior(name)
                    neg = a < 0
                    if neg.any():
                        clips += int(neg.sum())
                        a[neg] = 0.0
            state = new
            nstep += 1
            last_dt = dt
            qv_sharp = max(qv_sharp, _boundary_qv_sup(model, state.t),
                           float(saturation_mixing_ratio(P, state.interior("T"), params).max()))
            if state.t >= next_out - eps or state.t >= t_end - eps:
                if state.t >= next_out - eps:
                    next_out += output_interval
                output()
    except SimulationError as err:
        err.result = RunResult(state, rows, violations, nstep, clips, qv_star, qv_sharp, series)
        raise
    if clips:
        log.warning("positivity clamp fired on %d cell updates", clips)
    return RunResult(state, rows, violations, nstep, clips, qv_star, qv_sharp, series)


def run(config, out_dir=None, workers: int | None = None, write: bool = True):
    """Integrate a :class:`~warmcloud.config.RunConfig` (or a path to one); see :mod:`warmcloud.driver`."""
    from .config import RunConfig, parse_config
    from .driver import run as _run

    cfg = config if isinstance(config, RunConfig) else parse_config(config)
    return _run(cfg, out_dir, workers, write)
