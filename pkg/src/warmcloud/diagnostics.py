"""Runtime monitors: discrete norms, admissibility bounds and level-set energies.

Integrals use the midpoint rule over cells; gradient norms use differences
across interior faces only.  All reductions are plain ``np.sum`` calls on
whole arrays, so they do not depend on how a step was parallelised.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .core import FIELDS, INTERIOR, Grid, MoistState, PhysParams
from .thermo import moist_coeffs


class FieldNorms(NamedTuple):
    l2: float
    linf: float
    min: float
    max: float
    grad_h: float
    grad_p_w: float
    h1w: float


@dataclass
class NormRecord:
    t: float
    fields: dict[str, FieldNorms]

    def __getitem__(self, name):
        return self.fields[name]


def gradient_energies(f: np.ndarray, grid: Grid) -> tuple[float, float]:
    """(||grad_h f||^2, ||dp f||_w^2) for an interior-shaped array."""
    dv = grid.cell_volume
    gx = np.diff(f, axis=2) / grid.dx
    gy = np.diff(f, axis=1) / grid.dy
    gp = np.diff(f, axis=0) / grid.dp
    w2 = (grid.w_faces[1:-1] ** 2)[:, None, None]
    eh = (np.sum(gx * gx) + np.sum(gy * gy)) * dv
    ep = np.sum(w2 * gp * gp) * dv
    return float(eh), float(ep)


def field_norms(f: np.ndarray, grid: Grid) -> FieldNorms:
    l2sq = float(np.sum(f * f) * grid.cell_volume)
    eh, ep = gradient_energies(f, grid)
    return FieldNorms(math.sqrt(l2sq), float(np.max(np.abs(f))), float(f.min()), float(f.max()),
                      math.sqrt(eh), math.sqrt(ep), math.sqrt(l2sq + eh + ep))


def record_norms(state: MoistState, grid: Grid, params: PhysParams | None = None) -> NormRecord:
    return NormRecord(state.t, {name: field_norms(state.interior(name), grid) for name in FIELDS})


def total_mass(f: np.ndarray, grid: Grid) -> float:
    """Sum f dV over the interior of a ghosted field."""
    return float(np.sum(f[INTERIOR]) * grid.cell_volume)


class Violation(NamedTuple):
    t: float
    field: str
    i: int
    j: int
    k: int
    value: float
    bound: float


@dataclass
class ViolationReport:
    violations: list[Violation] = field(default_factory=list)

    def __bool__(self):
        return bool(self.violations)

    def __len__(self):
        return len(self.violations)

    def __iter__(self):
        return iter(self.violations)


def _collect(out, t, name, mask, values, bound):
    for k, j, i in zip(*np.nonzero(mask)):
        b = bound if np.isscalar(bound) else float(bound[k, j, i])
        out.append(Violation(t, name, int(i), int(j), int(k), float(values[k, j, i]), float(b)))


def check_bounds(state: MoistState, grid: Grid, params: PhysParams, qv_star: float,
                 tol_neg: float = 1e-12, tol_qv: float = 1e-10) -> ViolationReport:
    """Cells violating nonnegativity, the vapour bound or the coefficient bounds.

    Coefficient rows use the names ``kappa``, ``rain_fraction`` and ``inv_C``.
    """
    rep = ViolationReport()
    t = state.t
    for name in FIELDS:
        a = state.interior(name)
        _collect(rep.violations, t, name, ~(a >= -tol_neg), a, -tol_neg)
    qv = state.interior("qv")
    _collect(rep.violations, t, "qv", qv > qv_star + tol_qv, qv, qv_star + tol_qv)
    qc, qr = state.interior("qc"), state.interior("qr")
    c = moist_coeffs(qv, qc, qr, state.interior("T"), params)
    k = c.kappa_tilde
    _collect(rep.violations, t, "kappa", ~((k > 0) & (k <= params.kappa1)), k, params.kappa1)
    frac = params.c_l * np.maximum(qr, 0.0) * c.inv_C
    _collect(rep.violations, t, "rain_fraction", ~((frac >= 0) & (frac <= 1)), frac, 1.0)
    _collect(rep.violations, t, "inv_C", ~((c.inv_C > 0) & (c.inv_C <= 1.0 / params.c_pd)),
             c.inv_C, 1.0 / params.c_pd)
    return rep


def degiorgi_threshold(T0_sup: float, T_crit: float, Tb0_sup: float, Tbl_sup: float) -> float:
    """Smallest admissible base level M = 2 max{...} for the level-set iteration."""
    return 2.0 * max(T0_sup, T_crit, Tb0_sup, Tbl_sup)


@dataclass
class LevelSetSeries:
    """Running truncation energies J_k at levels lambda_k = M (1 - 2^-k), k = 1..k_max.

    ``J_k = sup_t ||(T - lambda_k)^+||^2 + int (mu_T ||grad_h .||^2 + nu_T ||dp .||_w^2) dt``;
    the time integral is accumulated at the left endpoint of each step.
    """

    M: float
    k_max: int = 8
    sup_part: np.ndarray = None
    integral_part: np.ndarray = None

    def __post_init__(self):
        if self.sup_part is None:
            self.sup_part = np.zeros(self.k_max)
        if self.integral_part is None:
            self.integral_part = np.zeros(self.k_max)

    @property
    def levels(self) -> np.ndarray:
        k = np.arange(1, self.k_max + 1)
        return self.M * (1.0 - 2.0 ** (-k.astype(float)))

    @property
    def J(self) -> np.ndarray:
        return self.sup_part + self.integral_part


def update_level_sets(series: LevelSetSeries, state: MoistState, grid: Grid, params: PhysParams,
                      dt: float) -> LevelSetSeries:
    """Fold the state at the start of a step of length ``dt`` into the series."""
    T = state.interior("T")
    for idx, lam in enumerate(series.levels):
        Tl = np.maximum(T - lam, 0.0)
        if not Tl.any():
            continue
        series.sup_part[idx] = max(series.sup_part[idx], float(np.sum(Tl * Tl) * grid.cell_volume))
        if dt > 0:
            eh, ep = gradient_energies(Tl, grid)
            series.integral_part[idx] += dt * (params.mu_T * eh + params.nu_T * ep)
    return series


NORM_KEYS = ("min", "max", "l2", "linf", "grad_h", "grad_p_w", "h1w")


def diagnostics_columns(k_max: int) -> list[str]:
    cols = ["t", "step", "dt"]
    for name in FIELDS:
        cols += [f"{name}_{key}" for key in NORM_KEYS]
    cols += ["mass_qv", "mass_qc", "mass_qr", "mass_water", "qv_star", "qv_sharp_bound", "M"]
    cols += [f"J_{k}" for k in range(1, k_max + 1)]
    cols += ["violations", "clip_events"]
    return cols


def diagnostics_row(state: MoistState, grid: Grid, step: int, dt: float, qv_star: float,
                    qv_sharp: float, series: LevelSetSeries, n_violations: int, clips: int) -> dict:
    rec = record_norms(state, grid)
    row = {"t": state.t, "step": step, "dt": dt}
    for name in FIELDS:
        n = rec[name]
        for key in NORM_KEYS:
            row[f"{name}_{key}"] = getattr(n, key)
    masses = [total_mass(state[n], grid) for n in ("qv", "qc", "qr")]
    row.update(mass_qv=masses[0], mass_qc=masses[1], mass_qr=masses[2], mass_water=sum(masses),
               qv_star=qv_star, qv_sharp_bound=qv_sharp, M=series.M)
    for k, j in enumerate(series.J, start=1):
        row[f"J_{k}"] = float(j)
    row["violations"] = n_violations
    row["clip_events"] = clips
    return row


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_diagnostics_csv(path, rows: list[dict], columns: list[str]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])


VIOLATION_COLUMNS = ["t", "field", "i", "j", "k", "value", "bound"]


def write_violations_csv(path, violations) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(VIOLATION_COLUMNS)
        for v in violations:
            w.writerow([_fmt(x) for x in v])
