"""Snapshot writers: legacy VTK, binary checkpoints and per-level CSV slices.

Checkpoint layout (little-endian): the velocity-series block (header with
an 8-byte magic, version, nx, ny, n_p, frame count; frame times; u, v,
omega per frame), then the time stamp, the geometry (Lx, Ly, p1, p0 and
Tbar per level) and the interior arrays of T, qv, qc, qr.  All arrays are
p-major, y-middle, x-minor float64.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .core import FIELDS, Grid, GridConfig, MoistState, PhysParams, build_grid
from .thermo import density, potential_temperature
from .velocity import VelocityField, _read_f8, _read_velocity_block, _write_velocity_block

CHECKPOINT_MAGIC = b"WCCHKPT1"
FORMATS = ("vtk", "checkpoint", "csv")


def _f8(a):
    return np.ascontiguousarray(a, dtype="<f8").tobytes()


def diagnostic_fields(state: MoistState, grid: Grid, params: PhysParams) -> dict[str, np.ndarray]:
    """The four prognostic fields plus potential temperature and density (NaN where T <= 0)."""
    out = {name: state.interior(name) for name in FIELDS}
    P = grid.p[:, None, None]
    T = out["T"]
    pos = T > 0
    Tsafe = np.where(pos, T, 1.0)
    out["theta"] = potential_temperature(T, np.broadcast_to(P, T.shape), params)
    rho = density(P, Tsafe, out["qv"], out["qc"], out["qr"], params)
    out["rho"] = np.where(pos, rho, np.nan)
    return out


def write_vtk(path, state: MoistState, grid: Grid, params: PhysParams) -> None:
    """Legacy ASCII STRUCTURED_POINTS; the vertical coordinate is z = p0 - p."""
    path = Path(path)
    n_p, ny, nx = grid.interior_shape
    data = diagnostic_fields(state, grid, params)
    try:
        with open(path, "w") as fh:
            fh.write("# vtk DataFile Version 3.0\n")
            fh.write(f"warmcloud snapshot t={state.t!r}\n")
            fh.write("ASCII\nDATASET STRUCTURED_POINTS\n")
            fh.write(f"DIMENSIONS {nx} {ny} {n_p}\n")
            fh.write(f"ORIGIN {grid.x[0]!r} {grid.y[0]!r} {grid.p0 - grid.p[0]!r}\n")
            fh.write(f"SPACING {grid.dx!r} {grid.dy!r} {grid.dp!r}\n")
            fh.write(f"POINT_DATA {nx * ny * n_p}\n")
            for name, a in data.items():
                fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
                # k outermost matches VTK's x-fastest ordering with z = p0 - p increasing in k
                np.savetxt(fh, a.reshape(-1, nx), fmt="%.17g")
    except OSError as err:
        raise OSError(f"could not write VTK file {path}: {err}") from err


def write_checkpoint(path, state: MoistState, grid: Grid, velocity: VelocityField | None = None) -> None:
    path = Path(path)
    n_p, ny, nx = grid.interior_shape
    frames = [velocity] if velocity is not None else []
    times = [velocity.t] if velocity is not None else []
    try:
        with open(path, "wb") as fh:
            _write_velocity_block(fh, (nx, ny, n_p), times, frames, magic=CHECKPOINT_MAGIC)
            fh.write(_f8([state.t]))
            fh.write(_f8([grid.Lx, grid.Ly, grid.p1, grid.p0]))
            fh.write(_f8(grid.tbar))
            for name in FIELDS:
                fh.write(_f8(state.interior(name)))
    except OSError as err:
        raise OSError(f"could not write checkpoint {path}: {err}") from err


def read_checkpoint(path, params: PhysParams | None = None):
    """Return ``(state, grid, velocity_frames)``; ghost layers of the state are zero."""
    path = Path(path)
    with open(path, "rb") as fh:
        (nx, ny, n_p), times, arrays = _read_velocity_block(fh, magic=CHECKPOINT_MAGIC)
        head = _read_f8(fh, 5 + n_p, f"checkpoint geometry in {path}")
        t, Lx, Ly, p1, p0 = (float(v) for v in head[:5])
        tbar = head[5:]
        n = nx * ny * n_p
        grid = build_grid(GridConfig(nx, ny, n_p, Lx, Ly, p0, p1, tbar), params)
        arrays_q = {}
        for name in FIELDS:
            arrays_q[name] = _read_f8(fh, n, f"field {name} in {path}").reshape(n_p, ny, nx)
        if fh.read(1):
            raise ValueError(f"{path}: trailing bytes after checkpoint")
    state = MoistState.from_interior(grid, t, **arrays_q)
    return state, grid, list(zip(times, arrays))


CSV_COLUMNS = ["i", "j", "x", "y", "p", "T", "qv", "qc", "qr"]


def write_csv_slices(path, state: MoistState, grid: Grid, levels=None) -> list[Path]:
    """One CSV per pressure level, ``<stem>_k###.csv``; returns the written paths."""
    path = Path(path)
    levels = range(grid.n_p) if levels is None else levels
    out = []
    cols = [state.interior(n) for n in FIELDS]
    for k in levels:
        fp = path.with_name(f"{path.stem}_k{k:03d}.csv")
        try:
            with open(fp, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(CSV_COLUMNS)
                for j in range(grid.ny):
                    for i in range(grid.nx):
                        w.writerow([i, j, repr(float(grid.x[i])), repr(float(grid.y[j])), repr(float(grid.p[k]))]
                                   + [repr(float(c[k, j, i])) for c in cols])
        except OSError as err:
            raise OSError(f"could not write CSV slice {fp}: {err}") from err
        out.append(fp)
    return out


def write_snapshot(state: MoistState, grid: Grid, path, fmt: str, params: PhysParams | None = None,
                   velocity: VelocityField | None = None, levels=None):
    params = params or PhysParams()
    if fmt == "vtk":
        write_vtk(path, state, grid, params)
    elif fmt == "checkpoint":
        write_checkpoint(path, state, grid, velocity)
    elif fmt == "csv":
        return write_csv_slices(path, state, grid, levels)
    else:
        raise ValueError(f"unknown snapshot format {fmt!r}; choose from {FORMATS}")
    return [Path(path)]
