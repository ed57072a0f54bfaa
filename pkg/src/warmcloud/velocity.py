"""Prescribed velocity fields and checks of incompressibility / no-penetration.

A :class:`VelocityField` carries cell-centre samples ``u, v, omega`` and the
face-normal components ``uf, vf, wf`` used by the flux-form transport.  The
face components of every provider here have zero discrete divergence
(to rounding), which is what makes the upwind scheme conservative and
constant-preserving.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import fft

from .core import ConfigError, Grid

VELOCITY_MAGIC = b"WCVELSER"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<8sIIIII")


@dataclass
class VelocityField:
    u: np.ndarray
    v: np.ndarray
    omega: np.ndarray
    uf: np.ndarray  # (n_p, ny, nx+1), x-faces
    vf: np.ndarray  # (n_p, ny+1, nx), y-faces
    wf: np.ndarray  # (n_p+1, ny, nx), omega at p-faces, face m at p0 - m dp
    t: float = 0.0

    @classmethod
    def zeros(cls, grid: Grid, t: float = 0.0) -> "VelocityField":
        n_p, ny, nx = grid.interior_shape
        return cls(np.zeros((n_p, ny, nx)), np.zeros((n_p, ny, nx)), np.zeros((n_p, ny, nx)),
                   np.zeros((n_p, ny, nx + 1)), np.zeros((n_p, ny + 1, nx)),
                   np.zeros((n_p + 1, ny, nx)), t)

    def scaled(self, a: float, t: float | None = None) -> "VelocityField":
        return VelocityField(a * self.u, a * self.v, a * self.omega, a * self.uf, a * self.vf,
                             a * self.wf, self.t if t is None else t)


def _default_shape(p0: float, p1: float):
    dp = p0 - p1

    def s(p):
        return dp / np.pi * np.sin(np.pi * (p - p1) / dp)

    def ds(p):
        return np.cos(np.pi * (p - p1) / dp)

    return s, ds


@dataclass
class AnalyticFlowSpec:
    """Separable divergence-free family.

    u = A sin(mx pi x/Lx) cos(my pi y/Ly) s'(p)
    v = A cos(mx pi x/Lx) sin(my pi y/Ly) s'(p)
    omega = -A pi (mx/Lx + my/Ly) cos(mx pi x/Lx) cos(my pi y/Ly) s(p)

    ``shape`` is ``(s, ds)``; by default s(p) = (p0-p1)/pi sin(pi (p-p1)/(p0-p1)).
    ``modulation`` multiplies the field by a function of t.
    """

    amplitude: float = 1.0
    mx: int = 1
    my: int = 1
    shape: tuple[Callable, Callable] | None = None
    modulation: Callable[[float], float] | None = None
    # integrability exponents (r, q) of the velocity class; metadata only
    regularity: tuple[float, float] = (float("inf"), float("inf"))

    def shape_functions(self, grid: Grid):
        return self.shape if self.shape is not None else _default_shape(grid.p0, grid.p1)

    def check(self, grid: Grid) -> None:
        s, _ = self.shape_functions(grid)
        pp = np.linspace(grid.p1, grid.p0, 257)
        scale = max(float(np.max(np.abs(s(pp)))), 1e-300)
        for pb in (grid.p0, grid.p1):
            if abs(float(s(pb))) > 1e-12 * scale:
                raise ConfigError(f"vertical shape must vanish at p={pb}, got s={float(s(pb)):g}")
        if int(self.mx) != self.mx or int(self.my) != self.my or self.mx < 1 or self.my < 1:
            raise ConfigError("mode counts must be positive integers")


def _cell_avg_cos(k, L, faces, h):
    # average of cos(k pi x / L) over each cell
    return (np.sin(k * np.pi * faces[1:] / L) - np.sin(k * np.pi * faces[:-1] / L)) / (k * np.pi * h / L)


def analytic_velocity(spec: AnalyticFlowSpec, grid: Grid, t: float = 0.0) -> VelocityField:
    spec.check(grid)
    s, ds = spec.shape_functions(grid)
    A = spec.amplitude * (spec.modulation(t) if spec.modulation is not None else 1.0)
    ax, ay = spec.mx * np.pi / grid.Lx, spec.my * np.pi / grid.Ly
    P, Y, X = grid.mesh()
    sp, dsp = s(P), ds(P)
    u = A * np.sin(ax * X) * np.cos(ay * Y) * dsp
    v = A * np.cos(ax * X) * np.sin(ay * Y) * dsp
    omega = -A * (ax + ay) * np.cos(ax * X) * np.cos(ay * Y) * sp
    # exact face averages: the discrete divergence then telescopes to zero
    cx = _cell_avg_cos(spec.mx, grid.Lx, grid.x_faces, grid.dx)
    cy = _cell_avg_cos(spec.my, grid.Ly, grid.y_faces, grid.dy)
    s_faces = s(grid.p_faces)
    sbar = (s_faces[:-1] - s_faces[1:]) / grid.dp  # cell average of s'
    uf = A * np.sin(ax * grid.x_faces)[None, None, :] * cy[None, :, None] * sbar[:, None, None]
    vf = A * cx[None, None, :] * np.sin(ay * grid.y_faces)[None, :, None] * sbar[:, None, None]
    wf = -A * (ax + ay) * cx[None, None, :] * cy[None, :, None] * s_faces[:, None, None]
    # sin(m pi) is ~1e-16, not zero; the boundary faces are exactly impermeable
    uf[:, :, [0, -1]] = 0.0
    vf[:, [0, -1], :] = 0.0
    wf[[0, -1]] = 0.0
    return VelocityField(u, v, omega, uf, vf, wf, t)


def face_divergence(vel: VelocityField, grid: Grid) -> np.ndarray:
    """Discrete divergence of the face components (what the transport sees)."""
    return (np.diff(vel.uf, axis=2) / grid.dx + np.diff(vel.vf, axis=1) / grid.dy
            - np.diff(vel.wf, axis=0) / grid.dp)


def project_faces(u, v, omega, grid: Grid):
    """Face components from centre samples, projected to zero discrete divergence.

    Centre values are averaged to interior faces, boundary faces are set to
    zero, and a Neumann Poisson problem (diagonal in the DCT-II basis) removes
    the remaining divergence.
    """
    n_p, ny, nx = grid.interior_shape
    uf = np.zeros((n_p, ny, nx + 1))
    vf = np.zeros((n_p, ny + 1, nx))
    wk = np.zeros((n_p + 1, ny, nx))  # velocity along +k, i.e. -omega
    uf[:, :, 1:-1] = 0.5 * (u[:, :, 1:] + u[:, :, :-1])
    vf[:, 1:-1, :] = 0.5 * (v[:, 1:, :] + v[:, :-1, :])
    wk[1:-1] = -0.5 * (omega[1:] + omega[:-1])
    div = np.diff(uf, axis=2) / grid.dx + np.diff(vf, axis=1) / grid.dy + np.diff(wk, axis=0) / grid.dp
    eig = 0.0
    for n, h, ax in ((nx, grid.dx, 2), (ny, grid.dy, 1), (n_p, grid.dp, 0)):
        lam = (2.0 * np.cos(np.pi * np.arange(n) / n) - 2.0) / h**2
        shape = [1, 1, 1]
        shape[ax] = n
        eig = eig + lam.reshape(shape)
    dhat = fft.dctn(div, type=2, norm="ortho")
    eig = np.where(eig == 0.0, 1.0, eig)
    phihat = dhat / eig
    phihat[0, 0, 0] = 0.0
    phi = fft.idctn(phihat, type=2, norm="ortho")
    uf[:, :, 1:-1] -= np.diff(phi, axis=2) / grid.dx
    vf[:, 1:-1, :] -= np.diff(phi, axis=1) / grid.dy
    wk[1:-1] -= np.diff(phi, axis=0) / grid.dp
    return uf, vf, -wk


def velocity_from_centres(u, v, omega, grid: Grid, t: float = 0.0) -> VelocityField:
    uf, vf, wf = project_faces(u, v, omega, grid)
    return VelocityField(np.array(u, float), np.array(v, float), np.array(omega, float), uf, vf, wf, t)


@dataclass
class ValidationReport:
    max_divergence: float
    max_normal_flux: float
    max_face_divergence: float
    div_tol: float
    flux_tol: float
    failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def as_dict(self) -> dict:
        return {"max_divergence": self.max_divergence, "max_normal_flux": self.max_normal_flux,
                "max_face_divergence": self.max_face_divergence, "div_tol": self.div_tol,
                "flux_tol": self.flux_tol, "passed": self.passed, "failures": list(self.failures)}


def _extrapolate(a, axis, side):
    # second-order value on the boundary face from the two nearest centres
    idx0, idx1 = (0, 1) if side == 0 else (-1, -2)
    return 1.5 * np.take(a, idx0, axis=axis) - 0.5 * np.take(a, idx1, axis=axis)


def velocity_scale(vel: VelocityField, grid: Grid) -> float:
    """A rate (1/time) built from the field magnitudes and domain size."""
    return (float(np.max(np.abs(vel.u), initial=0.0)) / grid.Lx
            + float(np.max(np.abs(vel.v), initial=0.0)) / grid.Ly
            + float(np.max(np.abs(vel.omega), initial=0.0)) / (grid.p0 - grid.p1))


def curvature_scale(vel: VelocityField, grid: Grid) -> tuple[float, float]:
    """Truncation-error estimates from finite differences of the centre samples.

    Returns the largest second difference (the wall extrapolation errs by
    about 3/8 of it) and the largest third difference over the step (the
    second-order derivatives err by a third of it at the walls, less inside).
    """
    d2max, d3max = 0.0, 0.0
    for a in (vel.u, vel.v, vel.omega):
        for axis, h in ((2, grid.dx), (1, grid.dy), (0, grid.dp)):
            if a.shape[axis] >= 3:
                d2max = max(d2max, float(np.max(np.abs(np.diff(a, 2, axis=axis)))))
            if a.shape[axis] >= 4:
                d3max = max(d3max, float(np.max(np.abs(np.diff(a, 3, axis=axis)))) / h)
    return d2max, d3max


def validate_velocity(vel: VelocityField, grid: Grid, div_tol: float | None = None,
                      flux_tol: float | None = None) -> ValidationReport:
    """Divergence residual and boundary normal component of the centre samples.

    Derivatives are second-order (one-sided at the walls), so for smooth
    fields both residuals decay like h^2.  Default tolerances are ten times
    a truncation-error estimate built from finite differences of the
    samples (see :func:`curvature_scale`), plus a rounding floor.  A field
    that is linear along every axis therefore gets no slack at all.
    """
    scale = velocity_scale(vel, grid)
    c_flux, c_div = curvature_scale(vel, grid)
    floor = 1e-12 * scale * max(grid.Lx, grid.Ly, grid.p0 - grid.p1)
    if div_tol is None:
        div_tol = 10.0 * c_div + 1e-12 * scale
    if flux_tol is None:
        flux_tol = 10.0 * c_flux + floor
    div = (np.gradient(vel.u, grid.x, axis=2, edge_order=2)
           + np.gradient(vel.v, grid.y, axis=1, edge_order=2)
           + np.gradient(vel.omega, grid.p, axis=0, edge_order=2))
    # normal components: u on x-walls, v on y-walls, omega on p-walls
    flux = max(float(np.max(np.abs(_extrapolate(vel.u, 2, s)))) for s in (0, 1))
    flux = max(flux, *(float(np.max(np.abs(_extrapolate(vel.v, 1, s)))) for s in (0, 1)))
    flux = max(flux, *(float(np.max(np.abs(_extrapolate(vel.omega, 0, s)))) for s in (0, 1)))
    flux = max(flux, float(np.max(np.abs(vel.uf[:, :, [0, -1]]))), float(np.max(np.abs(vel.vf[:, [0, -1], :]))),
               float(np.max(np.abs(vel.wf[[0, -1]]))))
    fdiv = float(np.max(np.abs(face_divergence(vel, grid))))
    max_div = float(np.max(np.abs(div)))
    failures = []
    if not np.isfinite(max_div) or max_div > div_tol:
        failures.append(f"divergence residual {max_div:.3e} exceeds {div_tol:.3e}")
    if not np.isfinite(flux) or flux > flux_tol:
        failures.append(f"boundary normal component {flux:.3e} exceeds {flux_tol:.3e}")
    face_tol = 1e-10 * max(scale, 1e-300)
    if fdiv > face_tol:
        failures.append(f"face divergence {fdiv:.3e} exceeds {face_tol:.3e}")
    return ValidationReport(max_div, flux, fdiv, float(div_tol), float(flux_tol), failures)


class AnalyticVelocity:
    """Provider ``t -> VelocityField`` for the analytic family."""

    def __init__(self, spec: AnalyticFlowSpec, grid: Grid):
        spec.check(grid)
        self.spec, self.grid = spec, grid
        self._steady = analytic_velocity(spec, grid, 0.0) if spec.modulation is None else None

    def __call__(self, t: float) -> VelocityField:
        if self._steady is not None:
            v = self._steady
            return VelocityField(v.u, v.v, v.omega, v.uf, v.vf, v.wf, t)
        return analytic_velocity(self.spec, self.grid, t)


class ZeroVelocity:
    def __init__(self, grid: Grid):
        self._v = VelocityField.zeros(grid)

    def __call__(self, t: float) -> VelocityField:
        return self._v


class VelocitySeries:
    """Piecewise-linear-in-time interpolation between stored frames.

    Outside the stored time range the nearest frame is returned.
    """

    def __init__(self, times: Sequence[float], frames: Sequence[VelocityField]):
        if len(times) != len(frames) or not frames:
            raise ConfigError("need one time stamp per frame and at least one frame")
        order = np.argsort(times, kind="stable")
        self.times = np.asarray(times, dtype=float)[order]
        if np.any(np.diff(self.times) <= 0):
            raise ConfigError("frame times must be distinct")
        self.frames = [frames[i] for i in order]

    def __call__(self, t: float) -> VelocityField:
        ts = self.times
        if len(ts) == 1 or t <= ts[0]:
            return self.frames[0].scaled(1.0, t)
        if t >= ts[-1]:
            return self.frames[-1].scaled(1.0, t)
        i = int(np.searchsorted(ts, t, side="right")) - 1
        a = (t - ts[i]) / (ts[i + 1] - ts[i])
        f0, f1 = self.frames[i], self.frames[i + 1]
        mix = lambda x0, x1: (1.0 - a) * x0 + a * x1  # noqa: E731
        return VelocityField(mix(f0.u, f1.u), mix(f0.v, f1.v), mix(f0.omega, f1.omega),
                             mix(f0.uf, f1.uf), mix(f0.vf, f1.vf), mix(f0.wf, f1.wf), t)


def write_velocity_series(path, grid: Grid, times: Sequence[float], frames: Sequence[VelocityField]) -> None:
    """Little-endian binary: header, frame times (f8), then u, v, omega per frame."""
    n_p, ny, nx = grid.interior_shape
    with open(path, "wb") as fh:
        _write_velocity_block(fh, (nx, ny, n_p), times, frames)


def _write_velocity_block(fh, dims, times, frames, magic=VELOCITY_MAGIC):
    nx, ny, n_p = dims
    fh.write(_HEADER.pack(magic, FORMAT_VERSION, nx, ny, n_p, len(frames)))
    fh.write(np.asarray(times, dtype="<f8").tobytes())
    for fr in frames:
        for a in (fr.u, fr.v, fr.omega):
            if a.shape != (n_p, ny, nx):
                raise ValueError(f"frame array shape {a.shape} does not match grid {(n_p, ny, nx)}")
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def _read_f8(fh, n: int, what: str) -> np.ndarray:
    """Exactly ``n`` little-endian doubles from ``fh``."""
    raw = fh.read(8 * n)
    if len(raw) != 8 * n:
        raise ValueError(f"truncated {what}")
    return np.frombuffer(raw, dtype="<f8").astype(float)


def _read_velocity_block(fh, magic=VELOCITY_MAGIC):
    raw = fh.read(_HEADER.size)
    if len(raw) != _HEADER.size:
        raise ValueError("truncated header")
    mg, version, nx, ny, n_p, nframes = _HEADER.unpack(raw)
    if mg != magic:
        raise ValueError(f"bad magic {mg!r}, expected {magic!r}")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported format version {version}")
    times = _read_f8(fh, nframes, "frame times")
    n = nx * ny * n_p
    arrays = []
    for _ in range(nframes):
        buf = _read_f8(fh, 3 * n, "frame data")
        arrays.append(tuple(buf[i * n:(i + 1) * n].reshape(n_p, ny, nx) for i in range(3)))
    return (nx, ny, n_p), times, arrays


def read_velocity_series(path):
    """Raw file contents: ``(dims, times, [(u, v, omega), ...])``."""
    with open(path, "rb") as fh:
        return _read_velocity_block(fh)


def load_velocity_series(path, grid: Grid, div_tol: float | None = None,
                         flux_tol: float | None = None) -> VelocitySeries:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    (nx, ny, n_p), times, arrays = read_velocity_series(path)
    if (n_p, ny, nx) != grid.interior_shape:
        raise ConfigError(f"velocity file dimensions {(nx, ny, n_p)} do not match grid "
                          f"{(grid.nx, grid.ny, grid.n_p)}")
    frames = []
    for t, (u, v, w) in zip(times, arrays):
        fr = velocity_from_centres(u, v, w, grid, float(t))
        rep = validate_velocity(fr, grid, div_tol, flux_tol)
        if not rep.passed:
            raise ConfigError(f"frame at t={t} rejected: {'; '.join(rep.failures)}")
        frames.append(fr)
    return VelocitySeries(times, frames)
