"""Grid geometry, parameter registry and prognostic state.

Array layout is ``(n_p, ny, nx)`` (p-major, y-middle, x-minor) with one
ghost layer on every face, so a field has shape ``(n_p+2, ny+2, nx+2)``.
The vertical index ``k`` counts upward from the bottom boundary: cell ``k``
is centred at ``p0 - (k + 1/2) dp``, hence pressure *decreases* with ``k``.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

FIELDS = ("T", "qv", "qc", "qr")

# interior view of a ghosted field
INTERIOR = (slice(1, -1), slice(1, -1), slice(1, -1))


class ConfigError(ValueError):
    """Invalid grid, parameter or run configuration."""


@dataclass(frozen=True)
class PhysParams:
    """Physical constants, rate constants and diffusivities.

    Defaults are SI values for dry air / water.  ``kappa1`` is filled in
    with a certified upper bound of the moist ratio ``R/C`` when omitted.
    """

    R_d: float = 287.0
    R_v: float = 461.5
    c_pd: float = 1005.0
    c_pv: float = 1850.0
    c_l: float = 4186.0
    L0: float = 2.5e6
    T0: float = 273.15
    es0: float = 611.0
    g: float = 9.81
    V: float = 0.0
    C_ev: float = 1.0
    C_cd: float = 1.0
    C_cn: float = 1.0
    C_ac: float = 1.0
    C_cr: float = 1.0
    q_ac_star: float = 1e-3
    T_low: float = 150.0
    T_ramp: float = 5.0
    q_vs_max: float = 1.0
    p_ref: float = 1e5
    beta: float = 1.0
    mu_T: float = 1.0
    nu_T: float = 1.0
    mu_qv: float = 1.0
    nu_qv: float = 1.0
    mu_qc: float = 1.0
    nu_qc: float = 1.0
    mu_qr: float = 1.0
    nu_qr: float = 1.0
    kappa1: float | None = None

    def __post_init__(self):
        for name in ("R_d", "R_v", "c_pd", "c_pv", "c_l", "L0", "es0", "g", "T_ramp", "q_vs_max", "p_ref"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if not self.c_l > self.c_pv:
            raise ConfigError("c_l must exceed c_pv (latent heat has to decrease with T)")
        if not self.R_v > self.R_d:
            raise ConfigError("R_v must exceed R_d")
        if not self.T0 > self.T_low >= 0:
            raise ConfigError("need T0 > T_low >= 0")
        if self.beta != 1.0:
            raise ConfigError(
                f"beta={self.beta} is not supported: the evaporation exponent must be 1; "
                "the general case beta in (0,1) is left open by the well-posedness theory"
            )
        if self.V < 0:
            raise ConfigError("terminal velocity V must be nonnegative")
        for name in ("C_ev", "C_cd", "C_cn", "C_ac", "C_cr", "q_ac_star"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be nonnegative")
        for f in FIELDS:
            mu, nu = self.diffusivities(f)
            if not (mu > 0 and nu > 0):
                raise ConfigError(f"diffusivities of {f} must be positive")
        bound = max(self.R_d, self.R_v) / self.c_pd
        if self.kappa1 is None:
            object.__setattr__(self, "kappa1", bound)
        elif self.kappa1 < bound:
            raise ConfigError(f"kappa1={self.kappa1} is below the certified bound {bound}")
        if self.T_crit - self.T_ramp <= self.T_low + self.T_ramp:
            raise ConfigError("saturation band (T_low + T_ramp, T_crit - T_ramp) is empty")

    @property
    def E(self) -> float:
        return self.R_d / self.R_v

    @property
    def dc(self) -> float:
        """c_l - c_pv, the slope of the latent heat."""
        return self.c_l - self.c_pv

    @property
    def T_crit(self) -> float:
        return self.T0 + self.L0 / (self.c_l - self.c_pv)

    def diffusivities(self, name: str) -> tuple[float, float]:
        return getattr(self, f"mu_{name}"), getattr(self, f"nu_{name}")

    def replace(self, **changes) -> "PhysParams":
        if "kappa1" not in changes:
            changes["kappa1"] = None
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def nondimensional(cls, **overrides) -> "PhysParams":
        """Scaled constants: R_d = g = T0 = 1, pressure in units of 1000 hPa.

        Ratios c/R_d, L0/(R_d T0) and es0/p_ref match the SI defaults, so
        the saturation curve has its physical shape while all rates are O(1).
        """
        base = dict(
            R_d=1.0, R_v=461.5 / 287.0, c_pd=1005.0 / 287.0, c_pv=1850.0 / 287.0,
            c_l=4186.0 / 287.0, L0=2.5e6 / (287.0 * 273.15), T0=1.0, es0=611.0 / 1e5,
            g=1.0, V=0.1, T_low=0.5, T_ramp=0.02, p_ref=1.0,
            mu_T=1e-3, nu_T=1e-3, mu_qv=1e-3, nu_qv=1e-3,
            mu_qc=1e-3, nu_qc=1e-3, mu_qr=1e-3, nu_qr=1e-3,
        )
        base.update(overrides)
        return cls(**base)


TbarSpec = Union[float, Callable[[np.ndarray], np.ndarray], np.ndarray]


@dataclass(frozen=True)
class GridConfig:
    nx: int
    ny: int
    n_p: int
    Lx: float = 1.0
    Ly: float = 1.0
    p0: float = 1e5
    p1: float = 2e4
    Tbar: TbarSpec = 250.0


class Grid:
    """Uniform cell-centred discretisation of (0,Lx) x (0,Ly) x (p1,p0).

    ``w`` is the vertical diffusion weight g p / (R_d Tbar) at cell centres
    and ``w_faces`` its geometric interpolation to the ``n_p + 1`` p-faces
    (face ``m`` sits at ``p0 - m dp``; face 0 is the bottom, face n_p the top).
    """

    def __init__(self, nx, ny, n_p, Lx, Ly, p0, p1, tbar, R_d, g):
        self.nx, self.ny, self.n_p = int(nx), int(ny), int(n_p)
        self.Lx, self.Ly = float(Lx), float(Ly)
        self.p0, self.p1 = float(p0), float(p1)
        self.dx = self.Lx / self.nx
        self.dy = self.Ly / self.ny
        self.dp = (self.p0 - self.p1) / self.n_p
        self.x = (np.arange(self.nx) + 0.5) * self.dx
        self.y = (np.arange(self.ny) + 0.5) * self.dy
        self.p = self.p0 - (np.arange(self.n_p) + 0.5) * self.dp
        self.x_faces = np.arange(self.nx + 1) * self.dx
        self.y_faces = np.arange(self.ny + 1) * self.dy
        self.p_faces = self.p0 - np.arange(self.n_p + 1) * self.dp
        self.tbar = np.asarray(tbar, dtype=float)
        self.R_d, self.g = float(R_d), float(g)
        self.w = g * self.p / (R_d * self.tbar)
        wf = np.empty(self.n_p + 1)
        wf[1:-1] = np.sqrt(self.w[:-1] * self.w[1:])
        # end faces: geometric mean with a ghost weight extrapolated in log w,
        # quadratically when possible so the end cells stay second order
        lw = np.log(self.w)
        if self.n_p >= 3:
            g0 = 3 * lw[0] - 3 * lw[1] + lw[2]
            g1 = 3 * lw[-1] - 3 * lw[-2] + lw[-3]
        else:
            g0, g1 = 2 * lw[0] - lw[1], 2 * lw[-1] - lw[-2]
        wf[0] = np.exp(0.5 * (lw[0] + g0))
        wf[-1] = np.exp(0.5 * (lw[-1] + g1))
        self.w_faces = wf
        # p / (R_d Tbar) at faces, the sedimentation density factor
        self.rho_faces = wf / g
        self.cell_volume = self.dx * self.dy * self.dp
        self.shape = (self.n_p + 2, self.ny + 2, self.nx + 2)
        self.interior_shape = (self.n_p, self.ny, self.nx)
        for a in (self.x, self.y, self.p, self.x_faces, self.y_faces, self.p_faces,
                  self.tbar, self.w, self.w_faces, self.rho_faces):
            a.setflags(write=False)

    def __repr__(self):
        return (f"Grid(nx={self.nx}, ny={self.ny}, n_p={self.n_p}, Lx={self.Lx}, Ly={self.Ly}, "
                f"p0={self.p0}, p1={self.p1})")

    @property
    def w_bounds(self) -> tuple[float, float]:
        """Analytic bounds g p / (R_d Tbar) from the extremes of p and Tbar."""
        tmin, tmax = float(self.tbar.min()), float(self.tbar.max())
        return self.g * self.p1 / (self.R_d * tmax), self.g * self.p0 / (self.R_d * tmin)

    @property
    def volume(self) -> float:
        return self.Lx * self.Ly * (self.p0 - self.p1)

    def field(self, fill: float = 0.0) -> np.ndarray:
        return np.full(self.shape, fill, dtype=float)

    @staticmethod
    def interior(f: np.ndarray) -> np.ndarray:
        return f[INTERIOR]

    def mesh(self):
        """Broadcastable centre coordinates (P, Y, X)."""
        return (self.p[:, None, None], self.y[None, :, None], self.x[None, None, :])

    def h(self) -> float:
        """Largest relative spacing, used for refinement studies."""
        return max(self.dx / self.Lx, self.dy / self.Ly, self.dp / (self.p0 - self.p1))


def build_grid(config: GridConfig, params: PhysParams | None = None) -> Grid:
    params = params or PhysParams()
    c = config
    if min(c.nx, c.ny, c.n_p) < 2:
        raise ConfigError("nx, ny, n_p must all be >= 2")
    if not (c.Lx > 0 and c.Ly > 0):
        raise ConfigError("horizontal extents must be positive")
    if not c.p0 > c.p1 > 0:
        raise ConfigError(f"need p0 > p1 > 0, got p0={c.p0}, p1={c.p1}")
    dp = (c.p0 - c.p1) / c.n_p
    p = c.p0 - (np.arange(c.n_p) + 0.5) * dp
    if callable(c.Tbar):
        tbar = np.broadcast_to(np.asarray(c.Tbar(p), dtype=float), p.shape).copy()
    else:
        tbar = np.broadcast_to(np.asarray(c.Tbar, dtype=float), p.shape).copy()
    if not np.all(np.isfinite(tbar)) or tbar.min() <= 0:
        raise ConfigError("background temperature Tbar must be finite and strictly positive")
    return Grid(c.nx, c.ny, c.n_p, c.Lx, c.Ly, c.p0, c.p1, tbar, params.R_d, params.g)


def field_minmax(f: np.ndarray, grid: Grid | None = None) -> tuple[float, float]:
    """Extrema over the interior (over the whole array when ``grid`` is None)."""
    a = f[INTERIOR] if grid is not None else f
    if np.isnan(a).any():
        raise FloatingPointError("NaN in field interior")
    return float(a.min()), float(a.max())


@dataclass
class MoistState:
    """Prognostic fields (ghosted arrays) at time ``t``."""

    T: np.ndarray
    qv: np.ndarray
    qc: np.ndarray
    qr: np.ndarray
    t: float = 0.0

    @classmethod
    def zeros(cls, grid: Grid, t: float = 0.0) -> "MoistState":
        return cls(*(grid.field() for _ in FIELDS), t=t)

    @classmethod
    def from_interior(cls, grid: Grid, t: float = 0.0, **arrays) -> "MoistState":
        s = cls.zeros(grid, t)
        for name, a in arrays.items():
            s[name][INTERIOR] = a
        return s

    def __getitem__(self, name: str) -> np.ndarray:
        return getattr(self, name)

    def fields(self) -> dict[str, np.ndarray]:
        return {f: getattr(self, f) for f in FIELDS}

    def interior(self, name: str) -> np.ndarray:
        return getattr(self, name)[INTERIOR]

    def copy(self) -> "MoistState":
        return MoistState(*(getattr(self, f).copy() for f in FIELDS), t=self.t)


BoundaryFn = Callable[..., np.ndarray]


def _as_fn(v) -> BoundaryFn:
    if callable(v):
        return v
    value = float(v)
    return lambda x, y, p, t: np.full(np.broadcast(x, y, p).shape, value)


@dataclass
class FieldBC:
    """Robin data for one field.

    All four entries are functions of broadcastable ``(x, y, p, t)``.  The
    bottom face satisfies dp f = alpha0 (b0 - f), lateral faces
    dn f = alphal (bl - f); the top face is homogeneous Neumann.
    """

    alpha0: BoundaryFn = 0.0
    b0: BoundaryFn = 0.0
    alphal: BoundaryFn = 0.0
    bl: BoundaryFn = 0.0

    def __post_init__(self):
        self.alpha0 = _as_fn(self.alpha0)
        self.b0 = _as_fn(self.b0)
        self.alphal = _as_fn(self.alphal)
        self.bl = _as_fn(self.bl)


@dataclass
class BoundarySpec:
    T: FieldBC = field(default_factory=FieldBC)
    qv: FieldBC = field(default_factory=FieldBC)
    qc: FieldBC = field(default_factory=FieldBC)
    qr: FieldBC = field(default_factory=FieldBC)

    def __getitem__(self, name: str) -> FieldBC:
        return getattr(self, name)

    def boundary_samples(self, grid: Grid, t: float) -> dict[str, dict[str, np.ndarray]]:
        """Values of all coefficient/data functions on the boundary face centres."""
        out = {}
        for f in FIELDS:
            bc = self[f]
            xb, yb = grid.x[None, :], grid.y[:, None]
            X = np.concatenate([np.zeros(grid.n_p), np.full(grid.n_p, grid.Lx)])
            lat_x = (X[:, None], grid.y[None, :], np.concatenate([grid.p, grid.p])[:, None])
            Y = np.concatenate([np.zeros(grid.n_p), np.full(grid.n_p, grid.Ly)])
            lat_y = (grid.x[None, :], Y[:, None], np.concatenate([grid.p, grid.p])[:, None])
            out[f] = {
                "alpha0": np.asarray(bc.alpha0(xb, yb, grid.p0, t), dtype=float),
                "b0": np.asarray(bc.b0(xb, yb, grid.p0, t), dtype=float),
                "alphal": np.concatenate([np.ravel(bc.alphal(*lat_x, t)), np.ravel(bc.alphal(*lat_y, t))]),
                "bl": np.concatenate([np.ravel(bc.bl(*lat_x, t)), np.ravel(bc.bl(*lat_y, t))]),
            }
        return out

    def validate(self, grid: Grid, times) -> None:
        """Check nonnegativity and finiteness by sampling at the given times."""
        for t in times:
            for f, vals in self.boundary_samples(grid, t).items():
                for key, a in vals.items():
                    if not np.all(np.isfinite(a)):
                        raise ConfigError(f"boundary {f}.{key} is not finite at t={t}")
                    if a.min() < 0:
                        raise ConfigError(f"boundary {f}.{key} is negative ({a.min():g}) at t={t}")

    def sup(self, grid: Grid, times, name: str) -> float:
        """Largest boundary data value of one field over the sampled times."""
        best = 0.0
        for t in times:
            vals = self.boundary_samples(grid, t)[name]
            best = max(best, float(vals["b0"].max()), float(vals["bl"].max()))
        return best


def slab_map(func: Callable[[slice], None], n: int, workers: int = 1) -> None:
    """Run ``func`` over contiguous slabs of ``range(n)``.

    Every slab writes a disjoint output region, so results do not depend on
    ``workers``.
    """
    if workers <= 1 or n < 2:
        func(slice(0, n))
        return
    k = min(workers, n)
    edges = np.linspace(0, n, k + 1).astype(int)
    slabs = [slice(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]
    with ThreadPoolExecutor(max_workers=k) as pool:
        for fut in [pool.submit(func, s) for s in slabs]:
            fut.result()
