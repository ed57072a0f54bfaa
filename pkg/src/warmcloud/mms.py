"""Manufactured solutions for the full truncated system.

Targets are sympy expressions in (x, y, p, t).  The transport part of the
residual (advection, diffusion, sedimentation) is differentiated
symbolically; pointwise terms (phase changes and the two extra temperature
terms) are evaluated numerically at the exact cell-centre state, which is
exact for a collocated scheme.  Boundary data are induced from the targets
through the Robin relation ``b = f + dn f / alpha``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import sympy as sp

from .core import FIELDS, BoundarySpec, FieldBC, GridConfig, MoistState, PhysParams, build_grid
from .microphysics import phase_change_tendencies
from .solver import Model, StepControl, simulate
from .thermo import moist_coeffs
from .velocity import AnalyticFlowSpec, AnalyticVelocity

x, y, p, t = sp.symbols("x y p t", real=True)


def _lam(expr):
    f = sp.lambdify((x, y, p, t), expr, modules="numpy")

    def call(X, Y, P, T):
        return np.broadcast_to(f(X, Y, P, T), np.broadcast(X, Y, P).shape).astype(float)

    return call


@dataclass
class MMSCase:
    name: str
    targets: dict
    params: PhysParams
    Lx: float = 1.0
    Ly: float = 1.0
    p0: float = 1.0
    p1: float = 0.2
    Tbar: sp.Expr = sp.Integer(1)
    amplitude: float = 0.0
    alpha0: float = 2.0
    alphal: float = 1.5
    t_end: float = 0.1
    sources: bool = True
    sedimentation: bool = True
    scheme: str = "euler"
    expected_order: float = 2.0
    _compiled: dict = field(default=None, repr=False)

    def velocity_symbols(self):
        A = self.amplitude
        ax, ay = sp.pi / self.Lx, sp.pi / self.Ly
        D = self.p0 - self.p1
        s = D / sp.pi * sp.sin(sp.pi * (p - self.p1) / D)
        u = A * sp.sin(ax * x) * sp.cos(ay * y) * sp.diff(s, p)
        v = A * sp.cos(ax * x) * sp.sin(ay * y) * sp.diff(s, p)
        w = -A * (ax + ay) * sp.cos(ax * x) * sp.cos(ay * y) * s
        return u, v, w

    def compile(self):
        if self._compiled is not None:
            return self._compiled
        par = self.params
        u, v, om = self.velocity_symbols()
        wgt = par.g * p / (par.R_d * self.Tbar)
        rho = p / (par.R_d * self.Tbar)
        out = {"forcing": {}, "exact": {}, "dTdp": None, "bc": {}}
        for name in FIELDS:
            f = self.targets[name]
            mu, nu = par.diffusivities(name)
            L = -(u * sp.diff(f, x) + v * sp.diff(f, y) + om * sp.diff(f, p))
            L += mu * (sp.diff(f, x, 2) + sp.diff(f, y, 2)) + nu * sp.diff(wgt**2 * sp.diff(f, p), p)
            if name == "qr" and self.sedimentation:
                L += -par.V * sp.diff(rho * f, p)
            out["forcing"][name] = _lam(sp.diff(f, t) - L)
            out["exact"][name] = _lam(f)
            # Robin data: bottom dp f = a0 (b0 - f); lateral dn f = al (bl - f)
            b0 = f + sp.diff(f, p) / self.alpha0
            fx, fy = sp.diff(f, x) / self.alphal, sp.diff(f, y) / self.alphal
            bx0, bx1, by0, by1 = _lam(f - fx), _lam(f + fx), _lam(f - fy), _lam(f + fy)
            Lx, Ly = self.Lx, self.Ly

            def bl(X, Y, P, T, bx0=bx0, bx1=bx1, by0=by0, by1=by1, Lx=Lx, Ly=Ly):
                X, Y, P = np.broadcast_arrays(X, Y, P)
                out_ = np.zeros(X.shape)
                on = [(X == 0.0, bx0), (X == Lx, bx1), (Y == 0.0, by0), (Y == Ly, by1)]
                for mask, fn in on:
                    if mask.any():
                        out_[mask] = fn(X[mask], Y[mask], P[mask], T)
                return out_

            out["bc"][name] = FieldBC(self.alpha0, _lam(b0), self.alphal, bl)
            top = sp.simplify(sp.diff(f, p).subs(p, self.p1))
            if top != 0:
                raise ValueError(f"target {name} must satisfy dp f = 0 at the top, got {top}")
        if self.sedimentation and self.params.V > 0:
            if sp.simplify(self.targets["qr"].subs(p, self.p1)) != 0:
                raise ValueError("with sedimentation the rain target must vanish at the top")
        out["dTdp"] = _lam(sp.diff(self.targets["T"], p))
        out["omega"] = _lam(om)
        out["Tbar"] = sp.lambdify(p, self.Tbar + 0 * p, modules="numpy")
        self._compiled = out
        return out

    def setup(self, n: int, workers: int = 1):
        """(model, initial state, exact(t)) on an n^3 grid."""
        c = self.compile()
        par = self.params
        grid = build_grid(GridConfig(n, n, n, self.Lx, self.Ly, self.p0, self.p1, c["Tbar"]), par)
        P, Y, X = grid.mesh()
        bc = BoundarySpec(**c["bc"])
        vel = AnalyticVelocity(AnalyticFlowSpec(amplitude=self.amplitude), grid)
        V = par.V if self.sedimentation else 0.0

        def exact(tt):
            return {name: c["exact"][name](X, Y, P, tt) for name in FIELDS}

        def forcing(tt):
            ex = exact(tt)
            fo = {name: c["forcing"][name](X, Y, P, tt) for name in FIELDS}
            T, qv, qc, qr = (ex[n_] for n_ in FIELDS)
            co = moist_coeffs(qv, qc, qr, T, par)
            om = c["omega"](X, Y, P, tt)
            extra = co.kappa_tilde * T * om / P - par.c_l * np.maximum(qr, 0) * co.inv_C * V * c["dTdp"](X, Y, P, tt)
            fo["T"] = fo["T"] - extra
            if self.sources:
                for name, d in zip(FIELDS, phase_change_tendencies(P, T, qv, qc, qr, par)):
                    fo[name] = fo[name] - d
            return fo

        model = Model(grid, par, bc, vel, sources=self.sources, sedimentation=self.sedimentation,
                      forcing=forcing, workers=workers)
        state = MoistState.from_interior(grid, 0.0, **exact(0.0))
        return model, state, exact


@dataclass
class ObservedOrders:
    levels: list
    h: list
    errors: dict
    orders: dict
    monotone: dict

    @property
    def flagged(self) -> list[str]:
        return [k for k, ok in self.monotone.items() if not ok]

    def as_dict(self) -> dict:
        return {"levels": list(self.levels), "h": list(self.h), "errors": self.errors,
                "orders": self.orders, "monotone": self.monotone, "flagged": self.flagged}


# errors below this are treated as exact (no order is fitted)
ROUNDING = 1e-12


def l2_error(a, b, cell_volume):
    return float(np.sqrt(np.sum((a - b) ** 2) * cell_volume))


def run_case(case: MMSCase, n: int, workers: int = 1) -> dict[str, float]:
    model, state, exact = case.setup(n, workers)
    res = simulate(state, model, StepControl(t_end=case.t_end, scheme=case.scheme))
    ex = exact(res.state.t)
    return {name: l2_error(res.state.interior(name), ex[name], model.grid.cell_volume) for name in FIELDS}


def mms_convergence(case: MMSCase, levels=(16, 32, 64), workers: int = 1) -> ObservedOrders:
    """L2 error per field and level at ``t_end`` plus least-squares observed orders."""
    if len(levels) < 3:
        raise ValueError("a convergence study needs at least 3 levels")
    levels = sorted(levels)
    h = [1.0 / n for n in levels]
    errors = {name: [] for name in FIELDS}
    for n in levels:
        for name, e in run_case(case, n, workers).items():
            errors[name].append(e)
    orders, monotone = {}, {}
    for name, e in errors.items():
        e = np.asarray(e)
        at_rounding = bool(e.max() <= ROUNDING)
        monotone[name] = at_rounding or bool(np.all(np.diff(e) < 0))
        if np.all(e > 0) and not at_rounding:
            orders[name] = float(np.polyfit(np.log(h), np.log(e), 1)[0])
        else:
            orders[name] = float("nan")
    return ObservedOrders(levels, h, errors, orders, monotone)


def _tbar_profile():
    return 1.0 - 0.25 * (1.0 - p)


def diffusion_case(**kw) -> MMSCase:
    """No flow and no fallout; second order is expected."""
    D = 0.8
    Z = sp.cos(sp.pi * (p - 0.2) / D)
    decay = sp.exp(-t)
    H = sp.cos(1.3 * x + 0.4) * sp.cos(0.9 * y + 0.2)
    targets = {
        "T": 1.0 + 0.1 * decay * H * Z,
        "qv": 0.02 + 0.005 * decay * H * Z,
        "qc": 0.004 + 0.001 * sp.sin(1.1 * x + 0.5) * sp.cos(0.7 * y) * Z * decay,
        "qr": 0.002 + 0.0005 * sp.cos(0.8 * x) * sp.sin(1.2 * y + 0.3) * Z * decay,
    }
    par = PhysParams.nondimensional(V=0.0, **{f"{k}_{n}": 0.01 for k in ("mu", "nu") for n in FIELDS})
    base = dict(name="diffusion", targets=targets, params=par, Tbar=_tbar_profile(), amplitude=0.0,
                t_end=0.2, sedimentation=False, expected_order=2.0)
    base.update(kw)
    return MMSCase(**base)


def advection_case(**kw) -> MMSCase:
    """Analytic flow with first-order upwinding and rain fallout; first order is expected."""
    D = 0.8
    Z = sp.cos(sp.pi * (p - 0.2) / D)
    S2 = sp.sin(sp.pi * (p - 0.2) / D) ** 2  # vanishes with its derivative at the top
    H = sp.cos(1.3 * x + 0.4) * sp.cos(0.9 * y + 0.2)
    targets = {
        "T": 1.0 + 0.1 * H * Z * sp.cos(t),
        "qv": 0.02 + 0.005 * sp.sin(2.0 * x + 0.3) * sp.cos(y) * Z * sp.exp(-t),
        "qc": 0.004 + 0.001 * H * Z * sp.exp(-t),
        "qr": 0.002 * S2 * (1 + 0.5 * sp.cos(1.7 * x) * sp.sin(y + 0.4)) * sp.exp(-0.5 * t),
    }
    par = PhysParams.nondimensional(V=0.2)
    base = dict(name="advection", targets=targets, params=par, Tbar=_tbar_profile(), amplitude=1.0,
                t_end=0.2, sedimentation=True, expected_order=1.0)
    base.update(kw)
    return MMSCase(**base)


def constant_case(**kw) -> MMSCase:
    """Constant targets with matching boundary data: the scheme must keep them to rounding."""
    targets = {"T": sp.Float(1.0), "qv": sp.Float(0.01), "qc": sp.Float(0.002), "qr": sp.Float(0.001)}
    par = PhysParams.nondimensional(V=0.0)
    base = dict(name="constant", targets=targets, params=par, amplitude=1.0, t_end=0.05,
                sedimentation=False, expected_order=float("nan"))
    base.update(kw)
    return MMSCase(**base)


CASES = {"diffusion": diffusion_case, "advection": advection_case, "constant": constant_case}
