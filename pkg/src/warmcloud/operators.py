"""Finite-difference transport operators on the ghosted cell-centred grid.

Every operator reads a ghosted field and returns an interior-shaped
tendency array.  Conventions: face ``m`` along the vertical axis sits at
``p0 - m dp``; "downward" (towards larger p) is towards smaller ``k``.
"""

from __future__ import annotations

import numpy as np

from .core import INTERIOR, ConfigError, FieldBC, Grid, PhysParams
from .thermo import moist_coeffs
from .velocity import VelocityField


def robin_weights(alpha, h):
    """Ghost = a * inside + c * data, from (g - f)/h = alpha (b - (g + f)/2).

    a + c = 1; a >= 0 whenever alpha h <= 2.
    """
    r = 0.5 * alpha * h
    return (1.0 - r) / (1.0 + r), 2.0 * r / (1.0 + r)


def robin_coefficient(alpha, h):
    """(ghost - inside) = coef * (data - inside); coef = alpha h / (1 + alpha h / 2) < 2."""
    return alpha * h / (1.0 + 0.5 * alpha * h)


def apply_boundary_ghosts(f: np.ndarray, bc: FieldBC, grid: Grid, t: float) -> None:
    """Fill the ghost layer of ``f`` in place; the interior is left untouched."""
    x, y, p = grid.x, grid.y, grid.p
    n = f[INTERIOR]
    # bottom face, p = p0 (k = 0 side)
    X, Y = x[None, :], y[:, None]
    c = robin_coefficient(np.asarray(bc.alpha0(X, Y, grid.p0, t), dtype=float), grid.dp)
    b = np.asarray(bc.b0(X, Y, grid.p0, t), dtype=float)
    f[0, 1:-1, 1:-1] = n[0] + c * (b - n[0])
    # top face, homogeneous Neumann
    f[-1, 1:-1, 1:-1] = n[-1]
    # x walls, at x = 0 and x = Lx
    P, Y = p[:, None], y[None, :]
    for xw, gi, ii in ((0.0, 0, 0), (grid.Lx, -1, -1)):
        c = robin_coefficient(np.asarray(bc.alphal(xw, Y, P, t), dtype=float), grid.dx)
        b = np.asarray(bc.bl(xw, Y, P, t), dtype=float)
        f[1:-1, 1:-1, gi] = n[:, :, ii] + c * (b - n[:, :, ii])
    # y walls
    P, X = p[:, None], x[None, :]
    for yw, gj, jj in ((0.0, 0, 0), (grid.Ly, -1, -1)):
        c = robin_coefficient(np.asarray(bc.alphal(X, yw, P, t), dtype=float), grid.dy)
        b = np.asarray(bc.bl(X, yw, P, t), dtype=float)
        f[1:-1, gj, 1:-1] = n[:, jj, :] + c * (b - n[:, jj, :])


def _minmod(a, b):
    return np.where(a * b > 0, np.sign(a) * np.minimum(np.abs(a), np.abs(b)), 0.0)


def _face_states(f, axis, limiter):
    """Left/right reconstructed states at the interior-plus-boundary faces along ``axis``.

    ``f`` is ghosted along ``axis`` and interior along the others.
    """
    n = f.shape[axis]
    lo = np.take(f, range(0, n - 1), axis=axis)
    hi = np.take(f, range(1, n), axis=axis)
    if limiter is None:
        return lo, hi
    if limiter != "minmod":
        raise ValueError(f"unknown limiter {limiter!r}")
    d = np.diff(f, axis=axis)
    # slopes defined on cells 1..n-2; ghost cells get zero slope
    s = np.zeros_like(f)
    idx = [slice(None)] * f.ndim
    idx[axis] = slice(1, -1)
    s[tuple(idx)] = _minmod(np.take(d, range(0, n - 2), axis=axis), np.take(d, range(1, n - 1), axis=axis))
    left = lo + 0.5 * np.take(s, range(0, n - 1), axis=axis)
    right = hi - 0.5 * np.take(s, range(1, n), axis=axis)
    return left, right


def _upwind_flux(speed, left, right):
    return np.maximum(speed, 0.0) * left + np.minimum(speed, 0.0) * right


def advect(f: np.ndarray, vel: VelocityField, grid: Grid, limiter: str | None = None) -> np.ndarray:
    """-div(v f) with upwind fluxes through the faces of each cell."""
    fx = f[1:-1, 1:-1, :]
    fy = f[1:-1, :, 1:-1]
    fk = f[:, 1:-1, 1:-1]
    out = np.empty(grid.interior_shape)
    left, right = _face_states(fx, 2, limiter)
    Fx = _upwind_flux(vel.uf, left, right)
    np.subtract(Fx[:, :, :-1], Fx[:, :, 1:], out=out)
    out /= grid.dx
    left, right = _face_states(fy, 1, limiter)
    Fy = _upwind_flux(vel.vf, left, right)
    out += (Fy[:, :-1, :] - Fy[:, 1:, :]) / grid.dy
    # along +k the velocity is -omega; "left" is the higher-pressure cell
    left, right = _face_states(fk, 0, limiter)
    Fk = _upwind_flux(-vel.wf, left, right)
    out += (Fk[:-1] - Fk[1:]) / grid.dp
    return out


def horizontal_laplacian(f: np.ndarray, grid: Grid, mu: float) -> np.ndarray:
    c = f[1:-1, 1:-1, 1:-1]
    lap = (f[1:-1, 1:-1, 2:] - 2.0 * c + f[1:-1, 1:-1, :-2]) / grid.dx**2
    lap += (f[1:-1, 2:, 1:-1] - 2.0 * c + f[1:-1, :-2, 1:-1]) / grid.dy**2
    return mu * lap


def weighted_vertical_diffusion(f: np.ndarray, grid: Grid, nu: float) -> np.ndarray:
    """nu d/dp (w^2 df/dp) in flux form with w^2 at faces."""
    w2 = (grid.w_faces**2)[:, None, None]
    col = f[:, 1:-1, 1:-1]
    d = np.diff(col, axis=0)  # f[k+1] - f[k] across face k+1 (face 0 between ghost and cell 0)
    flux = w2 * d
    return nu * (flux[1:] - flux[:-1]) / grid.dp**2


def sedimentation(qr: np.ndarray, grid: Grid, V: float) -> np.ndarray:
    """-V d/dp (p qr / (R_d Tbar)), upwinded towards larger p.

    No rain enters through the top face; rain leaves freely through the bottom.
    """
    if V < 0:
        raise ConfigError("terminal velocity must be nonnegative")
    col = qr[1:-1, 1:-1, 1:-1]
    rho = grid.rho_faces[:, None, None]
    # downward flux through face m comes from cell m (the cell above it)
    flux = np.empty((grid.n_p + 1,) + col.shape[1:])
    flux[:-1] = V * rho[:-1] * col
    flux[-1] = 0.0
    return -(flux[:-1] - flux[1:]) / grid.dp


def rain_transport_speed(qv, qc, qr, T, params: PhysParams):
    """c_l qr^+ / C V: speed (towards larger p) at which falling rain carries T."""
    c = moist_coeffs(qv, qc, qr, T, params)
    return params.c_l * np.maximum(qr, 0.0) * c.inv_C * params.V


def temperature_extras(T: np.ndarray, qv, qc, qr, omega, grid: Grid, params: PhysParams,
                       coeffs=None) -> np.ndarray:
    """kappa T omega / p - (c_l qr / C) V dT/dp for the temperature equation.

    ``T`` is ghosted; moisture arguments and ``omega`` are interior arrays.
    """
    Ti = T[1:-1, 1:-1, 1:-1]
    c = coeffs if coeffs is not None else moist_coeffs(qv, qc, qr, Ti, params)
    P = grid.p[:, None, None]
    out = c.kappa_tilde * Ti * omega / P
    speed = params.c_l * np.maximum(qr, 0.0) * c.inv_C * params.V
    # upwind: information arrives from smaller p, i.e. from k + 1
    dTdp = (Ti - T[2:, 1:-1, 1:-1]) / grid.dp
    out -= speed * dTdp
    return out
