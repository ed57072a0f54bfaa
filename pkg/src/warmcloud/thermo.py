"""Pointwise moist thermodynamics.

All functions broadcast over numpy arrays.  Negative mixing ratios are
truncated at zero wherever the moist coefficients are formed.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .core import ConfigError, PhysParams


class MoistCoeffs(NamedTuple):
    R_tilde: np.ndarray
    C_tilde: np.ndarray
    kappa_tilde: np.ndarray
    L_tilde: np.ndarray
    inv_C: np.ndarray


def latent_heat(T, params: PhysParams):
    """L(T) = L0 - (c_l - c_pv)(T - T0)."""
    return params.L0 - params.dc * (np.asarray(T, dtype=float) - params.T0)


def critical_temperature(params: PhysParams) -> float:
    """Root of the latent heat, T0 + L0 / (c_l - c_pv)."""
    if not params.c_l > params.c_pv:
        raise ConfigError("critical temperature needs c_l > c_pv")
    return params.T0 + params.L0 / (params.c_l - params.c_pv)


def clausius_clapeyron(T, params: PhysParams):
    """Closed-form solution of d ln e_s/dT = L(T)/(R_v T^2), e_s(T0) = es0.

    No cutoffs are applied; defined for T > 0.
    """
    T = np.asarray(T, dtype=float)
    a = (params.L0 + params.dc * params.T0) / params.R_v
    b = params.dc / params.R_v
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        log_ratio = a * (1.0 / params.T0 - 1.0 / T) - b * np.log(T / params.T0)
        return params.es0 * np.exp(log_ratio)


def cutoff_ramp(T, params: PhysParams):
    """Piecewise linear factor: 0 outside (T_low, T_crit), 1 away from both ends."""
    T = np.asarray(T, dtype=float)
    lo = (T - params.T_low) / params.T_ramp
    hi = (params.T_crit - T) / params.T_ramp
    return np.clip(np.minimum(lo, hi), 0.0, 1.0)


def saturation_vapor_pressure(T, params: PhysParams):
    T = np.asarray(T, dtype=float)
    ramp = cutoff_ramp(T, params)
    inside = ramp > 0
    # evaluate the closed form only where it is used, T_low >= 0 may be 0
    safe_T = np.where(inside, T, params.T0)
    return np.where(inside, ramp * clausius_clapeyron(safe_T, params), 0.0)


def saturation_mixing_ratio(p, T, params: PhysParams):
    """q_vs = E e_s / (p - e_s), clamped to ``q_vs_max`` near the pole e_s -> p."""
    p = np.asarray(p, dtype=float)
    if np.any(p <= 0):
        raise ValueError("pressure must be positive")
    es = saturation_vapor_pressure(T, params)
    E, qmax = params.E, params.q_vs_max
    # e_s at which E e/(p - e) reaches qmax
    e_clamp = p * qmax / (E + qmax)
    below = es < e_clamp
    denom = np.where(below, p - es, 1.0)
    return np.where(below, E * es / denom, qmax)


def max_saturation_mixing_ratio(p_min: float, params: PhysParams, T_max: float | None = None,
                                samples: int = 200_001) -> float:
    """Largest q_vs over T in [T_low, min(T_max, T_crit)] at the lowest pressure.

    q_vs decreases in p, so the lowest pressure in the domain gives the max.
    """
    hi = params.T_crit if T_max is None else min(T_max, params.T_crit)
    if hi <= params.T_low:
        return 0.0
    T = np.linspace(params.T_low, hi, samples)
    extra = [params.T_crit - params.T_ramp, hi]
    T = np.concatenate([T, [t for t in extra if params.T_low <= t <= hi]])
    return float(np.max(saturation_mixing_ratio(p_min, T, params)))


def moist_coeffs(qv, qc, qr, T, params: PhysParams) -> MoistCoeffs:
    qv = np.maximum(qv, 0.0)
    qc = np.maximum(qc, 0.0)
    qr = np.maximum(qr, 0.0)
    R = (params.R_d + params.R_v * qv) / (1.0 + qv + qc + qr)
    C = params.c_pd + params.c_pv * qv + params.c_l * (qc + qr)
    inv_C = 1.0 / C
    return MoistCoeffs(R, C, R * inv_C, latent_heat(T, params) * inv_C, inv_C)


def kappa1_bound(params: PhysParams) -> float:
    """sup R/C <= max(R_d, R_v)/c_pd since R is a weighted mean of R_d, R_v and 0."""
    return max(params.R_d, params.R_v) / params.c_pd


def potential_temperature(T, p, params: PhysParams):
    p = np.asarray(p, dtype=float)
    if np.any(p <= 0):
        raise ValueError("pressure must be positive")
    kappa = params.R_d / params.c_pd
    return np.asarray(T, dtype=float) * (params.p_ref / p) ** kappa


def density(p, T, qv, qc, qr, params: PhysParams):
    """Total density from the moist ideal gas law p = rho R T."""
    T = np.asarray(T, dtype=float)
    if np.any(T <= 0):
        raise ValueError("density needs T > 0")
    R = moist_coeffs(qv, qc, qr, T, params).R_tilde
    return np.asarray(p, dtype=float) / (R * T)
