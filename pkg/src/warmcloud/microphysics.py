"""Kessler-type warm-rain source terms with positive-part truncation."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .core import PhysParams
from .thermo import moist_coeffs, saturation_mixing_ratio


class SourceRates(NamedTuple):
    S_ev: np.ndarray
    S_cd: np.ndarray
    S_ac: np.ndarray
    S_cr: np.ndarray


def _pos(a):
    return np.maximum(a, 0.0)


def source_rates(p, T, qv, qc, qr, params: PhysParams, qvs=None) -> SourceRates:
    """Evaporation, condensation, autoconversion and collection rates.

    The evaporation exponent is fixed to 1.  ``qvs`` may be passed when the
    saturation mixing ratio is already known.
    """
    if qvs is None:
        qvs = saturation_mixing_ratio(p, T, params)
    R = moist_coeffs(qv, qc, qr, T, params).R_tilde
    qvp, qcp, qrp = _pos(qv), _pos(qc), _pos(qr)
    S_ev = params.C_ev * R * _pos(T) * qrp * _pos(qvs - qv)
    S_cr = params.C_cr * qcp * qrp
    S_ac = params.C_ac * _pos(qc - params.q_ac_star)
    S_cd = params.C_cd * (qvp - qvs) * qcp + params.C_cn * _pos(qv - qvs)
    return SourceRates(S_ev, S_cd, S_ac, S_cr)


def untruncated_rates(p, T, qv, qc, qr, params: PhysParams) -> SourceRates:
    """Rates of the original (non '+') closure, meaningful for nonnegative input."""
    qvs = saturation_mixing_ratio(p, T, params)
    R = (params.R_d + params.R_v * qv) / (1.0 + qv + qc + qr)
    return SourceRates(
        params.C_ev * R * T * qr * _pos(qvs - qv),
        params.C_cd * (qv - qvs) * qc + params.C_cn * _pos(qv - qvs),
        params.C_ac * _pos(qc - params.q_ac_star),
        params.C_cr * qc * qr,
    )


def phase_change_tendencies(p, T, qv, qc, qr, params: PhysParams):
    """Return (dT, dqv, dqc, dqr) from phase changes alone."""
    qvs = saturation_mixing_ratio(p, T, params)
    s = source_rates(p, T, qv, qc, qr, params, qvs=qvs)
    L_tilde = moist_coeffs(qv, qc, qr, T, params).L_tilde
    dqv = s.S_ev - s.S_cd
    dqc = s.S_cd - s.S_ac - s.S_cr
    dqr = s.S_ac + s.S_cr - s.S_ev
    dT = L_tilde * (s.S_cd - s.S_ev)
    return dT, dqv, dqc, dqr


def loss_rates(p, T, qv, qc, qr, params: PhysParams, qvs=None):
    """Per-cell linear loss coefficients of the sources, for each of (T, qv, qc, qr).

    Each source can be written as ``gain - rate * value`` with ``rate >= 0``
    in the nonnegative regime; an explicit step with ``dt * rate <= 1`` then
    cannot drive the value negative.  For q_v the coefficient also covers the
    relaxation towards q_vs (the upper bound).
    """
    if qvs is None:
        qvs = saturation_mixing_ratio(p, T, params)
    c = moist_coeffs(qv, qc, qr, T, params)
    qcp, qrp, Tp = _pos(qc), _pos(qr), _pos(T)
    ev = params.C_ev * c.R_tilde * qrp
    r_qv = params.C_cd * qcp + params.C_cn + ev * Tp
    r_qc = params.C_ac + params.C_cr * qrp + params.C_cd * qvs
    r_qr = params.C_ev * c.R_tilde * Tp * qvs
    # evaporative cooling is proportional to T through the T^+ factor; cloud
    # evaporation only happens where q_vs > 0, i.e. where T > T_low
    r_T = np.abs(c.L_tilde) * (ev * _pos(qvs - qv)
                               + params.C_cd * qcp * _pos(qvs - qv) / np.maximum(Tp, params.T_low))
    return r_T, r_qv, r_qc, r_qr


def source_bound(q_star: tuple[float, float, float], params: PhysParams) -> float:
    """Upper bound of |S_cd| + |S_cr| + |S_ac| for q in [0, q*]^3 and any T.

    Uses 0 <= q_vs <= q_vs_max.
    """
    qv_s, qc_s, qr_s = q_star
    qvs = params.q_vs_max
    s_cd = params.C_cd * max(qv_s, qvs) * qc_s + params.C_cn * qv_s
    s_cr = params.C_cr * qc_s * qr_s
    s_ac = params.C_ac * max(qc_s - params.q_ac_star, 0.0)
    return s_cd + s_cr + s_ac
