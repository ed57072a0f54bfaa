"""Acceptance suite: one test per criterion, each at its stated tolerance.

The closing pytest summary prints one PASS/FAIL line per criterion together
with the measured values.
"""

import math
import time

import numpy as np
import pytest
from scipy import integrate

from warmcloud.core import FIELDS, BoundarySpec, GridConfig, MoistState, PhysParams, build_grid
from warmcloud.diagnostics import total_mass
from warmcloud.driver import run
from warmcloud.microphysics import phase_change_tendencies, source_rates
from warmcloud.mms import advection_case, diffusion_case, mms_convergence
from warmcloud.scenarios import random_scenario
from warmcloud.solver import Model, StepControl, stable_dt, step
from warmcloud.thermo import latent_heat, moist_coeffs, saturation_vapor_pressure
from warmcloud.velocity import AnalyticFlowSpec, AnalyticVelocity, analytic_velocity, validate_velocity

pytestmark = pytest.mark.slow

EPS = np.finfo(float).eps
N_SCENARIOS = 20


def es_ode(T_eval, par):
    """e_s from adaptive integration of d ln e_s / dT = L(T) / (R_v T^2), outward from T0."""
    out = np.empty_like(T_eval)
    rhs = lambda T, y: [float(latent_heat(T, par)) / (par.R_v * T * T)]  # noqa: E731
    for mask, order in ((T_eval >= par.T0, 1), (T_eval < par.T0, -1)):
        if not mask.any():
            continue
        ts = np.sort(T_eval[mask])[::order]
        sol = integrate.solve_ivp(rhs, (par.T0, ts[-1]), [0.0], method="DOP853", t_eval=ts,
                                  rtol=1e-13, atol=1e-14)
        assert sol.success
        out[mask] = np.interp(T_eval[mask], sol.t[::order], sol.y[0][::order])
    return par.es0 * np.exp(out)


@pytest.mark.criterion(1)
@pytest.mark.parametrize("par", [PhysParams(), PhysParams.nondimensional()], ids=["si", "nondimensional"])
def test_thermo_oracle(par, measured):
    t0 = time.perf_counter()
    # the admissible band: above the low cutoff ramp, below the critical-temperature ramp
    T = np.linspace(par.T_low + par.T_ramp, par.T_crit - par.T_ramp, 200)
    ref = es_ode(T, par)
    got = saturation_vapor_pressure(T, par)
    elapsed = time.perf_counter() - t0
    rel = float(np.max(np.abs(got - ref) / ref))
    measured(1, f"{'si' if par.R_d != 1 else 'nd'}: max rel err {rel:.2e} over T in "
                f"[{T[0]:.4g}, {T[-1]:.4g}], {elapsed:.3f} s")
    assert rel <= 1e-8
    assert elapsed < 1.0


def _random_inputs(rng, n, par, lo):
    p = rng.uniform(0.2 * par.p_ref if par.R_d != 1 else 0.2, par.p_ref if par.R_d != 1 else 1.0, n)
    T = rng.uniform(0.0, 1.5 * par.T_crit, n)
    q = rng.uniform(lo, 0.05, (3, n))
    q[rng.random((3, n)) < 0.1] = 0.0
    return p, T, q


@pytest.mark.criterion(2)
@pytest.mark.parametrize("par", [PhysParams(), PhysParams.nondimensional()], ids=["si", "nondimensional"])
def test_microphysics_neutrality(par, measured):
    rng = np.random.default_rng(2024)
    n = 1_000_000
    t0 = time.perf_counter()
    # neutrality over signed inputs (the truncated rates must still telescope)
    p, T, q = _random_inputs(rng, n, par, -0.01)
    _, dqv, dqc, dqr = phase_change_tendencies(p, T, *q, par)
    s = source_rates(p, T, *q, par)
    scale = np.abs(s.S_ev) + np.abs(s.S_cd) + np.abs(s.S_ac) + np.abs(s.S_cr)
    resid = np.abs(dqv + dqc + dqr)
    neutral_bad = int(np.sum(resid > 4 * EPS * scale))
    ev_neg = int(np.sum(s.S_ev < 0))
    # sign conditions on admissible (nonnegative) moisture
    p, T, q = _random_inputs(rng, n, par, 0.0)
    s = source_rates(p, T, *q, par)
    L = moist_coeffs(*q, T, par).L_tilde
    heat_bad = int(np.sum(L * s.S_ev < 0)) + int(np.sum(s.S_ev < 0))
    hot = T >= par.T_crit
    crit_bad = int(np.sum(s.S_ev[hot] != 0))
    elapsed = time.perf_counter() - t0
    measured(2, f"{'si' if par.R_d != 1 else 'nd'}: max |dqv+dqc+dqr| {resid.max():.1e}, "
                f"failures neutral/S_ev<0/heat/T>=T_crit = {neutral_bad}/{ev_neg}/{heat_bad}/{crit_bad} "
                f"({int(hot.sum())} hot samples), {elapsed:.2f} s")
    assert neutral_bad == 0 and ev_neg == 0 and heat_bad == 0 and crit_bad == 0
    assert hot.sum() > 10000
    assert elapsed < 10.0


@pytest.mark.criterion(3)
@pytest.mark.parametrize("par", [PhysParams(), PhysParams.nondimensional()], ids=["si", "nondimensional"])
def test_coefficient_bounds(par, measured):
    rng = np.random.default_rng(33)
    n = 1_000_000
    # admissible: nonnegative mixing ratios (up to pure water) and temperature
    q = rng.uniform(0, 1, (3, n)) * rng.choice([1e-3, 1e-1, 1.0], size=(3, n))
    q[rng.random((3, n)) < 0.1] = 0.0
    T = rng.uniform(0, 2 * par.T_crit, n)
    c = moist_coeffs(*q, T, par)
    frac = par.c_l * q[2] * c.inv_C
    bad = (int(np.sum(~((c.kappa_tilde > 0) & (c.kappa_tilde <= par.kappa1))))
           + int(np.sum(~((frac >= 0) & (frac <= 1))))
           + int(np.sum(~(c.inv_C <= 1 / par.c_pd))))
    measured(3, f"{'si' if par.R_d != 1 else 'nd'}: kappa in [{c.kappa_tilde.min():.4f}, "
                f"{c.kappa_tilde.max():.4f}] (kappa1 {par.kappa1:.4f}), rain fraction max {frac.max():.4f}, "
                f"violations {bad}")
    assert bad == 0


@pytest.fixture(scope="module")
def mms_results():
    t0 = time.perf_counter()
    out = {c.name: (c, mms_convergence(c, levels=(16, 32, 64))) for c in (diffusion_case(), advection_case())}
    return out, time.perf_counter() - t0


@pytest.mark.criterion(4)
@pytest.mark.parametrize("name", ["diffusion", "advection"])
def test_mms_orders(mms_results, name, measured):
    results, elapsed = mms_results
    case, res = results[name]
    orders = ", ".join(f"{f} {res.orders[f]:.3f}" for f in FIELDS)
    measured(4, f"{name} (expect {case.expected_order}): {orders}; levels {res.levels}; "
                f"both studies {elapsed:.1f} s")
    assert not res.flagged
    for f in FIELDS:
        assert abs(res.orders[f] - case.expected_order) <= 0.2, f
    assert elapsed < 300.0


@pytest.mark.criterion(5)
def test_transport_conservation(measured):
    par = PhysParams.nondimensional()
    g = build_grid(GridConfig(32, 32, 32, p0=1.0, p1=0.2, Tbar=lambda p: 1 - 0.25 * (1 - p)), par)
    rng = np.random.default_rng(5)
    sh = g.interior_shape
    s = MoistState.from_interior(g, T=np.ones(sh), qv=0.01 * rng.random(sh), qc=0.001 * rng.random(sh),
                                 qr=0.001 * rng.random(sh))
    # all Robin coefficients zero, sources and fallout off
    vel = AnalyticVelocity(AnalyticFlowSpec(amplitude=0.5, mx=1, my=2), g)
    model = Model(g, par, bc=BoundarySpec(), velocity=vel, sources=False, sedimentation=False)
    ctrl = StepControl()
    m0 = np.array([total_mass(s[n], g) for n in ("qv", "qc", "qr")])
    drift = np.zeros(3)
    for _ in range(1000):
        s = step(s, model, ctrl, stable_dt(s, model, ctrl))
        m = np.array([total_mass(s[n], g) for n in ("qv", "qc", "qr")])
        drift = np.maximum(drift, np.abs(m - m0) / m0)
    measured(5, f"max relative drift qv/qc/qr over 1000 steps to t={s.t:.3f}: "
                + "/".join(f"{d:.1e}" for d in drift))
    assert np.all(drift <= 1e-12)


@pytest.fixture(scope="module")
def scenario_runs(tmp_path_factory):
    """The randomized suite, once with one worker and once with four."""
    out = {}
    for workers in (1, 4):
        root = tmp_path_factory.mktemp(f"suite_w{workers}")
        t0 = time.perf_counter()
        runs = [run(random_scenario(seed), root / f"seed{seed:02d}", workers=workers)
                for seed in range(N_SCENARIOS)]
        out[workers] = (runs, time.perf_counter() - t0)
    return out


@pytest.mark.criterion(6)
def test_maximum_principles(scenario_runs, measured):
    runs, elapsed = scenario_runs[1]
    worst_min, worst_gap, sharp_gap, n_viol, n_rows = math.inf, -math.inf, -math.inf, 0, 0
    for r in runs:
        assert r.error is None, r.error
        for row in r.result.rows:
            n_rows += 1
            worst_min = min(worst_min, *(row[f"{f}_min"] for f in FIELDS))
            worst_gap = max(worst_gap, row["qv_max"] - row["qv_star"])
            sharp_gap = max(sharp_gap, row["qv_max"] - row["qv_sharp_bound"])
        n_viol += len(r.result.violations)
    measured(6, f"{N_SCENARIOS} scenarios, {n_rows} output times: min field value {worst_min:.3e}, "
                f"max(qv - qv*) {worst_gap:.3e}, max(qv - sharp running bound) {sharp_gap:.3e}, "
                f"violations {n_viol}, {elapsed:.1f} s")
    assert worst_min >= -1e-12
    assert worst_gap <= 1e-10
    # the sharper bound (data and running saturation maximum) holds as well
    assert sharp_gap <= 1e-10
    assert n_viol == 0
    assert elapsed < 600.0


@pytest.mark.criterion(7)
def test_degiorgi_levels(scenario_runs, measured):
    runs, _ = scenario_runs[1]
    worst_ratio, worst_T_over_M, nonmono = 0.0, -math.inf, 0
    J1s = []
    for r in runs:
        J = np.asarray(r.result.level_sets.J)
        M = r.result.level_sets.M
        nonmono += int(np.any(np.diff(J) > 0))
        J1s.append(J[0])
        ratio = J[-1] / J[0] if J[0] > 0 else 0.0
        worst_ratio = max(worst_ratio, ratio)
        assert J[-1] <= 1e-6 * J[0]
        for row in r.result.rows:
            worst_T_over_M = max(worst_T_over_M, row["T_max"] - M)
    measured(7, f"max J_8/J_1 {worst_ratio:.1e}, max J_1 {max(J1s):.1e}, non-monotone series {nonmono}, "
                f"max(T - M) {worst_T_over_M:.3f} (M about {runs[0].result.level_sets.M:.3f})")
    assert nonmono == 0
    assert worst_T_over_M <= 0


@pytest.mark.criterion(8)
@pytest.mark.parametrize("mx,my", [(1, 1), (2, 3)])
def test_velocity_constraints(mx, my, measured):
    par = PhysParams.nondimensional()
    div, flux = [], []
    # 32 cells already resolve the (2,3) mode; 16 is still pre-asymptotic for it
    levels = (32, 64, 128)
    for n in levels:
        g = build_grid(GridConfig(n, n, n, Lx=1.0, Ly=1.5, p0=1.0, p1=0.2), par)
        rep = validate_velocity(analytic_velocity(AnalyticFlowSpec(amplitude=0.8, mx=mx, my=my), g), g)
        assert rep.passed, rep.failures
        div.append(rep.max_divergence)
        flux.append(rep.max_normal_flux)
    h = np.log([1.0 / n for n in levels])
    o_div = float(np.polyfit(h, np.log(div), 1)[0])
    o_flux = float(np.polyfit(h, np.log(flux), 1)[0])
    measured(8, f"mode ({mx},{my}): divergence residual order {o_div:.2f}, no-penetration residual order "
                f"{o_flux:.2f} over n = {levels}")
    assert o_div >= 1.8 and o_flux >= 1.8


@pytest.mark.criterion(9)
def test_determinism(scenario_runs, measured):
    one, _ = scenario_runs[1]
    four, elapsed4 = scenario_runs[4]
    same = 0
    for a, b in zip(one, four):
        if (a.out_dir / "diagnostics.csv").read_bytes() == (b.out_dir / "diagnostics.csv").read_bytes():
            same += 1
    measured(9, f"{same}/{N_SCENARIOS} diagnostics CSVs byte-identical between 1 and 4 workers "
                f"(4-worker suite {elapsed4:.1f} s)")
    assert same == N_SCENARIOS
