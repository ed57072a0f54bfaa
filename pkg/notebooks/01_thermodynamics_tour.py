# %% [markdown]
# # Saturation, latent heat and the phase-change rates
#
# A short walk through the pointwise physics: the closed-form saturation
# vapour pressure, the temperature cutoff, the saturation mixing ratio and
# the three bulk rates that move water between vapour, cloud and rain.
# Run with `python notebooks/01_thermodynamics_tour.py` or open it with jupytext.

# %%
import numpy as np
from scipy import integrate

from warmcloud.core import PhysParams
from warmcloud.microphysics import phase_change_tendencies, source_rates
from warmcloud.thermo import (critical_temperature, cutoff_ramp, latent_heat,
                              saturation_mixing_ratio, saturation_vapor_pressure)

si = PhysParams()
print(f"T_crit = {critical_temperature(si):.2f} K, latent heat vanishes there")

# %% [markdown]
# The latent heat falls linearly with temperature, so the saturation
# pressure has a closed form. Integrating the Clausius-Clapeyron ODE
# numerically from the reference point gives the same curve.

# %%
T = np.linspace(200.0, 360.0, 9)
# well inside the cutoff band the ramp factor is exactly one
print("ramp factor:", cutoff_ramp(T, si))
closed = saturation_vapor_pressure(T, si)


def dlog_es(t, y):
    return [latent_heat(t, si) / (si.R_v * t * t)]


for t, c in zip(T, closed):
    ode = integrate.solve_ivp(dlog_es, (si.T0, t), [np.log(si.es0)], method="DOP853", rtol=1e-12, atol=1e-14)
    e_ode = np.exp(ode.y[0, -1])
    print(f"T={t:6.1f}  L={latent_heat(t, si):.4e}  e_s={c:.6e}  ode={e_ode:.6e}  rel={abs(c - e_ode) / e_ode:.1e}")

# %% [markdown]
# Saturation mixing ratio at a few pressures. Near the top of the domain
# it grows quickly, which is why the vapour bound is taken over the
# lowest pressure on the grid.

# %%
for p in (1.0e5, 7.0e4, 4.0e4, 2.0e4):
    print(f"p={p:8.0f} Pa  qvs(280 K)={float(saturation_mixing_ratio(p, 280.0, si)):.5f}")

# %% [markdown]
# Phase-change rates for a supersaturated parcel, a dry parcel holding rain,
# and one holding cloud with enough water to autoconvert. The three tendencies
# always sum to zero.

# %%
p = np.full(3, 8.0e4)
Tp = np.full(3, 285.0)
qvs = saturation_mixing_ratio(p, Tp, si)
qv = np.array([1.1, 0.6, 1.0]) * qvs
qc = np.array([0.0, 0.0, 2e-3])
qr = np.array([0.0, 1e-3, 0.0])
rates = source_rates(p, Tp, qv, qc, qr, si)
dT, dqv, dqc, dqr = phase_change_tendencies(p, Tp, qv, qc, qr, si)
print(rates)
print("sum of water tendencies:", dqv + dqc + dqr)
print("heating:", dT)
