"""Ready-made nondimensional scenarios expressed as run configurations."""

from __future__ import annotations

import numpy as np

from .config import RunConfig, parse_config_text


def _g(v, digits=6):
    return repr(round(float(v), digits))


def _bump(rng, base, amp):
    """base + amp * product of raised cosines: smooth, in [base, base + amp]."""
    kx, ky = rng.integers(1, 3, size=2)
    px, py, pp = rng.uniform(0, 2 * np.pi, size=3)
    return (f"{_g(base)} + {_g(amp / 8)} * (1 + cos({kx} * pi * x + {_g(px)}))"
            f" * (1 + cos({ky} * pi * y + {_g(py)})) * (1 + cos(pi * (p - 0.2) / 0.8 + {_g(pp)}))")


def random_scenario_text(seed: int, n: int = 32, t_end: float = 1.0, interval: float = 0.1) -> str:
    """Random nonnegative smooth data, random admissible Robin data and an analytic flow."""
    rng = np.random.default_rng(seed)
    A = rng.uniform(0.1, 0.5)
    mx, my = rng.integers(1, 3, size=2)
    mod_a, mod_w = rng.uniform(0, 0.5), rng.uniform(1, 6)
    V = rng.uniform(0.0, 0.3)
    lines = [
        "[grid]", f"nx = {n}", f"ny = {n}", f"np = {n}", "p0 = 1.0", "p1 = 0.2",
        f"Tbar = 1 - {_g(rng.uniform(0, 0.3))} * (1 - p)",
        "[physics]", "preset = nondimensional", f"V = {_g(V)}",
        "[velocity]", "kind = analytic", f"amplitude = {_g(A)}", f"mx = {mx}", f"my = {my}",
        f"modulation = 1 + {_g(mod_a)} * sin({_g(mod_w)} * t)",
        "[initial]",
        f"T = (0.75 + 0.25 * p) * ({_bump(rng, rng.uniform(0.8, 1.1), rng.uniform(0.0, 0.2))})",
        f"qv = {_bump(rng, rng.uniform(0.0, 0.02), rng.uniform(0.0, 0.02))}",
        f"qc = {_bump(rng, 0.0, rng.uniform(0.0, 0.005))}",
        f"qr = {_bump(rng, 0.0, rng.uniform(0.0, 0.003))}",
    ]
    bases = {"T": (0.8, 1.1), "qv": (0.0, 0.03), "qc": (0.0, 0.005), "qr": (0.0, 0.003)}
    for f, (lo, hi) in bases.items():
        b0 = rng.uniform(lo, hi)
        bl = rng.uniform(lo, hi)
        wobble = rng.uniform(0, 0.5)
        # lateral temperature data cools with height like the interior
        shape = "(0.75 + 0.25 * p)" if f == "T" else f"(1 + {_g(wobble)} * sin(pi * (p - 0.2) / 0.8))"
        lines += [f"[boundary.{f}]",
                  f"alpha0 = {_g(rng.uniform(0, 2))}",
                  f"b0 = {_g(b0)} * (1 + {_g(wobble)} * sin(pi * x) * sin(pi * y) * cos(t) ** 2)",
                  f"alphal = {_g(rng.uniform(0, 2))}",
                  f"bl = {_g(bl)} * {shape}"]
    lines += ["[stepping]", f"t_end = {_g(t_end)}",
              "[output]", f"interval = {_g(interval)}", "snapshots = false",
              "[run]", f"seed = {seed}", f"name = random-{seed}"]
    return "\n".join(lines) + "\n"


def random_scenario(seed: int, n: int = 32, t_end: float = 1.0, interval: float = 0.1) -> RunConfig:
    return parse_config_text(random_scenario_text(seed, n, t_end, interval))


RISING_MOIST_BUBBLE = """\
[grid]
nx = {n}
ny = {n}
np = {n}
p0 = 1.0
p1 = 0.2
Tbar = 1 - 0.25 * (1 - p)

[physics]
preset = nondimensional
V = 0.1

[velocity]
kind = analytic
amplitude = 0.5
modulation = 1

[initial]
# a warm, moist bubble in the lower half of the column
T = 1 - 0.25 * (1 - p) + 0.05 * exp(-((x - 0.5)**2 + (y - 0.5)**2 + (p - 0.8)**2) / 0.02)
qv = 0.004 + 0.004 * exp(-((x - 0.5)**2 + (y - 0.5)**2 + (p - 0.8)**2) / 0.02)
qc = 0.001 * exp(-((x - 0.5)**2 + (y - 0.5)**2 + (p - 0.7)**2) / 0.01)
qr = 0

[boundary.T]
alpha0 = 1
b0 = 1
alphal = 0.5
bl = 1 - 0.25 * (1 - p)

[boundary.qv]
alpha0 = 1
b0 = 0.004
alphal = 0.5
bl = 0.004

[stepping]
t_end = {t_end}

[output]
interval = {interval}
snapshots = false

[run]
name = rising-moist-bubble
"""


def rising_moist_bubble(n: int = 24, t_end: float = 1.0, interval: float = 0.25) -> RunConfig:
    return parse_config_text(RISING_MOIST_BUBBLE.format(n=n, t_end=t_end, interval=interval))


SCENARIOS = {"rising-moist-bubble": rising_moist_bubble}
