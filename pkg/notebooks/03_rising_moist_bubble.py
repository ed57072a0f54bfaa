# %% [markdown]
# # A rising moist bubble
#
# A warm, moist blob sits in the lower half of a box driven by a
# divergence-free overturning flow. Vapour above saturation condenses into
# cloud, cloud autoconverts and collects into rain, rain falls and
# evaporates below cloud. The monitors check at every output time that the
# moisture fields stay nonnegative and below the vapour bound.

# %%
import tempfile

import numpy as np

from warmcloud.driver import run, setup_run
from warmcloud.io import read_checkpoint
from warmcloud.scenarios import rising_moist_bubble
from warmcloud.velocity import validate_velocity

cfg = rising_moist_bubble(n=16, t_end=0.5, interval=0.1)
s = setup_run(cfg)
rep = validate_velocity(s.model.velocity(0.0), s.grid)
print(f"velocity: divergence {rep.max_divergence:.2e}, wall flux {rep.max_normal_flux:.2e}, passed {rep.passed}")
print(f"vapour bound qv* = {s.qv_star:.4f}")

# %%
out_dir = tempfile.mkdtemp(prefix="bubble-")
cfg["output"]["snapshots"] = True
cfg["output"]["formats"] = ["checkpoint"]
result = run(cfg, out_dir)
print("ok:", result.ok, "steps:", result.result.steps)
for row in result.result.rows:
    print(f"t={row['t']:.2f}  T_max={row['T_max']:.4f}  qc_max={row['qc_max']:.2e}  "
          f"qr_max={row['qr_max']:.2e}  water={row['mass_water']:.6e}  J_1={row['J_1']:.1e}")

# %% [markdown]
# Snapshots round-trip through the binary checkpoint format, and the
# vertical profile of horizontally averaged cloud water shows where the
# condensate sits.

# %%
last = sorted(p for p in result.files if p.suffix == ".chk")[-1]
state, grid, vel = read_checkpoint(last, s.params)
qc_profile = state.interior("qc").mean(axis=(1, 2))
for k in range(0, grid.n_p, 2):
    print(f"p={grid.p[k]:.3f}  <qc>={qc_profile[k]:.3e}")
print("final state nonnegative:", all(state.interior(f).min() >= 0 for f in ("qv", "qc", "qr")))
np.testing.assert_allclose(state.interior("T"), result.result.state.interior("T"))
