# ---
# jupyter:
#   jupytext:
#     text_representation:
#       extension: .py
#       format_name: percent
#       format_version: '1.3'
# ---

# %% [markdown]
# # Closing the loop
#
# The phase-shift inductor window, the tank trim, and the broken-loop gain.

# %%
import numpy as np

from memsosc import OscDesign
from memsosc.oscillator import (
    broken_loop_response, center_tank, gain_av1_av2, loop_gain, lphi_bounds, q_grid,
)

# %%
d = OscDesign()
b = lphi_bounds(d)
print(f"L_phi window {b.l_min * 1e12:.3f} pH .. {b.l_max * 1e9:.2f} nH, "
      f"chosen {b.l_phi * 1e12:.0f} pH, f_phi = {b.f_phi / 1e9:.2f} GHz")

# %%
g = gain_av1_av2(d)
print(f"R0 = {g.r0:.1f} ohm, av1 = {g.av1:.2f}, av2 = {g.av2:.1f}, product {g.loop_gain:.0f}")

# %% [markdown]
# Aligning the bare tank to f0 leaves the loop about ten degrees short;
# the pad capacitor is trimmed until the broken-loop phase is zero.

# %%
r = loop_gain(d)
print(f"untrimmed phase {r.untrimmed_phase_deg:.2f} deg, trimmed pad {r.c_pad * 1e15:.2f} fF")
print(f"|T| = {r.magnitude:.1f}, phase {r.phase_deg:.1e} deg, "
      f"stage gain {r.stage_gain:.3f}, analytic/simulated {r.agreement_factor:.2f}")

# %%
c = center_tank(d)
grid = q_grid(d.f0, d.resonator.q_mems, half_points=6, density=2.0)
t = broken_loop_response(c, grid)
for f, mag, ph in zip(grid, t.magnitude, np.degrees(np.angle(t.values))):
    print(f"{(f - d.f0) / 1e6:+8.2f} MHz  |T| = {mag:7.1f}  {ph:+7.2f} deg")
