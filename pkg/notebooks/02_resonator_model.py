# ---
# jupyter:
#   jupytext:
#     text_representation:
#       extension: .py
#       format_name: percent
#       format_version: '1.3'
# ---

# %% [markdown]
# # Resonant-fin transistor model
#
# Motional branch from f0, Q and Rm, the transformer-coupled netlist, and
# the 270 degree drive-to-sense phase.

# %%
import numpy as np

from memsosc import ResonatorParams, build_rft_netlist, format_netlist, synthesize_motional
from memsosc.resonator import resonator_phase_at

# %%
p = ResonatorParams()
mb = synthesize_motional(p)
print(f"Lm = {mb.lm * 1e6:.3f} uH, Cm = {mb.cm * 1e18:.3f} aF, C0 = {mb.c0 * 1e15:.2f} fF")

# %%
print(format_netlist(build_rft_netlist(p)))

# %% [markdown]
# Phase of the sensed drain current against the drive voltage, across the
# motional bandwidth. It sits at 270 degrees at f0 and swings by +/-45
# degrees at the half-power edges.

# %%
offsets = np.array([-2, -1, -0.5, 0, 0.5, 1, 2])
for k in offsets:
    f = p.f0 * (1 + k / (2 * p.q_mems))
    print(f"{k:+5.1f} half-bandwidths  {resonator_phase_at(p, f):8.3f} deg")
