# ---
# jupyter:
#   jupytext:
#     text_representation:
#       extension: .py
#       format_name: percent
#       format_version: '1.3'
# ---

# %% [markdown]
# # Detuning the load tank
#
# Move the L0 tank off f0 and follow the oscillation frequency, the
# start-up margin and the phase noise. The MEMS resonance holds the
# frequency while the tank's share of the loop Q falls away.

# %%
from memsosc import OscDesign
from memsosc.oscillator import center_tank, detune_sweep

# %%
d = center_tank(OscDesign())
deltas = [-3.7e9, -2e9, -1e9, 0.0, 1e9, 2e9, 3e9, 3.7e9]
for p in detune_sweep(d, deltas):
    print(f"{p.delta_hz / 1e9:+5.1f} GHz  pull {(p.f_osc_hz - d.f0) / 1e6:+6.3f} MHz  "
          f"margin {p.startup_margin:6.1f}  Q {p.q_osc:8.1f}  PN {p.pn_dbchz:.2f} dBc/Hz")
