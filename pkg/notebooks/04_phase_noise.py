# ---
# jupyter:
#   jupytext:
#     text_representation:
#       extension: .py
#       format_name: percent
#       format_version: '1.3'
# ---

# %% [markdown]
# # Phase noise budget
#
# Noise factor addends, the Leeson curve, the lumped budget against the
# adjoint noise solve, and the figure of merit.

# %%
from memsosc import OscDesign, fom, noise_factor, phase_noise
from memsosc.oscillator import noise_cross_check
from memsosc.phase_noise import pn_curve_csv

# %%
d = OscDesign()
nf = noise_factor(d)
for key, value in nf.addends.items():
    print(f"{key:8s} {value:10.4f}")
print(f"F = {nf.value:.3f}")

# %%
pn = phase_noise(d, 1e6)
print(f"floor {pn.pn_min_dbchz:.2f} dBc/Hz, with F {pn.pn_dbchz:.2f} dBc/Hz at 1 MHz")
print(f"FoM {fom(pn.pn_dbchz, d.f0, 1e6, d.p_dc).fom_dbchz:.2f} dB")

# %%
print(pn_curve_csv(d, [1e3, 1e4, 1e5, 1e6, 1e7]))

# %% [markdown]
# The same open-loop noise from the circuit solver, with the RL0 noise
# placed as a shunt generator to match the lumped model, and where it
# physically sits.

# %%
x = noise_cross_check(d)
print(f"MNA {x.mna_total:.3e}  lumped {x.lumped_total:.3e}  ratio {x.ratio:.3f}")
print(f"series RL0 placement {x.physical_total:.3e}")
for name, v in sorted(x.budget.contributions, key=lambda kv: -kv[1])[:5]:
    print(f"  {name:8s} {v:.3e}")
