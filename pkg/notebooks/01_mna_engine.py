# ---
# jupyter:
#   jupytext:
#     text_representation:
#       extension: .py
#       format_name: percent
#       format_version: '1.3'
# ---

# %% [markdown]
# # The AC engine on small circuits
#
# Parse a netlist, sweep it, and compare against closed forms.

# %%
import math

import numpy as np

from memsosc import parse_netlist
from memsosc.mna import ac_sweep, frequency_grid, input_impedance, output_noise

# %%
net = parse_netlist("""
.title series RLC
V1 in 0 1
R1 in b 50
L1 b c 2n
C1 c 0 1p
""")
f0 = 1 / (2 * math.pi * math.sqrt(2e-9 * 1e-12))
grid = frequency_grid(0.5 * f0, 1.5 * f0, 201)
i = ac_sweep(net, grid, "i(L1)")["i(L1)"]
print(f"f0 = {f0 / 1e9:.4f} GHz, peak at {grid[np.argmax(i.magnitude)] / 1e9:.4f} GHz")

# %%
w = 2 * np.pi * grid
expect = 1 / (50 + 1j * w * 2e-9 + 1 / (1j * w * 1e-12))
print("worst relative error:", np.max(np.abs(i.values - expect) / np.abs(expect)))

# %% [markdown]
# Parallel tank: |Z| peaks at R and drops by roughly sqrt(2) at the
# approximate band edges f0 (1 +/- 1/2Q).

# %%
tank = parse_netlist("R1 a 0 500\nL1 a 0 2n\nC1 a 0 1p\n")
q = 500 * math.sqrt(1e-12 / 2e-9)
edges = f0 * np.array([1 - 1 / (2 * q), 1.0, 1 + 1 / (2 * q)])
print(np.round(input_impedance(tank, ("a", "0"), edges).magnitude, 2))

# %% [markdown]
# Thermal noise of the same tank: 4kT Re(Z) at every frequency.

# %%
for f in edges:
    budget = output_noise(tank, "a", f)
    print(f"{f / 1e9:.4f} GHz  {budget.total:.4e} V^2/Hz")
