"""Small-signal MNA engine and design workbench for a MEMS-referenced oscillator."""

from .design import DesignInfeasibleError, OscDesign, load_design
from .mna import (
    AcSolution, FrequencyResponse, NoiseBudget, SingularCircuitError, ac_solve, ac_sweep,
    input_impedance, output_noise, transfer_function,
)
from .netlist import Netlist, NetlistSyntaxError, format_netlist, parse_netlist, validate_netlist
from .oscillator import (
    build_loop_netlist, combined_q, detune_sweep, extract_q, gain_av1_av2, lphi_bounds,
    loop_gain,
)
from .phase_noise import fom, leeson_pn, lumped_noise_power, noise_factor, phase_noise
from .resonator import ResonatorParams, build_rft_netlist, resonator_phase_at, synthesize_motional

__version__ = "0.1.0"
