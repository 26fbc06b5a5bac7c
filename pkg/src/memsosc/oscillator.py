"""Inductor-phase-shifter oscillator around the AM-RFT.

Half-circuit loop, nodes::

    y   gain-stage drain = RFT drive port = load tank (L0 + RL0, C0, Cpad)
    x   RFT sense drain = phase-shift inductor L_phi (series R_Lphi) || C_in
        = gate of M1

The RFT's sensed current develops ``v_x`` across L_phi (+90 degrees on top
of the resonator's 270), and the common-source stage M1 returns it to ``y``
inverted (the last 180). Loop gain is measured by cutting the gate of M1
off node ``x``: a 1 V source drives the gate node ``xg`` and ``x`` keeps
its C_in load, so ``T = V(x) / V(xg)``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, replace
from typing import Iterable, Sequence

import numpy as np
import scipy.optimize

from .design import DesignInfeasibleError, OscDesign, parallel
from .mna import (
    DEFAULT_TEMPERATURE, FrequencyResponse, NoiseBudget, ac_solve, ac_sweep,
    input_impedance, output_noise, transfer_function,
)
from .netlist import Capacitor, Element, Inductor, Netlist, Resistor, Vccs, VSource
from .phase_noise import leeson_pn, lumped_noise_power, lumped_r0, noise_factor
from .resonator import build_rft_netlist, rft_elements

BREAK_POINTS = (None, "gate", "sense")


class MisalignedTanksError(ValueError):
    pass


# --------------------------------------------------------------------------
# design equations
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LphiBounds:
    l_min: float
    l_max: float
    l_phi: float
    f_phi: float
    satisfied: bool


def lphi_bounds(d: OscDesign) -> LphiBounds:
    """Window for the phase-shift inductor.

    Upper: the L_phi-C_in tank must resonate well above f0,
    ``L_phi << 1 / (4 pi^2 f0^2 C_in)``. Lower: start-up,
    ``L_phi >> Rm Cm / (gm_mech (gm1 R0)^2)``.
    """
    l_max = 1.0 / (4 * math.pi ** 2 * d.f0 ** 2 * d.c_in)
    g = gain_av1_av2(d)
    l_min = d.resonator.rm * d.motional.cm / (d.resonator.gm_mech * g.av1)
    if l_min >= l_max:
        raise DesignInfeasibleError(
            f"start-up needs L_phi > {l_min:.3e} H but resonance needs L_phi < {l_max:.3e} H")
    f_phi = 1.0 / (2 * math.pi * math.sqrt(d.l_phi * d.c_in))
    return LphiBounds(l_min, l_max, d.l_phi, f_phi, l_min < d.l_phi < l_max)


@dataclass(frozen=True)
class GainEstimate:
    av1: float
    av2: float
    r0: float
    av1_single: float  # gm1 * R0, one tuned stage

    @property
    def loop_gain(self) -> float:
        return self.av1 * self.av2


def gain_av1_av2(d: OscDesign) -> GainEstimate:
    """Lumped stage gains with the tank tuned at f0.

    ``av1 = (gm1 R0)^2`` (as printed for the tuned stage) and
    ``av2 = gm_mech L_phi / (Cm Rm)``.
    """
    r0 = lumped_r0(d)
    av1 = (d.gm_m1 * r0) ** 2
    av2 = d.resonator.gm_mech * d.l_phi / (d.motional.cm * d.resonator.rm)
    return GainEstimate(av1, av2, r0, d.gm_m1 * r0)


# --------------------------------------------------------------------------
# netlists
# --------------------------------------------------------------------------

def tank_netlist(d: OscDesign, c_pad: float | None = None) -> Netlist:
    """Static load network at ``y``: L0 + RL0, C0, Cpad and the magnetizing L1.

    The motional loop is left out, so L1 sees an open secondary.
    """
    c_pad = d.c_pad if c_pad is None else c_pad
    if c_pad is None:
        c_pad = aligned_c_pad(d)
    mb = d.motional
    elements = [
        Inductor("L0", "y", "t", d.l0),
        Resistor("RL0", "t", "0", d.r_l0),
        Capacitor("C0", "y", "0", mb.c0),
        Inductor("L1", "y", "0", d.resonator.l_couple),
    ]
    if c_pad > 0:
        elements.append(Capacitor("Cpad", "y", "0", c_pad))
    return Netlist(tuple(elements), "load tank")


def aligned_c_pad(d: OscDesign, freq: float | None = None) -> float:
    """Pad capacitance that puts the bare tank's zero-phase point at ``freq``."""
    w = 2 * math.pi * (d.f0 if freq is None else freq)
    b_l0 = w * d.l0 / (d.r_l0 ** 2 + (w * d.l0) ** 2)
    b_l1 = 1.0 / (w * d.resonator.l_couple)
    c_pad = (b_l0 + b_l1) / w - d.motional.c0
    if c_pad < 0:
        raise DesignInfeasibleError(f"C0 alone over-tunes the tank (needs {c_pad:.3e} F of pad)")
    return c_pad


def _loop_elements(d: OscDesign, c_pad: float, break_at: str | None,
                   rl0_noise: str) -> list[Element]:
    if break_at not in BREAK_POINTS:
        raise ValueError(f"break_at must be one of {BREAK_POINTS}")
    if rl0_noise not in ("physical", "lumped"):
        raise ValueError("rl0_noise must be 'physical' or 'lumped'")
    res = d.resonator
    elements = rft_elements(res, drive="y", out="x", gamma=d.gamma)
    if break_at == "sense":
        # signal path of the sense transistor removed, its channel noise kept
        elements = [Vccs(el.name, "x", "0", "0", "0", el.gm, el.noisy, el.gamma)
                    if el.name == "Gsense" else el for el in elements]
    gate = "xg" if break_at == "gate" else "x"
    elements += [
        Inductor("Lphi", "x", "p", d.l_phi),
        Resistor("RLphi", "p", "0", d.r_lphi),
        Capacitor("Cin", "x", "0", d.c_in),
        Vccs("Gm1", "y", "0", gate, "0", d.gm_m1, True, d.gamma),
        Resistor("Ro", "y", "0", d.ro_m1, noisy=False),
        Inductor("L0", "y", "t", d.l0),
        Resistor("RL0", "t", "0", d.r_l0, noisy=rl0_noise == "physical"),
    ]
    if c_pad > 0:
        elements.append(Capacitor("Cpad", "y", "0", c_pad))
    if rl0_noise == "lumped":
        # shunt generator 4kT/RL0 at y, as in the lumped noise model
        elements.append(Vccs("GnRL0", "y", "0", "0", "0", 1.0 / d.r_l0))
    if break_at == "gate":
        elements.append(VSource("Vtest", "xg", "0", 1.0))
    return elements


def build_loop_netlist(d: OscDesign, break_at: str | None = None,
                       rl0_noise: str = "physical") -> Netlist:
    """Half-circuit oscillator loop.

    ``break_at="gate"`` cuts the loop at the M1 gate and drives it with
    ``Vtest`` (loop gain ``V(x)``). ``break_at="sense"`` keeps the
    amplifier path but removes the RFT's sense transconductance signal,
    leaving its noise: the open-loop configuration for noise budgets.
    ``rl0_noise="lumped"`` replaces the series RL0 noise with a shunt
    ``4kT/RL0`` generator at ``y``.
    """
    c_pad = d.c_pad if d.c_pad is not None else center_tank(d).c_pad
    title = "oscillator loop" + (f" (broken at {break_at})" if break_at else "")
    return Netlist(tuple(_loop_elements(d, c_pad, break_at, rl0_noise)), title)


# --------------------------------------------------------------------------
# loop gain
# --------------------------------------------------------------------------

def _open_loop(d: OscDesign, c_pad: float) -> Netlist:
    return Netlist(tuple(_loop_elements(d, c_pad, "gate", "physical")), "broken loop")


def _wrap_deg(phase: float) -> float:
    return (phase + 180.0) % 360.0 - 180.0


def broken_loop_gain(d: OscDesign, freq: float) -> complex:
    c_pad = d.c_pad if d.c_pad is not None else center_tank(d).c_pad
    return ac_solve(_open_loop(d, c_pad), freq).v("x")


def broken_loop_response(d: OscDesign, grid) -> FrequencyResponse:
    c_pad = d.c_pad if d.c_pad is not None else center_tank(d).c_pad
    return transfer_function(_open_loop(d, c_pad), "Vtest", "x", grid)


def center_tank(d: OscDesign, freq: float | None = None) -> OscDesign:
    """Trim ``c_pad`` so the broken-loop phase is zero at ``freq`` (f0).

    The bare-tank alignment is the starting point; the trim absorbs the
    phase error of the lossy phase shifter and its loading.
    """
    f = d.f0 if freq is None else freq
    start = aligned_c_pad(d, f)

    def phase(c):
        return _wrap_deg(math.degrees(np.angle(ac_solve(_open_loop(d, c), f).v("x"))))

    lo, hi = 0.7 * start, 1.3 * start
    p_lo, p_hi = phase(lo), phase(hi)
    if p_lo * p_hi > 0 or abs(p_lo) > 90 or abs(p_hi) > 90:
        raise DesignInfeasibleError("tank trim cannot zero the loop phase at f0")
    c = scipy.optimize.brentq(phase, lo, hi, xtol=1e-30, rtol=1e-13)
    return replace(d, c_pad=c)


@dataclass(frozen=True)
class LoopGainReport:
    f_eval: float
    magnitude: float
    phase_deg: float
    startup_margin: float
    av1: float
    av2: float
    r0: float
    analytic_loop_gain: float
    agreement_factor: float  # analytic / simulated magnitude
    stage_gain: float  # simulated |v_y / v_x| of the tuned stage
    c_pad: float
    tank_zero_phase_hz: float  # where the bare tank alone is real
    untrimmed_phase_deg: float  # loop phase with the bare tank aligned to f0

    def to_dict(self) -> dict:
        return asdict(self)


def _tank_zero_phase(d: OscDesign) -> float:
    """Frequency where the bare tank impedance is real, for the given c_pad."""
    c_tot = d.c_pad + d.motional.c0
    l0, r, l1 = d.l0, d.r_l0, d.resonator.l_couple

    def b(f):
        w = 2 * math.pi * f
        return w * c_tot - w * l0 / (r * r + (w * l0) ** 2) - 1.0 / (w * l1)

    return scipy.optimize.brentq(b, 0.2 * d.f0, 5 * d.f0, xtol=1.0)


def loop_gain(d: OscDesign, freq: float | None = None) -> LoopGainReport:
    """Barkhausen check of the broken loop at ``freq`` (default f0)."""
    if d.c_pad is None:
        d = center_tank(d)
    f = d.f0 if freq is None else freq
    sol = ac_solve(_open_loop(d, d.c_pad), f)
    t = sol.v("x")
    g = gain_av1_av2(d)
    mag = abs(t)
    bare = ac_solve(_open_loop(d, aligned_c_pad(d, f)), f).v("x")
    return LoopGainReport(
        f_eval=f,
        magnitude=mag,
        phase_deg=_wrap_deg(math.degrees(np.angle(t))),
        startup_margin=mag - 1.0,
        av1=g.av1, av2=g.av2, r0=g.r0,
        analytic_loop_gain=g.loop_gain,
        agreement_factor=g.loop_gain / mag,
        stage_gain=abs(sol.v("y")),
        c_pad=d.c_pad,
        tank_zero_phase_hz=_tank_zero_phase(d),
        untrimmed_phase_deg=_wrap_deg(math.degrees(np.angle(bare))),
    )


@dataclass(frozen=True)
class NoiseCrossCheck:
    mna_total: float
    lumped_total: float
    physical_total: float  # MNA with the series RL0 noise where it really sits
    budget: NoiseBudget

    @property
    def ratio(self) -> float:
        return self.mna_total / self.lumped_total

    def to_dict(self) -> dict:
        return {
            "mna_total_v2_per_hz": self.mna_total,
            "lumped_total_v2_per_hz": self.lumped_total,
            "physical_total_v2_per_hz": self.physical_total,
            "ratio": self.ratio,
            "contributions": dict(self.budget.contributions),
        }


def noise_cross_check(d: OscDesign, temperature: float = DEFAULT_TEMPERATURE) -> NoiseCrossCheck:
    """Open-loop output noise at ``y`` by MNA against the lumped budget.

    The loop is opened at the sense transconductor. The lumped budget puts
    RL0's noise across the node as ``4kT/RL0``; the matching netlist does the
    same, while ``physical_total`` keeps the noise on the series resistor.
    """
    if d.c_pad is None:
        d = center_tank(d)
    lumped = build_loop_netlist(d, break_at="sense", rl0_noise="lumped")
    physical = build_loop_netlist(d, break_at="sense", rl0_noise="physical")
    budget = output_noise(lumped, "y", d.f0, temperature)
    return NoiseCrossCheck(
        budget.total,
        lumped_noise_power(d, temperature).total,
        output_noise(physical, "y", d.f0, temperature).total,
        budget,
    )


# --------------------------------------------------------------------------
# quality factor
# --------------------------------------------------------------------------

def extract_q(resp: FrequencyResponse, f0: float) -> float:
    """Q = (w0/2)|dphi/dw| from a centered difference at the sample nearest f0."""
    f = resp.freqs
    if not f[0] <= f0 <= f[-1]:
        raise ValueError(f"f0 = {f0} Hz lies outside the grid [{f[0]}, {f[-1]}]")
    i = int(np.argmin(np.abs(f - f0)))
    if i == 0 or i == len(f) - 1:
        raise ValueError("f0 needs a sample on each side for the centered difference")
    phi = np.angle(resp.values[i - 1:i + 2])
    steps = np.diff(phi)
    if np.any(np.abs(steps) > np.pi / 2):
        raise ValueError("phase jumps by more than 90 degrees across the stencil; "
                         "refine the grid or check for a phase wrap")
    dphi = phi[2] - phi[0]
    return f[i] / 2.0 * abs(dphi / (f[i + 1] - f[i - 1]))


def q_grid(center: float, q: float, half_points: int = 10, density: float = 200.0) -> np.ndarray:
    """Uniform grid centered on ``center`` with step ``center / (density * q)``."""
    h = center / (density * q)
    return center + h * np.arange(-half_points, half_points + 1)


def tank_response(d: OscDesign, grid) -> FrequencyResponse:
    return input_impedance(tank_netlist(d), ("y", "0"), grid)


def mems_response(d: OscDesign, grid) -> FrequencyResponse:
    """Motional current per volt of drive (admittance of the motional branch)."""
    return transfer_function(build_rft_netlist(d.resonator), "Vdrv", "i(Rm)", grid)


@dataclass(frozen=True)
class CombinedQ:
    q_osc: float
    q_l0: float
    q_mems: float

    @property
    def additivity_error(self) -> float:
        return abs(self.q_osc - (self.q_l0 + self.q_mems)) / (self.q_l0 + self.q_mems)


def combined_q(d: OscDesign, freq: float | None = None) -> CombinedQ:
    """Q of the load tank, of the MEMS branch and of their cascade at f0.

    With ``d.c_pad`` unset the tank is aligned to f0 first. A tank whose
    phase at f0 is beyond 45 degrees (outside its half-power band) is
    rejected; use :func:`detune_sweep` for misaligned tanks.
    """
    f = d.f0 if freq is None else freq
    if d.c_pad is None:
        d = replace(d, c_pad=aligned_c_pad(d, f))
    grid = q_grid(f, d.resonator.q_mems)
    h1 = tank_response(d, grid)
    i = len(grid) // 2
    if abs(np.degrees(np.angle(h1.values[i]))) > 45.0:
        raise MisalignedTanksError("load tank is not resonant at f0")
    h2 = mems_response(d, grid)
    result = CombinedQ(extract_q(h1 * h2, f), extract_q(h1, f), extract_q(h2, f))
    if result.additivity_error > 0.01:
        raise RuntimeError(f"Q additivity violated: {result}")
    return result


# --------------------------------------------------------------------------
# oscillation point and detuning
# --------------------------------------------------------------------------

def _search_grid(d: OscDesign, half_window: float) -> np.ndarray:
    f0, q = d.f0, d.resonator.q_mems
    theta = np.radians(np.arange(-89.5, 89.75, 0.5))
    near = f0 + f0 / (2 * q) * np.tan(theta)
    wide = np.linspace(f0 - half_window, f0 + half_window, 401)
    grid = np.union1d(near, wide)
    return grid[(grid >= f0 - half_window) & (grid <= f0 + half_window)]


def oscillation_frequency(d: OscDesign, tol: float = 1e3) -> float | None:
    """Zero crossing of the broken-loop phase nearest f0, or None.

    The search covers f0 +/- f0/Q_L0; the crossing is refined by Brent's
    method to ``tol`` Hz.
    """
    if d.c_pad is None:
        d = center_tank(d)
    net = _open_loop(d, d.c_pad)
    grid = _search_grid(d, d.f0 / d.q_l0)
    phase = ac_sweep(net, grid, "x", workers=1)["x"].values
    ang = np.angle(phase)
    crossings = [
        k for k in range(len(grid) - 1)
        if ang[k] == 0.0 or (ang[k] * ang[k + 1] < 0
                             and abs(ang[k]) < np.pi / 2 and abs(ang[k + 1]) < np.pi / 2)
    ]
    if not crossings:
        return None
    k = min(crossings, key=lambda j: abs(0.5 * (grid[j] + grid[j + 1]) - d.f0))
    if ang[k] == 0.0:
        return float(grid[k])

    def fn(f):
        return np.angle(ac_solve(net, f).v("x"))

    return float(scipy.optimize.brentq(fn, grid[k], grid[k + 1], xtol=tol))


def detuned(d: OscDesign, delta_f: float) -> OscDesign:
    """Scale L0 (and RL0, keeping Q_L0) so the tank moves by ``delta_f``.

    The capacitances are untouched, so the tank resonance scales by
    ``(f0 + delta_f) / f0``. ``delta_f = 0`` returns the design unchanged.
    """
    if d.c_pad is None:
        d = center_tank(d)
    if delta_f == 0:
        return d
    scale = (d.f0 / (d.f0 + delta_f)) ** 2
    return replace(d, l0=d.l0 * scale, r_l0=d.r_l0 * scale)


@dataclass(frozen=True)
class OperatingPoint:
    delta_hz: float
    f_osc_hz: float | None
    startup_margin: float | None
    pn_dbchz: float | None
    q_osc: float | None
    r0: float | None

    @property
    def oscillating(self) -> bool:
        return self.f_osc_hz is not None and self.startup_margin > 0

    def to_dict(self) -> dict:
        out = asdict(self)
        out["oscillating"] = self.oscillating
        return out


def operating_point(d: OscDesign, delta_hz: float = 0.0, offset: float = 1e6,
                    temperature: float = DEFAULT_TEMPERATURE) -> OperatingPoint:
    """Oscillation frequency, start-up margin and PN of a (possibly detuned) design.

    R0 is the loaded tank at the oscillation frequency in parallel with Rm
    and ro; Q_OSC is the phase-slope Q of tank x MEMS at that frequency.
    """
    if d.c_pad is None:
        d = center_tank(d)
    f_osc = oscillation_frequency(d)
    if f_osc is None:
        return OperatingPoint(delta_hz, None, None, None, None, None)
    t = broken_loop_gain(d, f_osc)
    grid = q_grid(f_osc, d.resonator.q_mems)
    h1 = tank_response(d, grid)
    q_osc = extract_q(h1 * mems_response(d, grid), f_osc)
    z_tank = abs(h1.values[len(grid) // 2])
    r0 = parallel(z_tank, d.resonator.rm, d.ro_m1)
    pn = leeson_pn(d, offset, q_osc, noise_factor(d).value, temperature, r0=r0)
    return OperatingPoint(delta_hz, f_osc, abs(t) - 1.0, pn.pn_dbchz, q_osc, r0)


def detune_sweep(d: OscDesign, deltas: Iterable[float], offset: float = 1e6,
                 temperature: float = DEFAULT_TEMPERATURE) -> list[OperatingPoint]:
    """Move the L0 tank resonance by each delta and re-solve the operating point."""
    base = d if d.c_pad is not None else center_tank(d)
    return [operating_point(detuned(base, df), df, offset, temperature) for df in deltas]


def detune_csv(points: Sequence[OperatingPoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["delta_hz", "f_osc_hz", "startup_margin", "pn_dbchz"])
    for p in points:
        w.writerow([repr(float(p.delta_hz))] + [
            "nan" if v is None else repr(float(v))
            for v in (p.f_osc_hz, p.startup_margin, p.pn_dbchz)
        ])
    return buf.getvalue()

