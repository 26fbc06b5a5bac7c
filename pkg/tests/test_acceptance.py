"""Headline criteria on the default card, each at its stated tolerance.

Each test records a PASS/FAIL line shown in the terminal summary (and on
stdout with ``-s``).
"""

import cmath
import math
import time

import numpy as np
import pytest

from memsosc.checks import kcl_fuzz
from memsosc.design import OscDesign
from memsosc.mna import (
    FrequencyResponse, ac_solve, input_impedance, output_noise, transimpedance,
)
from memsosc.netlist import (
    Capacitor, Inductor, ISource, MutualCoupling, Netlist, Resistor, VSource,
)
from memsosc.oscillator import (
    build_loop_netlist, center_tank, combined_q, detune_sweep, extract_q, lphi_bounds,
    operating_point,
)
from memsosc.phase_noise import fom, leeson_pn, lumped_noise_power, noise_factor, phase_noise
from memsosc.resonator import build_rft_netlist

CARD = OscDesign()
F0 = CARD.f0


@pytest.fixture(scope="module")
def centered():
    return center_tank(CARD)


def test_c_1_theoretical_floor(verdict):
    t0 = time.perf_counter()
    pn = leeson_pn(CARD, 1e6, CARD.resonator.q_mems, 1.0).pn_dbchz
    ms = 1e3 * (time.perf_counter() - t0)
    ok = abs(pn + 167.0) <= 0.5
    assert verdict(ok, f"PN_min = {pn:.2f} dBc/Hz, target -167 +/- 0.5 ({ms:.2f} ms)")


def test_c_2_noise_factor(verdict):
    f = noise_factor(CARD).value
    pn = phase_noise(CARD, 1e6).pn_dbchz
    ok = abs(f - 32.3) <= 0.5 and abs(pn + 152.0) <= 1.0
    assert verdict(ok, f"F = {f:.3f} (32.3 +/- 0.5), PN = {pn:.2f} dBc/Hz (-152.0 +/- 1.0)")


def test_c_3_phase_shifter(verdict):
    b = lphi_bounds(CARD)
    f_phi = 1 / (2 * math.pi * math.sqrt(650e-12 * 5e-15))
    ok = (abs(b.f_phi / 88e9 - 1) <= 0.01 and b.f_phi == pytest.approx(f_phi, rel=1e-12)
          and b.l_min < b.l_phi < b.l_max and b.l_min < 1e-12)
    assert verdict(ok, f"f_phi = {b.f_phi / 1e9:.2f} GHz (88 +/- 1%), "
                       f"l_min = {b.l_min * 1e12:.3f} pH, l_max = {b.l_max * 1e9:.2f} nH")


def test_c_4_figure_of_merit(verdict):
    a = fom(-147.8, 30e9, 1e6, 5.7e-3).fom_dbchz
    b = fom(-105.0, 17e9, 1e6, 7.2e-3).fom_dbchz
    ok = abs(a - 229.8) <= 0.2 and abs(b - 182.0) <= 1.0
    assert verdict(ok, f"FoM = {a:.2f} dB (229.8 +/- 0.2), 17 GHz row = {b:.2f} dB (182 +/- 1)")


def test_c_5_q_additivity(verdict):
    t0 = time.perf_counter()
    q = combined_q(CARD.with_tank_q(10.0))
    sec = time.perf_counter() - t0
    ok = (abs(q.q_osc / 10010 - 1) <= 0.01 and abs(q.q_osc - 1e4) / 1e4 <= 0.002
          and sec < 1.0)
    assert verdict(ok, f"Q_OSC = {q.q_osc:.1f} (10010 +/- 1%, within 0.2% of 1e4), "
                       f"Q_L0 = {q.q_l0:.2f}, Q_MEMS = {q.q_mems:.1f} ({sec:.3f} s)")


def test_c_6_phase_contract(verdict):
    sol = ac_solve(build_rft_netlist(CARD.resonator), F0)
    phase = math.degrees(cmath.phase(sol.i("Gsense") / sol.v("drv"))) % 360
    ok = abs(phase - 270.0) <= 2.0
    assert verdict(ok, f"drive-to-sense phase at f0 = {phase:.3f} deg (270 +/- 2)")


def test_c_7_barkhausen(verdict, centered):
    t = ac_solve(build_loop_netlist(centered, break_at="gate"), F0).v("x")
    phase = math.degrees(cmath.phase(t))
    ok = abs(phase) <= 5.0 and abs(t) > 1.0
    assert verdict(ok, f"|T(f0)| = {abs(t):.1f} (> 1), phase = {phase:.2e} deg (0 +/- 5)")


def _rlc_oracles() -> list[str]:
    failures = []
    r, l, c = 50.0, 2e-9, 1e-12
    f0 = 1 / (2 * math.pi * math.sqrt(l * c))
    series = Netlist((VSource("V1", "a", "0", 1.0), Resistor("R1", "a", "b", r),
                      Inductor("L1", "b", "c", l), Capacitor("C1", "c", "0", c)))
    for f in f0 * np.array([0.3, 0.9, 1.0, 1.1, 3.0]):
        w = 2 * math.pi * f
        i = ac_solve(series, f).i("L1")
        expect = 1 / (r + 1j * w * l + 1 / (1j * w * c))
        if abs(abs(i) / abs(expect) - 1) > 1e-9 or abs(cmath.phase(i) - cmath.phase(expect)) > 1e-9:
            failures.append(f"series RLC at {f:.4g} Hz")
    h = 1e-6  # centered-difference truncation ~ (Q h)^2
    grid = f0 * np.array([1 - h, 1.0, 1 + h])
    y = FrequencyResponse("i", grid, [ac_solve(series, f).i("L1") for f in grid])
    if abs(extract_q(y, f0) / (math.sqrt(l / c) / r) - 1) > 1e-9:
        failures.append("series RLC Q")
    rp = 500.0
    par = Netlist((Resistor("R1", "a", "0", rp), Inductor("L1", "a", "0", l),
                   Capacitor("C1", "a", "0", c)))
    z = input_impedance(par, ("a", "0"), f0 * np.array([0.3, 0.9, 1 - h, 1.0, 1 + h, 1.1, 3.0]))
    w = 2 * np.pi * z.freqs
    expect = 1 / (1 / rp + 1 / (1j * w * l) + 1j * w * c)
    if (np.max(np.abs(z.magnitude / np.abs(expect) - 1)) > 1e-9
            or np.max(np.abs(np.angle(z.values) - np.angle(expect))) > 1e-9):
        failures.append("parallel RLC impedance")
    core = FrequencyResponse("z", z.freqs[2:5], z.values[2:5])
    if abs(extract_q(core, f0) / (rp * math.sqrt(c / l)) - 1) > 1e-9:
        failures.append("parallel RLC Q")
    return failures


def _property_oracles() -> list[str]:
    failures = []
    f = 3e9
    net = Netlist((VSource("V1", "a", "0", 1.0), Resistor("R1", "a", "m", 100.0),
                   Capacitor("C1", "m", "0", 1e-12), ISource("I1", "0", "m", 0.01, 30.0),
                   Inductor("L1", "m", "0", 1e-9)))
    both = ac_solve(net, f).v("m")
    parts = (ac_solve(net.replace(ISource("I1", "0", "m", 0.0)), f).v("m")
             + ac_solve(net.replace(VSource("V1", "a", "0", 0.0)), f).v("m"))
    if abs(parts - both) > 1e-9 * abs(both):
        failures.append("superposition")
    two_port = Netlist((Resistor("R1", "a", "b", 30.0), Capacitor("C1", "b", "0", 2e-13),
                        Inductor("L1", "a", "0", 3e-9), Inductor("L2", "b", "c", 1e-9),
                        MutualCoupling("K1", "L1", "L2", 0.6), Resistor("R2", "c", "0", 75.0)))
    zab = transimpedance(two_port, ("a", "0"), "c", f)
    zba = transimpedance(two_port, ("c", "0"), "a", f)
    if abs(zab - zba) > 1e-9 * abs(zab):
        failures.append("reciprocity")
    zin = input_impedance(two_port, ("a", "0"), np.geomspace(1e7, 1e11, 81)).values
    if np.any(zin.real < -1e-9 * np.abs(zin)):
        failures.append("passivity")
    coupled = Netlist((VSource("V1", "a", "0", 1.0), Inductor("L1", "a", "0", 3e-9),
                       Inductor("L2", "b", "0", 1e-9), MutualCoupling("K1", "L1", "L2", 0.0),
                       ISource("I1", "0", "b", 1e-3), Resistor("R1", "b", "0", 50.0)))
    s1, s2 = ac_solve(coupled, f), ac_solve(coupled.without("K1"), f)
    if s1.i("L1") != pytest.approx(s2.i("L1"), rel=1e-12) or s1.v("b") != pytest.approx(
            s2.v("b"), rel=1e-12):
        failures.append("k=0 decoupling")
    return failures


def test_c_8_mna_oracle_suite(verdict):
    failures = _rlc_oracles() + _property_oracles()
    bad, worst = kcl_fuzz(1000)
    if bad:
        failures.append(f"KCL fuzz: {bad} of 1000 netlists")
    detail = "; ".join(failures) or "RLC closed forms to 1e-9, superposition, reciprocity, " \
                                    "passivity, k=0 decoupling"
    assert verdict(not failures, f"{detail}; KCL fuzz 1000 netlists, worst {worst:.1e}")


def test_c_9_noise_cross_check(verdict, centered):
    net = build_loop_netlist(centered, break_at="sense", rl0_noise="lumped")
    cold = output_noise(net, "y", F0, 300.0).total
    hot = output_noise(net, "y", F0, 600.0).total
    lumped = lumped_noise_power(centered, 300.0).total
    lumped_hot = lumped_noise_power(centered, 600.0).total
    ratio = cold / lumped
    linear = hot == 2 * cold and lumped_hot == 2 * lumped
    ok = abs(ratio - 1) <= 0.10 and linear
    assert verdict(ok, f"MNA {cold:.3e} vs lumped {lumped:.3e} V^2/Hz (ratio {ratio:.4f}, "
                       f"within 10%); T-linearity {'exact' if linear else 'broken'}")


def test_c_10_detuning(verdict, centered):
    deltas = (0.0, 1e9, 2e9, 3e9, 3.7e9)
    pts = detune_sweep(centered, deltas)
    pns = [p.pn_dbchz for p in pts]
    oscillating = all(p.oscillating for p in pts)
    mono = oscillating and all(b >= a for a, b in zip(pns, pns[1:]))
    bound = 5 * F0 / (2 * CARD.resonator.q_mems)
    pull = max(abs(p.f_osc_hz - F0) for p in pts) if oscillating else math.inf
    same = pts[0] == operating_point(centered)
    ok = mono and pull <= bound and same
    soft = "met" if oscillating and max(pns) < -140 else "missed"
    assert verdict(ok, f"PN {', '.join(f'{p:.2f}' for p in pns)} dBc/Hz non-improving; "
                       f"pull {pull / 1e6:.2f} MHz <= {bound / 1e6:.1f} MHz; "
                       f"zero detune bit-exact: {same}; -140 dBc/Hz reference {soft}")


def test_c_11_report_runtime(verdict):
    from memsosc.checks import timed_checks
    results, sec = timed_checks(CARD)
    ok = sec < 10.0 and all(c.passed for c in results)
    assert verdict(ok, f"report runs all {len(results)} checks in {sec:.2f} s (< 10 s)")
