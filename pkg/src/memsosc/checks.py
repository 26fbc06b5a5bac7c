"""Self-checks behind the ``report`` command.

Each check recomputes one headline number or property on a design card and
compares it against a fixed target and tolerance. ``run_checks`` returns
them all; the CLI exits nonzero if any fails.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from .design import OscDesign
from .mna import ac_solve, input_impedance, kcl_residuals, transfer_function
from .netlist import (
    Capacitor, Inductor, ISource, MutualCoupling, Netlist, Resistor, Vccs, VSource,
    validate_netlist,
)
from .oscillator import (
    center_tank, combined_q, detune_sweep, lphi_bounds, loop_gain, noise_cross_check,
    operating_point,
)
from .phase_noise import fom, leeson_pn, lumped_noise_power, noise_factor, phase_noise
from .resonator import resonator_phase_at

DETUNE_DELTAS = (0.0, 1e9, 2e9, 3e9, 3.7e9)
SOFT_PN_LIMIT = -140.0  # dBc/Hz up to 3.7 GHz of detuning, reference only


@dataclass(frozen=True)
class Check:
    key: str
    title: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.key:<4} {self.title}: {self.detail}"

    def to_dict(self) -> dict:
        return asdict(self)


# --------------------------------------------------------------------------
# random circuits for fuzzing
# --------------------------------------------------------------------------

def random_netlist(rng: np.random.Generator, nodes: int = 6, extra: int = 6,
                   with_active: bool = True) -> Netlist:
    """A connected, valid random netlist driven by one source.

    A random spanning tree of R, L and C elements ties every node to ground,
    then ``extra`` more passives (and, with ``with_active``, a VCCS and a
    coupled inductor pair) are sprinkled on top.
    """
    names = ["0"] + [f"n{i}" for i in range(1, nodes + 1)]
    els = []
    counter = iter(range(10_000))

    def passive(a, b):
        kind = rng.integers(3)
        i = next(counter)
        if kind == 0:
            return Resistor(f"R{i}", a, b, float(10 ** rng.uniform(1, 4)))
        if kind == 1:
            return Capacitor(f"C{i}", a, b, float(10 ** rng.uniform(-15, -12)))
        return Inductor(f"L{i}", a, b, float(10 ** rng.uniform(-10, -8)))

    for k in range(1, len(names)):
        # every node gets at least two terminals: its tree edge plus a shunt
        els.append(passive(names[k], names[int(rng.integers(k))]))
        els.append(passive(names[k], "0"))
    for _ in range(extra):
        a, b = rng.choice(len(names), size=2, replace=False)
        els.append(passive(names[a], names[b]))
    if with_active:
        a, b, c = rng.choice(len(names), size=3, replace=False)
        els.append(Vccs("G1", names[a], names[b], names[c], "0", float(rng.uniform(-5e-3, 5e-3))))
        ind = [e.name for e in els if isinstance(e, Inductor)]
        if len(ind) >= 2:
            la, lb = rng.choice(ind, size=2, replace=False)
            els.append(MutualCoupling("K1", str(la), str(lb), float(rng.uniform(0, 0.95))))
    src = names[int(rng.integers(1, len(names)))]
    if rng.random() < 0.5:
        els.append(VSource("V1", src, "0", float(rng.uniform(0.1, 2)), float(rng.uniform(-180, 180))))
    else:
        els.append(ISource("I1", "0", src, float(rng.uniform(1e-3, 1e-1)), float(rng.uniform(-180, 180))))
    return Netlist(tuple(els), "random")


def kcl_fuzz(count: int = 1000, seed: int = 20240501, bound: float = 1e-9) -> tuple[int, float]:
    """Solve ``count`` random netlists; return (violations, worst normalized residual).

    The residual at a node is normalized by the largest current incident on
    it. Nodes whose currents are all below 1e-12 of the largest current in
    the circuit carry round-off only (the source never reaches them) and are
    skipped.
    """
    rng = np.random.default_rng(seed)
    bad, worst = 0, 0.0
    for _ in range(count):
        net = random_netlist(rng, nodes=int(rng.integers(2, 9)), extra=int(rng.integers(0, 8)))
        if validate_netlist(net):
            bad += 1
            continue
        sol = ac_solve(net, float(10 ** rng.uniform(8, 10.7)))
        residuals = kcl_residuals(sol)
        floor = 1e-12 * max(big for _, big in residuals.values())
        for res, largest in residuals.values():
            if largest <= floor:
                continue
            ratio = res / largest
            worst = max(worst, ratio)
            if ratio >= bound:
                bad += 1
                break
    return bad, worst


# --------------------------------------------------------------------------
# oracle circuits
# --------------------------------------------------------------------------

def _rel(a: complex, b: complex) -> float:
    return abs(a - b) / abs(b)


def _mna_suite() -> tuple[bool, str]:
    failures = []
    r, l, c = 50.0, 2e-9, 1e-12
    f0 = 1 / (2 * math.pi * math.sqrt(l * c))
    series = Netlist((VSource("V1", "a", "0", 1.0), Resistor("R1", "a", "b", r),
                      Inductor("L1", "b", "c", l), Capacitor("C1", "c", "0", c)))
    for f in (0.5 * f0, f0, 1.7 * f0):
        w = 2 * math.pi * f
        expect = 1 / (r + 1j * w * l + 1 / (1j * w * c))
        if _rel(ac_solve(series, f).i("L1"), expect) > 1e-9:
            failures.append(f"series RLC at {f:.4g} Hz")
    par = Netlist((Resistor("R1", "a", "0", r), Inductor("L1", "a", "0", l),
                   Capacitor("C1", "a", "0", c)))
    grid = f0 * np.array([0.5, 0.999, 1.0, 1.001, 2.0])
    z = input_impedance(par, ("a", "0"), grid)
    w = 2 * np.pi * grid
    expect = 1 / (1 / r + 1 / (1j * w * l) + 1j * w * c)
    if np.max(np.abs(z.values - expect) / np.abs(expect)) > 1e-9:
        failures.append("parallel RLC impedance")

    two = Netlist((VSource("V1", "a", "0", 1.0), Resistor("R1", "a", "m", 100.0),
                   Capacitor("C1", "m", "0", 1e-12), ISource("I1", "0", "m", 0.01, 30.0),
                   Inductor("L1", "m", "0", 1e-9)))
    f = 3e9
    both = ac_solve(two, f).v("m")
    only_v = ac_solve(two.replace(ISource("I1", "0", "m", 0.0)), f).v("m")
    only_i = ac_solve(two.replace(VSource("V1", "a", "0", 0.0)), f).v("m")
    if _rel(only_v + only_i, both) > 1e-9:
        failures.append("superposition")

    rlc = Netlist((Resistor("R1", "a", "b", 30.0), Capacitor("C1", "b", "0", 2e-13),
                   Inductor("L1", "a", "0", 3e-9), Inductor("L2", "b", "c", 1e-9),
                   MutualCoupling("K1", "L1", "L2", 0.4), Resistor("R2", "c", "0", 75.0)))
    from .mna import transimpedance
    zab = transimpedance(rlc, ("a", "0"), "c", f)
    zba = transimpedance(rlc, ("c", "0"), "a", f)
    if _rel(zab, zba) > 1e-9:
        failures.append("reciprocity")
    zin = input_impedance(rlc, ("a", "0"), np.geomspace(1e8, 1e11, 61))
    if np.any(zin.values.real < -1e-9 * np.abs(zin.values)):
        failures.append("passivity")

    k0 = Netlist((VSource("V1", "a", "0", 1.0), Inductor("L1", "a", "0", 3e-9),
                  Inductor("L2", "b", "0", 1e-9), MutualCoupling("K1", "L1", "L2", 0.0),
                  ISource("I1", "0", "b", 1e-3), Resistor("R1", "b", "0", 50.0)))
    plain = k0.without("K1")
    s1, s2 = ac_solve(k0, f), ac_solve(plain, f)
    if _rel(s1.i("L1"), s2.i("L1")) > 1e-12 or _rel(s1.v("b"), s2.v("b")) > 1e-12:
        failures.append("k=0 decoupling")

    bad, worst = kcl_fuzz()
    if bad:
        failures.append(f"KCL fuzz ({bad} of 1000, worst {worst:.1e})")
    detail = "all oracles within tolerance" if not failures else "; ".join(failures)
    return not failures, f"{detail} (KCL worst {worst:.1e})"


# --------------------------------------------------------------------------
# acceptance checks
# --------------------------------------------------------------------------

def _c1(d):
    r = leeson_pn(d, 1e6, d.resonator.q_mems, 1.0)
    return abs(r.pn_dbchz - (-167.0)) <= 0.5, f"PN_min = {r.pn_dbchz:.2f} dBc/Hz (target -167 +/- 0.5)"


def _c2(d):
    f = noise_factor(d).value
    pn = phase_noise(d, 1e6).pn_dbchz
    ok = abs(f - 32.3) <= 0.5 and abs(pn - (-152.0)) <= 1.0
    return ok, f"F = {f:.3f} (32.3 +/- 0.5), PN = {pn:.2f} dBc/Hz (-152.0 +/- 1.0)"


def _c3(d):
    b = lphi_bounds(d)
    ok = abs(b.f_phi / 88e9 - 1) <= 0.01 and b.satisfied and b.l_min < 1e-12
    return ok, (f"f_phi = {b.f_phi / 1e9:.2f} GHz, L_phi window "
                f"[{b.l_min * 1e12:.3f} pH, {b.l_max * 1e9:.3f} nH]")


def _c4(_d):
    a = fom(-147.8, 30e9, 1e6, 5.7e-3).fom_dbchz
    b = fom(-105.0, 17e9, 1e6, 7.2e-3).fom_dbchz
    ok = abs(a - 229.8) <= 0.2 and abs(b - 182.0) <= 1.0
    return ok, f"FoM = {a:.2f} dB (229.8 +/- 0.2), 17 GHz row {b:.2f} dB (182 +/- 1)"


def _c5(d):
    q = combined_q(d.with_tank_q(10.0))
    ok = abs(q.q_osc / 10010 - 1) <= 0.01 and abs(q.q_osc - d.resonator.q_mems) / 1e4 <= 0.002
    return ok, (f"Q_OSC = {q.q_osc:.1f} (10010 +/- 1%), Q_L0 = {q.q_l0:.2f}, "
                f"Q_MEMS = {q.q_mems:.1f}")


def _c6(d):
    p = resonator_phase_at(d.resonator, d.f0)
    return abs(p - 270.0) <= 2.0, f"phase = {p:.3f} deg (270 +/- 2)"


def _c7(d):
    r = loop_gain(d)
    ok = abs(r.phase_deg) <= 5.0 and r.magnitude > 1.0
    return ok, (f"|T| = {r.magnitude:.1f}, phase = {r.phase_deg:.2e} deg; analytic "
                f"{r.analytic_loop_gain:.0f} (x{r.agreement_factor:.2f} of simulated), "
                f"untrimmed tank phase {r.untrimmed_phase_deg:.1f} deg")


def _c8(_d):
    return _mna_suite()


def _c9(d):
    x = noise_cross_check(d)
    hot = noise_cross_check(d, 600.0)
    lumped_hot = lumped_noise_power(d, 600.0).total
    linear = hot.mna_total == 2 * x.mna_total and lumped_hot == 2 * x.lumped_total
    ok = abs(x.ratio - 1) <= 0.10 and linear
    return ok, (f"MNA {x.mna_total:.3e} vs lumped {x.lumped_total:.3e} V^2/Hz "
                f"(ratio {x.ratio:.4f}); T-linear {'exact' if linear else 'BROKEN'}")


def _c10(d):
    centered = center_tank(d)
    pts = detune_sweep(centered, DETUNE_DELTAS)
    pns = [p.pn_dbchz for p in pts]
    lost = [p.delta_hz for p in pts if not p.oscillating]
    mono = not lost and all(b >= a for a, b in zip(pns, pns[1:]))
    half_bw = d.f0 / (2 * d.resonator.q_mems)
    pull = max(abs(p.f_osc_hz - d.f0) for p in pts) if not lost else math.inf
    aligned = operating_point(centered)
    same = pts[0] == aligned
    soft = max(pns) if not lost else math.nan
    ok = mono and pull <= 5 * half_bw and same and pts[0].f_osc_hz == d.f0
    return ok, (f"PN {', '.join(f'{p:.2f}' for p in pns)} dBc/Hz; max pull "
                f"{pull / 1e6:.3f} MHz (limit {5 * half_bw / 1e6:.1f}); "
                f"zero-detune identical: {same}; soft reference {SOFT_PN_LIMIT:.0f} dBc/Hz "
                f"{'met' if soft < SOFT_PN_LIMIT else 'missed'}")


CHECKS: tuple[tuple[str, str, Callable], ...] = (
    ("1", "theoretical PN floor", _c1),
    ("2", "noise factor and PN", _c2),
    ("3", "phase-shifter design point", _c3),
    ("4", "figure of merit", _c4),
    ("5", "Q additivity", _c5),
    ("6", "270 degree contract", _c6),
    ("7", "Barkhausen criteria", _c7),
    ("8", "MNA oracle suite", _c8),
    ("9", "noise cross-check", _c9),
    ("10", "detuning properties", _c10),
)


def run_checks(d: OscDesign | None = None) -> list[Check]:
    d = OscDesign() if d is None else d
    out = []
    for key, title, fn in CHECKS:
        try:
            ok, detail = fn(d)
        except Exception as exc:  # a crash is a failed check, not a crashed report
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append(Check(key, title, bool(ok), detail))
    return out


def timed_checks(d: OscDesign | None = None) -> tuple[list[Check], float]:
    t0 = time.perf_counter()
    checks = run_checks(d)
    return checks, time.perf_counter() - t0
