"""Electrical model of the active-mode resonant fin transistor (AM-RFT).

The device is a voltage-driven, current-sensed resonator. In the half-circuit
model the drive port ``drv`` carries the static capacitance C0 and the
primary L1 of a unity-coupled transformer. The secondary L2 closes the series
motional loop Rm-Lm-Cm, so the motional branch sees the drive voltage 1:1.
The sense transistor is a VCCS whose control is the voltage across Cm and
whose output ``out`` is loaded by Rout || Cout::

    drv --+-- C0 -- 0          s -- Rm -- m1 -- Lm -- m2 -- Cm -- 0
          +-- L1 -- 0          s -- L2 -- 0         (K: L1 <-> L2)
    out -- Gsense(ctrl m2,0) -- 0,  out -- Rout -- 0,  out -- Cout -- 0

``Gsense`` draws ``gm_mech * V(m2)`` from ``out``; that drain current is the
sensed current. At resonance the motional current is in phase with the
drive and V(m2) lags it by 90 degrees, so the sensed current sits at 270
degrees relative to the drive voltage.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import asdict, dataclass, fields, replace

from .mna import ac_solve
from .netlist import (
    Capacitor, Element, Inductor, MutualCoupling, Netlist, Resistor, Vccs, VSource,
)


@dataclass(frozen=True)
class ResonatorParams:
    f0: float = 30e9
    q_mems: float = 1e4
    rm: float = 332.0
    coupling_ratio: float = 1e-4
    gm_mech: float = 100e-6
    r_out: float = 2e3
    c_out: float = 5e-15
    l_couple: float = 10e-9
    k: float = 1.0

    def __post_init__(self):
        for name in ("f0", "q_mems", "rm", "coupling_ratio", "gm_mech", "r_out", "l_couple"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise ValueError(f"{name} must be positive and finite, got {value}")
        if not math.isfinite(self.c_out) or self.c_out < 0:
            raise ValueError(f"c_out must be >= 0, got {self.c_out}")
        if self.coupling_ratio > 1e-2:
            raise ValueError(f"coupling_ratio {self.coupling_ratio} exceeds 1e-2")
        if not 0.0 <= self.k <= 1.0:
            raise ValueError(f"k must lie in [0, 1], got {self.k}")

    @classmethod
    def from_dict(cls, data: dict) -> "ResonatorParams":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown resonator keys: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in data.items()})

    def to_dict(self) -> dict:
        return asdict(self)

    def with_(self, **changes) -> "ResonatorParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class MotionalBranch:
    lm: float
    cm: float
    c0: float


def synthesize_motional(p: ResonatorParams) -> MotionalBranch:
    """Lm, Cm and C0 from f0, Q, Rm and the Cm/C0 coupling ratio.

    Uses the series-resonator identities ``Q = w0 Lm / Rm`` and
    ``w0^2 Lm Cm = 1``.
    """
    w0 = 2 * math.pi * p.f0
    lm = p.q_mems * p.rm / w0
    cm = 1.0 / (w0 * w0 * lm)
    return MotionalBranch(lm=lm, cm=cm, c0=cm / p.coupling_ratio)


def rft_elements(p: ResonatorParams, drive: str = "drv", out: str = "out",
                 suffix: str = "", gamma: float = 1.0) -> list[Element]:
    """Elements of one half-circuit RFT between nodes ``drive`` and ``out``.

    Internal node and element names get ``suffix`` appended so several
    copies can share a netlist.
    """
    mb = synthesize_motional(p)
    s, m1, m2 = f"s{suffix}", f"m1{suffix}", f"m2{suffix}"
    elements: list[Element] = [
        Capacitor(f"C0{suffix}", drive, "0", mb.c0),
        Inductor(f"L1{suffix}", drive, "0", p.l_couple),
        Inductor(f"L2{suffix}", s, "0", p.l_couple),
        MutualCoupling(f"K12{suffix}", f"L1{suffix}", f"L2{suffix}", p.k),
        Resistor(f"Rm{suffix}", s, m1, p.rm),
        Inductor(f"Lm{suffix}", m1, m2, mb.lm),
        Capacitor(f"Cm{suffix}", m2, "0", mb.cm),
        Vccs(f"Gsense{suffix}", out, "0", m2, "0", p.gm_mech, True, gamma),
        Resistor(f"Rout{suffix}", out, "0", p.r_out, noisy=False),
    ]
    if p.c_out > 0:
        elements.append(Capacitor(f"Cout{suffix}", out, "0", p.c_out))
    return elements


def build_rft_netlist(p: ResonatorParams, mode: str = "half", drive: bool = True) -> Netlist:
    """Stand-alone RFT netlist.

    ``mode="half"`` uses nodes ``drv``/``out``; ``mode="differential"``
    mirrors two halves on ``drv_p``/``drv_n`` and ``out_p``/``out_n``
    (internal names suffixed ``_p``/``_n``), driven in anti-phase when
    ``drive`` is set. A 1 V drive source ``Vdrv`` (``Vdrv_p``/``Vdrv_n``)
    is included unless ``drive=False``, which leaves the port open for
    impedance measurements.
    """
    if mode == "half":
        elements = rft_elements(p)
        if drive:
            elements.append(VSource("Vdrv", "drv", "0", 1.0))
        return Netlist(tuple(elements), "AM-RFT half circuit")
    if mode == "differential":
        elements = []
        for suffix, phase in (("_p", 0.0), ("_n", 180.0)):
            elements += rft_elements(p, f"drv{suffix}", f"out{suffix}", suffix)
            if drive:
                elements.append(VSource(f"Vdrv{suffix}", f"drv{suffix}", "0", 1.0, phase))
        return Netlist(tuple(elements), "AM-RFT differential")
    raise ValueError(f"mode must be 'half' or 'differential', got {mode!r}")


def sensed_current(p: ResonatorParams, freq: float) -> complex:
    """Sense drain current per volt of drive at ``freq``."""
    return ac_solve(build_rft_netlist(p), freq).i("Gsense")


def resonator_phase_at(p: ResonatorParams, freq: float) -> float:
    """Phase of the sensed drain current relative to the drive, in [0, 360)."""
    return math.degrees(cmath.phase(sensed_current(p, freq))) % 360.0
