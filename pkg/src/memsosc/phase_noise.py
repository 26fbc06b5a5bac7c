"""Lumped noise budget, noise factor, Leeson phase noise and figure of merit.

Noise sources of the oscillator, lumped at the output node Y and the gate
node X::

    rm       4kT/Rm          at Y, reflected 1:1 through the transformer
    rl0      4kT/RL0         at Y
    gm_m1    4kT*gamma*gm1   at Y
    gm_mech  4kT*gamma*gmm   at X, through R_Lphi^2 and the gain stage
    rlphi    4kT/R_Lphi      at X, through R_Lphi^2 and the gain stage

``lumped_noise_power`` uses the single-stage voltage gain ``gm1*R0`` for the
X-node terms by default, which makes ``P_n / (4kT R0^2 / Rm)`` equal the
noise factor exactly. ``gain="printed"`` uses ``(gm1*R0)^2`` instead.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass
from typing import Collection, Sequence

from .design import OscDesign, parallel
from .mna import BOLTZMANN, DEFAULT_TEMPERATURE

NOISE_TERMS = ("rm", "rl0", "gm_m1", "gm_mech", "rlphi")


def lumped_r0(d: OscDesign) -> float:
    """R0 = Rm || Q_L0^2 R_L0 || ro_M1."""
    return parallel(d.resonator.rm, d.q_l0 ** 2 * d.r_l0, d.ro_m1)


def _enabled(enabled: Collection[str] | None) -> frozenset:
    if enabled is None:
        return frozenset(NOISE_TERMS)
    bad = set(enabled) - set(NOISE_TERMS)
    if bad:
        raise ValueError(f"unknown noise terms {sorted(bad)}; choose from {NOISE_TERMS}")
    return frozenset(enabled)


@dataclass(frozen=True)
class NoiseFactor:
    value: float
    addends: dict  # term -> contribution to F

    def __float__(self) -> float:
        return self.value


def noise_factor(d: OscDesign, enabled: Collection[str] | None = None) -> NoiseFactor:
    """Oscillator noise factor normalized to the resonator loss Rm.

    ``F = 1 + Rm/RL0 + g*gm1*Rm + g*gmm*gm1^2*Rm*RLphi^2 + gm1^2*Rm*RLphi``
    with ``g`` the excess-noise factor. Terms left out of ``enabled`` count
    as zero (``rm`` contributes the leading 1).
    """
    on = _enabled(enabled)
    rm, g = d.resonator.rm, d.gamma
    raw = {
        "rm": 1.0,
        "rl0": rm / d.r_l0,
        "gm_m1": g * d.gm_m1 * rm,
        "gm_mech": g * d.resonator.gm_mech * d.gm_m1 ** 2 * rm * d.r_lphi ** 2,
        "rlphi": d.gm_m1 ** 2 * rm * d.r_lphi,
    }
    addends = {k: (v if k in on else 0.0) for k, v in raw.items()}
    return NoiseFactor(math.fsum(addends.values()), addends)


@dataclass(frozen=True)
class LumpedNoise:
    total: float  # V^2/Hz at the output node
    terms: dict
    r0: float
    av1: float
    temperature: float


def lumped_noise_power(d: OscDesign, temperature: float = DEFAULT_TEMPERATURE,
                       r0: float | None = None, gain: str = "single",
                       enabled: Collection[str] | None = None) -> LumpedNoise:
    """Total output noise PSD before loop filtering, term by term."""
    if not temperature > 0:
        raise ValueError("temperature must be positive")
    on = _enabled(enabled)
    r0 = lumped_r0(d) if r0 is None else r0
    if gain == "single":
        av1 = d.gm_m1 * r0
    elif gain == "printed":
        av1 = (d.gm_m1 * r0) ** 2
    else:
        raise ValueError(f"gain must be 'single' or 'printed', got {gain!r}")
    four_kt = 4.0 * BOLTZMANN * temperature
    res = d.resonator
    raw = {
        "rm": four_kt / res.rm * r0 ** 2,
        "rl0": four_kt / d.r_l0 * r0 ** 2,
        "gm_m1": four_kt * d.gamma * d.gm_m1 * r0 ** 2,
        "gm_mech": av1 ** 2 * four_kt * d.gamma * res.gm_mech * d.r_lphi ** 2,
        "rlphi": av1 ** 2 * four_kt / d.r_lphi * d.r_lphi ** 2,
    }
    terms = {k: (v if k in on else 0.0) for k, v in raw.items()}
    return LumpedNoise(math.fsum(terms.values()), terms, r0, av1, temperature)


@dataclass(frozen=True)
class PhaseNoiseResult:
    f0: float
    delta_f: float
    noise_factor_f: float
    pn_dbchz: float
    pn_min_dbchz: float
    p_n_total: float
    temperature: float
    r0: float
    q_osc: float
    v_osc: float

    def to_dict(self) -> dict:
        return asdict(self)


def _leeson_db(four_kt_r0sq_over_rm: float, carrier: float, f0: float, q: float, df: float) -> float:
    return 10.0 * math.log10(four_kt_r0sq_over_rm / carrier * (f0 / (2.0 * q * df)) ** 2)


def leeson_pn(d: OscDesign, delta_f: float, q_osc: float, F: float,
              temperature: float = DEFAULT_TEMPERATURE, r0: float | None = None,
              carrier_halved: bool = False) -> PhaseNoiseResult:
    """Single-sideband phase noise in dBc/Hz in the 1/f^2 region.

    ``PN = 10 log10(F * 4kT R0^2 / (Rm Vosc^2) * (f0 / (2 Q df))^2)``.
    ``r0`` defaults to Rm, the resonator-limited case. With
    ``carrier_halved`` the carrier power is ``Vosc^2 / 2`` (3 dB worse).
    """
    if not delta_f > 0 or not q_osc > 0 or not F >= 1.0:
        raise ValueError("need delta_f > 0, q_osc > 0 and F >= 1")
    if not temperature > 0:
        raise ValueError("temperature must be positive")
    rm = d.resonator.rm
    r0 = rm if r0 is None else r0
    base = 4.0 * BOLTZMANN * temperature * r0 ** 2 / rm
    carrier = d.v_osc ** 2 / (2.0 if carrier_halved else 1.0)
    pn_min = _leeson_db(base, carrier, d.f0, q_osc, delta_f)
    pn = _leeson_db(F * base, carrier, d.f0, q_osc, delta_f)
    return PhaseNoiseResult(d.f0, delta_f, float(F), pn, pn_min, F * base,
                            temperature, r0, q_osc, d.v_osc)


@dataclass(frozen=True)
class FomResult:
    fom_dbchz: float
    pn_dbchz: float
    p_dc: float
    f0: float
    delta_f: float

    def to_dict(self) -> dict:
        return asdict(self)


def fom(pn_dbchz: float, f0: float, delta_f: float, p_dc: float) -> FomResult:
    """FoM = -PN + 20 log10(f0/df) - 10 log10(P_DC / 1 mW)."""
    if not p_dc > 0:
        raise ValueError("p_dc must be positive")
    value = -pn_dbchz + 20.0 * math.log10(f0 / delta_f) - 10.0 * math.log10(p_dc / 1e-3)
    return FomResult(value, pn_dbchz, p_dc, f0, delta_f)


def phase_noise(d: OscDesign, delta_f: float = 1e6,
                temperature: float = DEFAULT_TEMPERATURE, q_osc: float | None = None,
                r0: float | None = None, carrier_halved: bool = False) -> PhaseNoiseResult:
    """Headline phase noise: F from the design, Q_OSC defaulting to Q_MEMS."""
    q = d.resonator.q_mems if q_osc is None else q_osc
    return leeson_pn(d, delta_f, q, noise_factor(d).value, temperature, r0, carrier_halved)


def pn_curve_csv(d: OscDesign, offsets: Sequence[float], **kwargs) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["offset_hz", "pn_dbchz"])
    for off in offsets:
        w.writerow([repr(float(off)), repr(phase_noise(d, off, **kwargs).pn_dbchz)])
    return buf.getvalue()


def to_json(*results, **extra) -> str:
    payload = {}
    for r in results:
        payload[type(r).__name__] = r.to_dict()
    payload.update(extra)
    return json.dumps(payload, indent=2, sort_keys=True)
