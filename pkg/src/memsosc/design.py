"""Oscillator design point and JSON config handling."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .resonator import MotionalBranch, ResonatorParams, synthesize_motional


class DesignInfeasibleError(ValueError):
    pass


@dataclass(frozen=True)
class OscDesign:
    """Half-circuit design of the inductor-phase-shifter oscillator.

    ``r_l0`` is the series loss of the load-tank inductor; its quality factor
    ``q_l0`` is derived at the resonator frequency. ``c_pad`` is the extra
    tank capacitance (drain and routing parasitics) on top of the
    resonator's C0; ``None`` means "trim the tank so the open-loop phase is
    zero at f0" (see :func:`memsosc.oscillator.center_tank`).
    """

    resonator: ResonatorParams = field(default_factory=ResonatorParams)
    l_phi: float = 650e-12
    r_lphi: float = 10.0
    c_in: float = 5e-15
    l0: float = 650e-12
    r_l0: float = 13.0
    gm_m1: float = 15e-3
    ro_m1: float = 2e3
    vdd: float = 0.8
    v_osc: float = 0.8
    p_dc: float = 5.7e-3
    gamma: float = 1.0
    c_pad: float | None = None

    def __post_init__(self):
        for f in fields(self):
            if f.name in ("resonator", "c_pad", "gamma"):
                continue
            value = getattr(self, f.name)
            if not math.isfinite(value) or value <= 0:
                raise ValueError(f"{f.name} must be positive and finite, got {value}")
        if not math.isfinite(self.gamma) or self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if self.v_osc > self.vdd:
            raise ValueError(f"v_osc {self.v_osc} exceeds vdd {self.vdd}")
        if self.c_pad is not None and (not math.isfinite(self.c_pad) or self.c_pad < 0):
            raise ValueError(f"c_pad must be >= 0, got {self.c_pad}")

    @property
    def f0(self) -> float:
        return self.resonator.f0

    @property
    def omega0(self) -> float:
        return 2 * math.pi * self.resonator.f0

    @property
    def q_l0(self) -> float:
        return self.omega0 * self.l0 / self.r_l0

    @property
    def motional(self) -> MotionalBranch:
        return synthesize_motional(self.resonator)

    def with_(self, **changes) -> "OscDesign":
        return replace(self, **changes)

    def with_tank_q(self, q_l0: float) -> "OscDesign":
        """Same L0 with the series loss set for quality factor ``q_l0`` at f0."""
        return replace(self, r_l0=self.omega0 * self.l0 / q_l0)

    # -- config -----------------------------------------------------------
    def to_dict(self) -> dict:
        data = asdict(self)
        data["resonator"] = self.resonator.to_dict()
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "OscDesign":
        data = dict(data)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown design keys: {sorted(unknown)}")
        res = ResonatorParams.from_dict(data.pop("resonator", {}))
        kwargs = {}
        for key, value in data.items():
            kwargs[key] = None if value is None else float(value)
        return cls(resonator=res, **kwargs)


def parallel(*resistances: float) -> float:
    """Parallel combination; infinite members are ignored."""
    g = math.fsum(1.0 / r for r in resistances if not math.isinf(r))
    return math.inf if g == 0 else 1.0 / g


def apply_overrides(data: dict, overrides) -> dict:
    """Apply ``key.sub=value`` overrides to a nested config dict (copy)."""
    out = json.loads(json.dumps(data))
    for item in overrides or ():
        key, sep, raw = item.partition("=")
        if not sep:
            raise ValueError(f"override {item!r} is not key=value")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = out
        parts = key.strip().split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ValueError(f"override path {key!r} crosses a scalar")
        node[parts[-1]] = value
    return out


def load_design(path: str | Path | None = None, overrides=None) -> OscDesign:
    """Read an OscDesign JSON file (``None`` gives the default card).

    The file may hold the design at top level or under a ``"design"`` key.
    """
    data: dict = {}
    if path is not None:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if "design" in data:
            data = data["design"]
    if not data:
        data = OscDesign().to_dict()
    return OscDesign.from_dict(apply_overrides(data, overrides))
