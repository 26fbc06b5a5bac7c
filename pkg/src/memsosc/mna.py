"""Complex-phasor modified nodal analysis.

Unknowns are the non-ground node voltages followed by one branch current
per inductor and per voltage source. Every stamp is either frequency
independent or proportional to ``j*omega`` (capacitors, and the
``-j*omega*L`` / ``-j*omega*M`` entries of the inductor branch rows), so a
compiled circuit is the pair ``(A0, A1)`` with ``A(omega) = A0 + j*omega*A1``.

Sign conventions:

* KCL rows sum currents *leaving* a node through elements.
* Inductor and voltage-source branch currents flow from ``n1`` through the
  element to ``n2``.
* An :class:`~memsosc.netlist.ISource` pushes current from ``n1`` through
  itself into ``n2``.
"""

from __future__ import annotations

import csv
import functools
import io
import json
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.constants
import scipy.linalg

from .netlist import (
    GROUND, Capacitor, Inductor, ISource, MutualCoupling, Netlist, Resistor,
    VSource, Vccs, canonical_node, validate_netlist,
)

BOLTZMANN = scipy.constants.k
DEFAULT_TEMPERATURE = 300.0
PERFECT_COUPLING_EPS = 1e-9
PIVOT_TOL = 1e-14
WORKERS_ENV = "MEMSOSC_WORKERS"


class SingularCircuitError(RuntimeError):
    def __init__(self, freq: float, detail: str = ""):
        hint = "check for a floating node or a perfectly coupled inductor pair"
        msg = f"singular MNA system at f = {freq:.9g} Hz ({hint})"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
        self.freq = freq


class InvalidNetlistError(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        text = "; ".join(
            (f"element {v.index}: " if v.index is not None else "") + v.reason
            for v in self.violations
        )
        super().__init__(f"invalid netlist: {text}")


# --------------------------------------------------------------------------
# compilation
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class _System:
    netlist: Netlist
    size: int
    node_index: dict  # node name -> row (ground absent)
    branch_index: dict  # inductor / vsource name -> row
    a0: np.ndarray
    a1: np.ndarray
    b: np.ndarray

    def matrix(self, omega: float) -> np.ndarray:
        return self.a0 + (1j * omega) * self.a1

    def row(self, node: str) -> int | None:
        return self.node_index.get(canonical_node(node))


@functools.lru_cache(maxsize=128)
def compile_netlist(netlist: Netlist, coupling_eps: float = PERFECT_COUPLING_EPS) -> _System:
    """Validate and assemble the frequency-separable MNA matrices."""
    violations = validate_netlist(netlist)
    if violations:
        raise InvalidNetlistError(violations)

    node_index = {name: idx - 1 for name, idx in netlist.nodes.items() if name != GROUND}
    n_nodes = len(node_index)
    branch_index = {}
    for el in netlist.elements:
        if isinstance(el, (Inductor, VSource)):
            branch_index[el.name] = n_nodes + len(branch_index)
    size = n_nodes + len(branch_index)
    a0 = np.zeros((size, size), dtype=complex)
    a1 = np.zeros((size, size), dtype=complex)
    b = np.zeros(size, dtype=complex)

    def r(node):
        return node_index.get(node)

    def stamp_admittance(mat, n1, n2, y):
        i, j = r(n1), r(n2)
        if i is not None:
            mat[i, i] += y
        if j is not None:
            mat[j, j] += y
        if i is not None and j is not None:
            mat[i, j] -= y
            mat[j, i] -= y

    def stamp_branch(n1, n2, k):
        i, j = r(n1), r(n2)
        if i is not None:
            a0[i, k] += 1.0
            a0[k, i] += 1.0
        if j is not None:
            a0[j, k] -= 1.0
            a0[k, j] -= 1.0

    inductance = {}
    for el in netlist.elements:
        if isinstance(el, Resistor):
            stamp_admittance(a0, el.n1, el.n2, 1.0 / el.ohms)
        elif isinstance(el, Capacitor):
            stamp_admittance(a1, el.n1, el.n2, el.farads)
        elif isinstance(el, Inductor):
            k = branch_index[el.name]
            stamp_branch(el.n1, el.n2, k)
            a1[k, k] -= el.henries
            inductance[el.name] = el.henries
        elif isinstance(el, VSource):
            k = branch_index[el.name]
            stamp_branch(el.n1, el.n2, k)
            b[k] += el.amplitude
        elif isinstance(el, ISource):
            i, j = r(el.n1), r(el.n2)
            if i is not None:
                b[i] -= el.amplitude
            if j is not None:
                b[j] += el.amplitude
        elif isinstance(el, Vccs):
            for out, so in ((r(el.out_p), 1.0), (r(el.out_n), -1.0)):
                if out is None:
                    continue
                for ctrl, sc in ((r(el.ctrl_p), 1.0), (r(el.ctrl_n), -1.0)):
                    if ctrl is not None:
                        a0[out, ctrl] += so * sc * el.gm
    for el in netlist.elements:
        if isinstance(el, MutualCoupling):
            k_eff = min(el.k, 1.0 - coupling_eps)
            m = k_eff * math.sqrt(inductance[el.la] * inductance[el.lb])
            ka, kb = branch_index[el.la], branch_index[el.lb]
            a1[ka, kb] -= m
            a1[kb, ka] -= m
    return _System(netlist, size, node_index, branch_index, a0, a1, b)


def _factor(system: _System, freq: float):
    a = system.matrix(2 * math.pi * freq)
    # row equilibration makes the pivot threshold scale-free
    scale = np.abs(a).max(axis=1)
    if np.any(scale == 0):
        raise SingularCircuitError(freq, "empty matrix row")
    a = a / scale[:, None]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if not np.all(np.isfinite(pivots)) or pivots.min() < PIVOT_TOL:
        raise SingularCircuitError(freq, f"pivot {pivots.min():.3e}")
    return (lu, piv), scale


# --------------------------------------------------------------------------
# single-frequency solve
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class AcSolution:
    frequency: float
    node_voltages: dict
    branch_currents: dict
    netlist: Netlist

    def v(self, node: str) -> complex:
        return self.node_voltages[canonical_node(node)]

    def i(self, name: str) -> complex:
        """Current through element ``name``, flowing n1 -> n2 (out_p -> out_n)."""
        return element_current(self, self.netlist[name])


def element_current(sol: AcSolution, el) -> complex:
    if el.name in sol.branch_currents:
        return sol.branch_currents[el.name]
    v = sol.node_voltages
    w = 2 * math.pi * sol.frequency
    if isinstance(el, Resistor):
        return (v[el.n1] - v[el.n2]) / el.ohms
    if isinstance(el, Capacitor):
        return 1j * w * el.farads * (v[el.n1] - v[el.n2])
    if isinstance(el, ISource):
        return el.amplitude
    raise KeyError(f"no current defined for {el.name}")


def _solve(system: _System, freq: float, rhs: np.ndarray) -> np.ndarray:
    factors, scale = _factor(system, freq)
    return scipy.linalg.lu_solve(factors, rhs / (scale if rhs.ndim == 1 else scale[:, None]),
                                 check_finite=False)


def _to_solution(system: _System, freq: float, x: np.ndarray) -> AcSolution:
    volts = {GROUND: 0j}
    for name, idx in system.node_index.items():
        volts[name] = complex(x[idx])
    currents = {name: complex(x[idx]) for name, idx in system.branch_index.items()}
    for el in system.netlist.elements:
        if isinstance(el, Vccs):
            currents[el.name] = el.gm * (volts[el.ctrl_p] - volts[el.ctrl_n])
    return AcSolution(freq, volts, currents, system.netlist)


def ac_solve(netlist: Netlist, freq: float) -> AcSolution:
    if not freq > 0 or not math.isfinite(freq):
        raise ValueError(f"frequency must be positive and finite, got {freq}")
    system = compile_netlist(netlist)
    return _to_solution(system, freq, _solve(system, freq, system.b))


def kcl_residuals(sol: AcSolution) -> dict:
    """Per node: (|sum of currents leaving|, largest incident current magnitude)."""
    leaving = {n: 0j for n in sol.netlist.nodes}
    largest = dict.fromkeys(sol.netlist.nodes, 0.0)

    def add(node, current):
        leaving[node] += current
        largest[node] = max(largest[node], abs(current))

    for el in sol.netlist.elements:
        if isinstance(el, MutualCoupling):
            continue
        cur = element_current(sol, el)
        if isinstance(el, Vccs):
            add(el.out_p, cur)
            add(el.out_n, -cur)
        else:
            add(el.n1, cur)
            add(el.n2, -cur)
    return {n: (abs(leaving[n]), largest[n]) for n in leaving if n != GROUND}


# --------------------------------------------------------------------------
# sweeps
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class FrequencyResponse:
    quantity: str
    freqs: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.freqs, dtype=float)
        if f.ndim != 1 or len(f) < 1 or not np.all(np.isfinite(f)) or np.any(f <= 0):
            raise ValueError("frequencies must be finite and positive")
        if np.any(np.diff(f) <= 0):
            raise ValueError("frequencies must be strictly increasing")
        object.__setattr__(self, "freqs", f)
        object.__setattr__(self, "values", np.asarray(self.values, dtype=complex))

    def __len__(self):
        return len(self.freqs)

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.values)

    @property
    def phase_deg(self) -> np.ndarray:
        """Unwrapped phase in degrees."""
        return np.degrees(np.unwrap(np.angle(self.values)))

    def __mul__(self, other: "FrequencyResponse") -> "FrequencyResponse":
        if not np.array_equal(self.freqs, other.freqs):
            raise ValueError("responses must share a frequency grid")
        return FrequencyResponse(f"{self.quantity}*{other.quantity}", self.freqs,
                                 self.values * other.values)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["freq_hz", "re", "im", "mag", "phase_deg"])
        for f, v, m, p in zip(self.freqs, self.values, self.magnitude, self.phase_deg):
            w.writerow([repr(float(f)), repr(float(v.real)), repr(float(v.imag)),
                        repr(float(m)), repr(float(p))])
        return buf.getvalue()


def frequency_grid(start: float, stop: float, points: int, spacing: str = "lin") -> np.ndarray:
    if points < 2:
        raise ValueError("a sweep needs at least 2 points")
    if not 0 < start < stop:
        raise ValueError("need 0 < start < stop")
    if spacing == "lin":
        return np.linspace(start, stop, points)
    if spacing == "log":
        return np.geomspace(start, stop, points)
    raise ValueError(f"unknown spacing {spacing!r}")


def _as_grid(grid) -> np.ndarray:
    f = np.asarray(grid, dtype=float)
    if f.ndim != 1 or len(f) < 2:
        raise ValueError("a sweep needs at least 2 points")
    return f


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _probe(system: _System, quantity: str):
    """Return a function mapping an AcSolution to the probed complex value.

    ``quantity`` is a node name, ``v(node)``, ``v(a,b)`` or ``i(element)``.
    """
    q = quantity.strip()
    low = q.lower()
    if low.startswith("i(") and q.endswith(")"):
        name = q[2:-1]
        el = system.netlist[name]
        return lambda sol: element_current(sol, el)
    if low.startswith("v(") and q.endswith(")"):
        q = q[2:-1]
    a, _, b = q.partition(",")
    a, b = canonical_node(a.strip()), canonical_node(b.strip() or GROUND)
    for node in (a, b):
        if node not in system.netlist.nodes:
            raise KeyError(f"unknown node {node!r}")
    return lambda sol: sol.node_voltages[a] - sol.node_voltages[b]


def ac_sweep(netlist: Netlist, grid, quantities: Sequence[str] | str,
             workers: int | None = None) -> dict:
    """Solve at each grid point and probe ``quantities``.

    Returns ``{quantity: FrequencyResponse}`` in grid order. Points may be
    farmed out to a thread pool; results are identical for any worker count.
    """
    if isinstance(quantities, str):
        quantities = [quantities]
    freqs = _as_grid(grid)
    system = compile_netlist(netlist)
    probes = [_probe(system, q) for q in quantities]

    def point(f):
        sol = _to_solution(system, f, _solve(system, f, system.b))
        return [p(sol) for p in probes]

    workers = default_workers() if workers is None else workers
    if workers > 1 and len(freqs) >= 256:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(point, freqs))
    else:
        rows = [point(f) for f in freqs]
    data = np.array(rows, dtype=complex).reshape(len(freqs), len(quantities))
    return {q: FrequencyResponse(q, freqs, data[:, k]) for k, q in enumerate(quantities)}


def zero_sources(netlist: Netlist, keep: str | None = None) -> Netlist:
    """Set every independent source except ``keep`` to zero amplitude."""
    repl = []
    for el in netlist.elements:
        if isinstance(el, (VSource, ISource)) and el.name != keep:
            repl.append(type(el)(el.name, el.n1, el.n2, 0.0, 0.0))
    return netlist.replace(*repl) if repl else netlist


def transfer_function(netlist: Netlist, source: str, output: str, grid,
                      workers: int | None = None) -> FrequencyResponse:
    """Output phasor divided by the amplitude of ``source``, others zeroed."""
    el = netlist[source]
    if not isinstance(el, (VSource, ISource)):
        raise KeyError(f"{source!r} is not an independent source")
    unit = type(el)(el.name, el.n1, el.n2, 1.0, 0.0)
    work = zero_sources(netlist.replace(unit), keep=source)
    resp = ac_sweep(work, grid, output, workers)[output]
    return FrequencyResponse(f"{output}/{source}", resp.freqs, resp.values)


def input_impedance(netlist: Netlist, port: tuple[str, str], grid,
                    workers: int | None = None) -> FrequencyResponse:
    """Z = V(p) - V(m) for a 1 A test current pushed into ``p`` out of ``m``."""
    p, m = (canonical_node(n) for n in port)
    for node in (p, m):
        if node not in netlist.nodes:
            raise KeyError(f"unknown node {node!r}")
    name = "I_zin_test"
    while name in netlist:
        name += "_"
    work = zero_sources(netlist).extend(ISource(name, m, p, 1.0))
    resp = ac_sweep(work, grid, f"v({p},{m})", workers)
    (only,) = resp.values()
    return FrequencyResponse(f"Z({p},{m})", only.freqs, only.values)


# --------------------------------------------------------------------------
# noise
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class NoiseBudget:
    frequency: float
    temperature: float
    contributions: tuple  # ((element name, V^2/Hz), ...)
    total: float

    def __getitem__(self, name: str) -> float:
        return dict(self.contributions)[name]

    def to_json(self) -> str:
        return json.dumps({
            "freq_hz": self.frequency,
            "temperature_k": self.temperature,
            "total_v2_per_hz": self.total,
            "contributions": [{"element": n, "v2_per_hz": v} for n, v in self.contributions],
        }, indent=2, sort_keys=True)


def noise_sources(netlist: Netlist, temperature: float):
    """Yield ``(name, node_a, node_b, current PSD A^2/Hz)`` for noisy elements."""
    four_kt = 4.0 * BOLTZMANN * temperature
    for el in netlist.elements:
        if isinstance(el, Resistor) and el.noisy:
            yield el.name, el.n1, el.n2, four_kt / el.ohms
        elif isinstance(el, Vccs) and el.noisy and el.gamma > 0 and el.gm != 0:
            yield el.name, el.out_p, el.out_n, four_kt * el.gamma * abs(el.gm)


def output_noise(netlist: Netlist, output: str, freq: float,
                 temperature: float = DEFAULT_TEMPERATURE) -> NoiseBudget:
    """Thermal/channel noise PSD at ``output`` from uncorrelated sources.

    Uses the adjoint system: one solve of ``A^T y = e_out`` gives the
    transimpedance from any current injection to the output.
    """
    if not temperature > 0:
        raise ValueError("temperature must be positive")
    work = zero_sources(netlist)
    system = compile_netlist(work)
    out = system.row(output)
    if out is None:
        if canonical_node(output) == GROUND:
            raise ValueError("output node is ground")
        raise KeyError(f"unknown node {output!r}")
    a = system.matrix(2 * math.pi * freq)
    scale = np.abs(a).max(axis=1)
    # adjoint of the row-scaled system: (D A)^T z = e  ->  y = D z
    at = (a / scale[:, None]).T
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        lu, piv = scipy.linalg.lu_factor(at, check_finite=False)
    if np.abs(np.diag(lu)).min() < PIVOT_TOL:
        raise SingularCircuitError(freq)
    e = np.zeros(system.size, dtype=complex)
    e[out] = 1.0
    y = scipy.linalg.lu_solve((lu, piv), e, check_finite=False) / scale

    def at_node(n):
        idx = system.row(n)
        return 0j if idx is None else y[idx]

    contributions = []
    for name, a_node, b_node, psd in noise_sources(work, temperature):
        # current leaving a_node through the source: injection vector e_b - e_a
        zt = at_node(b_node) - at_node(a_node)
        contributions.append((name, float(psd * abs(zt) ** 2)))
    total = math.fsum(v for _, v in contributions)
    return NoiseBudget(freq, temperature, tuple(contributions), total)


def transimpedance(netlist: Netlist, inject: tuple[str, str], output: str, freq: float) -> complex:
    """V(output) per 1 A pushed into ``inject[0]`` and drawn from ``inject[1]``."""
    name = "I_zt_test"
    while name in netlist:
        name += "_"
    work = zero_sources(netlist).extend(ISource(name, inject[1], inject[0], 1.0))
    return ac_solve(work, freq).v(output)
