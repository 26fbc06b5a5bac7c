"""Linear small-signal netlists: element types, text format and validation.

A netlist is an ordered, immutable list of two-terminal elements (R, C, L,
independent V/I sources), voltage-controlled current sources and mutual
couplings between inductors. Node ``"0"`` (alias ``"gnd"``) is the reference.

Text format, one element per line::

    R<id> n1 n2 value [noiseless]
    C<id> n1 n2 value
    L<id> n1 n2 value
    K<id> L<a> L<b> k
    G<id> outp outn ctrlp ctrln gm [gamma=<x>] [noiseless]
    V<id> n1 n2 mag [phase_deg]
    I<id> n1 n2 mag [phase_deg]

Lines starting with ``*`` or ``#`` are comments, ``.title <text>`` sets the
title and ``.end`` stops parsing. Values take the engineering suffixes
f, p, n, u, m (milli), k, meg/M (mega) and g/G.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Union

GROUND_NAMES = ("0", "gnd", "GND")
GROUND = "0"

_SUFFIXES = {
    "f": 1e-15, "F": 1e-15,
    "p": 1e-12, "P": 1e-12,
    "n": 1e-9, "N": 1e-9,
    "u": 1e-6, "U": 1e-6,
    "m": 1e-3,
    "k": 1e3, "K": 1e3,
    "meg": 1e6, "M": 1e6,
    "g": 1e9, "G": 1e9,
}
_VALUE_RE = re.compile(
    r"^(?P<num>[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)(?P<suffix>[A-Za-z]*)$"
)


def canonical_node(name: str) -> str:
    return GROUND if name in GROUND_NAMES else name


@dataclass(frozen=True)
class Resistor:
    name: str
    n1: str
    n2: str
    ohms: float
    noisy: bool = True


@dataclass(frozen=True)
class Capacitor:
    name: str
    n1: str
    n2: str
    farads: float


@dataclass(frozen=True)
class Inductor:
    name: str
    n1: str
    n2: str
    henries: float


@dataclass(frozen=True)
class MutualCoupling:
    name: str
    la: str
    lb: str
    k: float


@dataclass(frozen=True)
class Vccs:
    """Current ``gm * (V(ctrl_p) - V(ctrl_n))`` flowing from ``out_p``
    through the element into ``out_n``.

    A noisy VCCS carries channel noise ``4kT * gamma * |gm|`` across its
    output. With both control terminals on ground it is a noise-only
    generator.
    """

    name: str
    out_p: str
    out_n: str
    ctrl_p: str
    ctrl_n: str
    gm: float
    noisy: bool = True
    gamma: float = 1.0


@dataclass(frozen=True)
class VSource:
    """``V(n1) - V(n2) = mag * exp(j * phase)``."""

    name: str
    n1: str
    n2: str
    mag: float
    phase_deg: float = 0.0

    @property
    def amplitude(self) -> complex:
        return _phasor(self.mag, self.phase_deg)


@dataclass(frozen=True)
class ISource:
    """Current flowing from ``n1`` through the source into ``n2``."""

    name: str
    n1: str
    n2: str
    mag: float
    phase_deg: float = 0.0

    @property
    def amplitude(self) -> complex:
        return _phasor(self.mag, self.phase_deg)


Element = Union[Resistor, Capacitor, Inductor, MutualCoupling, Vccs, VSource, ISource]


def _phasor(mag: float, phase_deg: float) -> complex:
    if phase_deg == 0.0:
        return complex(mag, 0.0)
    return complex(mag * math.cos(math.radians(phase_deg)),
                   mag * math.sin(math.radians(phase_deg)))


def terminals(el: Element) -> tuple[str, ...]:
    """Circuit nodes an element touches (couplings touch none)."""
    if isinstance(el, MutualCoupling):
        return ()
    if isinstance(el, Vccs):
        return (el.out_p, el.out_n, el.ctrl_p, el.ctrl_n)
    return (el.n1, el.n2)


@dataclass(frozen=True)
class Netlist:
    elements: tuple[Element, ...]
    title: str = ""
    nodes: dict[str, int] = field(init=False, compare=False, hash=False, repr=False)

    def __post_init__(self):
        elements = tuple(_canonicalize(el) for el in self.elements)
        object.__setattr__(self, "elements", elements)
        nodes = {GROUND: 0}
        for el in elements:
            for t in terminals(el):
                if t not in nodes:
                    nodes[t] = len(nodes)
        object.__setattr__(self, "nodes", nodes)

    def __getitem__(self, name: str) -> Element:
        for el in self.elements:
            if el.name == name:
                return el
        raise KeyError(name)

    def __contains__(self, name: str) -> bool:
        return any(el.name == name for el in self.elements)

    def __len__(self) -> int:
        return len(self.elements)

    def replace(self, *elements: Element, title: str | None = None) -> "Netlist":
        """Return a copy with same-named elements swapped for ``elements``."""
        repl = {el.name: el for el in elements}
        new = tuple(repl.pop(el.name, el) for el in self.elements)
        if repl:
            raise KeyError(f"no element named {sorted(repl)}")
        return Netlist(new, self.title if title is None else title)

    def extend(self, *elements: Element) -> "Netlist":
        return Netlist(self.elements + tuple(elements), self.title)

    def without(self, *names: str) -> "Netlist":
        drop = set(names)
        return Netlist(tuple(el for el in self.elements if el.name not in drop), self.title)


def _canonicalize(el: Element) -> Element:
    if isinstance(el, MutualCoupling):
        return el
    if isinstance(el, Vccs):
        return Vccs(el.name, canonical_node(el.out_p), canonical_node(el.out_n),
                    canonical_node(el.ctrl_p), canonical_node(el.ctrl_n),
                    el.gm, el.noisy, el.gamma)
    n1, n2 = canonical_node(el.n1), canonical_node(el.n2)
    if n1 == el.n1 and n2 == el.n2:
        return el
    return type(el)(el.name, n1, n2, *_values(el))


def _values(el: Element) -> tuple:
    if isinstance(el, Resistor):
        return (el.ohms, el.noisy)
    if isinstance(el, Capacitor):
        return (el.farads,)
    if isinstance(el, Inductor):
        return (el.henries,)
    return (el.mag, el.phase_deg)


# --------------------------------------------------------------------------
# text format
# --------------------------------------------------------------------------

class NetlistSyntaxError(ValueError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no
        self.message = message


def parse_value(token: str) -> float:
    """Parse a number with an optional engineering suffix.

    >>> parse_value("17.61u")
    1.761e-05
    >>> parse_value("2meg")
    2000000.0
    """
    m = _VALUE_RE.match(token)
    if m is None:
        raise ValueError(f"malformed number {token!r}")
    num = float(m.group("num"))
    suffix = m.group("suffix")
    if not suffix:
        return num
    scale = _SUFFIXES.get(suffix)
    if scale is None and suffix.lower() == "meg":
        scale = 1e6
    if scale is None:
        raise ValueError(f"unknown suffix {suffix!r} in {token!r}")
    return num * scale


def parse_netlist(text: str) -> Netlist:
    elements: list[Element] = []
    seen: set[str] = set()
    title = ""
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "*#":
            continue
        if line.startswith("."):
            directive, _, rest = line.partition(" ")
            if directive.lower() == ".title":
                title = rest.strip()
                continue
            if directive.lower() == ".end":
                break
            raise NetlistSyntaxError(line_no, f"unknown directive {directive!r}")
        tokens = line.split()
        name = tokens[0]
        if name in seen:
            kind = "inductor id" if name[0] in "Ll" else "element name"
            raise NetlistSyntaxError(line_no, f"duplicate {kind} {name!r}")
        try:
            el = _parse_element(tokens)
        except ValueError as exc:
            raise NetlistSyntaxError(line_no, str(exc)) from None
        seen.add(name)
        elements.append(el)
    if not elements:
        raise NetlistSyntaxError(0, "netlist has no elements")
    return Netlist(tuple(elements), title)


def _positive(token: str, what: str) -> float:
    value = parse_value(token)
    if not math.isfinite(value) or value <= 0:
        raise ValueError(f"nonpositive value {token!r} for {what}")
    return value


def _finite(token: str) -> float:
    value = parse_value(token)
    if not math.isfinite(value):
        raise ValueError(f"non-finite value {token!r}")
    return value


def _parse_element(tokens: list[str]) -> Element:
    name = tokens[0]
    kind = name[0].upper()
    args = tokens[1:]
    flags = [a for a in args if a.lower() == "noiseless" or "=" in a]
    pos = [a for a in args if a not in flags]
    noisy = not any(f.lower() == "noiseless" for f in flags)
    opts = {}
    for f in flags:
        if "=" in f:
            key, _, val = f.partition("=")
            opts[key.lower()] = val

    def need(n: int):
        if len(pos) != n:
            raise ValueError(f"{name}: expected {n} fields, got {len(pos)}")

    if kind in "RCL" and kind != "R" and flags:
        raise ValueError(f"{name}: unexpected options {flags}")
    if kind == "R":
        need(3)
        if opts:
            raise ValueError(f"{name}: unexpected options {sorted(opts)}")
        return Resistor(name, pos[0], pos[1], _positive(pos[2], name), noisy)
    if kind == "C":
        need(3)
        return Capacitor(name, pos[0], pos[1], _positive(pos[2], name))
    if kind == "L":
        need(3)
        return Inductor(name, pos[0], pos[1], _positive(pos[2], name))
    if kind == "K":
        need(3)
        if flags:
            raise ValueError(f"{name}: unexpected options {flags}")
        return MutualCoupling(name, pos[0], pos[1], _finite(pos[2]))
    if kind == "G":
        need(5)
        unknown = set(opts) - {"gamma"}
        if unknown:
            raise ValueError(f"{name}: unknown options {sorted(unknown)}")
        gamma = _finite(opts["gamma"]) if "gamma" in opts else 1.0
        return Vccs(name, pos[0], pos[1], pos[2], pos[3], _finite(pos[4]), noisy, gamma)
    if kind in "VI":
        if flags:
            raise ValueError(f"{name}: unexpected options {flags}")
        if len(pos) not in (3, 4):
            raise ValueError(f"{name}: expected 3 or 4 fields, got {len(pos)}")
        mag = _finite(pos[2])
        phase = _finite(pos[3]) if len(pos) == 4 else 0.0
        cls = VSource if kind == "V" else ISource
        return cls(name, pos[0], pos[1], mag, phase)
    raise ValueError(f"unknown element type {name!r}")


def format_netlist(netlist: Netlist) -> str:
    """Serialize to the text format; floats use ``repr`` so parsing is exact."""
    lines = []
    if netlist.title:
        lines.append(f".title {netlist.title}")
    for el in netlist.elements:
        lines.append(format_element(el))
    return "\n".join(lines) + "\n"


def format_element(el: Element) -> str:
    if isinstance(el, Resistor):
        line = f"{el.name} {el.n1} {el.n2} {el.ohms!r}"
        return line if el.noisy else line + " noiseless"
    if isinstance(el, Capacitor):
        return f"{el.name} {el.n1} {el.n2} {el.farads!r}"
    if isinstance(el, Inductor):
        return f"{el.name} {el.n1} {el.n2} {el.henries!r}"
    if isinstance(el, MutualCoupling):
        return f"{el.name} {el.la} {el.lb} {el.k!r}"
    if isinstance(el, Vccs):
        line = f"{el.name} {el.out_p} {el.out_n} {el.ctrl_p} {el.ctrl_n} {el.gm!r}"
        if el.gamma != 1.0:
            line += f" gamma={el.gamma!r}"
        return line if el.noisy else line + " noiseless"
    line = f"{el.name} {el.n1} {el.n2} {el.mag!r}"
    return line if el.phase_deg == 0.0 else line + f" {el.phase_deg!r}"


# --------------------------------------------------------------------------
# validation
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    index: int | None  # element index, None for netlist-level problems
    reason: str


def _check_value(idx: int, what: str, value: float, positive: bool = True) -> list[Violation]:
    if not isinstance(value, (int, float)) or not math.isfinite(value):
        return [Violation(idx, f"{what} is not finite")]
    if positive and value <= 0:
        return [Violation(idx, f"{what} must be > 0")]
    return []


def validate_netlist(netlist: Netlist) -> list[Violation]:
    """Return every invariant violation; an empty list means valid."""
    out: list[Violation] = []
    elements = netlist.elements
    if not elements:
        return [Violation(None, "netlist has no elements")]

    names: dict[str, int] = {}
    inductors: dict[str, int] = {}
    for i, el in enumerate(elements):
        if el.name in names:
            out.append(Violation(i, f"duplicate name {el.name!r}"))
        names.setdefault(el.name, i)
        if isinstance(el, Inductor):
            inductors.setdefault(el.name, i)

    for i, el in enumerate(elements):
        if isinstance(el, Resistor):
            out += _check_value(i, "resistance", el.ohms)
        elif isinstance(el, Capacitor):
            out += _check_value(i, "capacitance", el.farads)
        elif isinstance(el, Inductor):
            out += _check_value(i, "inductance", el.henries)
        elif isinstance(el, MutualCoupling):
            bad = _check_value(i, "coupling k", el.k, positive=False)
            out += bad
            if not bad and not 0.0 <= el.k <= 1.0:
                out.append(Violation(i, f"coupling k={el.k} out of range [0, 1]"))
            for ref in (el.la, el.lb):
                if ref not in inductors:
                    out.append(Violation(i, f"coupling references unknown inductor {ref!r}"))
            if el.la == el.lb:
                out.append(Violation(i, "coupling needs two distinct inductors"))
        elif isinstance(el, Vccs):
            out += _check_value(i, "gm", el.gm, positive=False)
            gbad = _check_value(i, "gamma", el.gamma, positive=False)
            out += gbad
            if not gbad and el.gamma < 0:
                out.append(Violation(i, "gamma must be >= 0"))
        else:
            out += _check_value(i, "source magnitude", el.mag, positive=False)
            out += _check_value(i, "source phase", el.phase_deg, positive=False)
        for t in terminals(el):
            if not isinstance(t, str) or not t:
                out.append(Violation(i, f"bad node name {t!r}"))

    used = {t for el in elements for t in terminals(el)}
    if GROUND not in used:
        out.append(Violation(None, "no ground node ('0' or 'gnd')"))

    out += _connectivity(netlist)
    return out


def _connectivity(netlist: Netlist) -> list[Violation]:
    # union-find over conductive paths (R, C, L, V); source-like and control
    # terminals present infinite impedance and do not anchor a node
    parent = {n: n for n in netlist.nodes}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    degree = dict.fromkeys(netlist.nodes, 0)
    for el in netlist.elements:
        for t in terminals(el):
            degree[t] += 1
        if isinstance(el, (Resistor, Capacitor, Inductor, VSource)):
            ra, rb = find(el.n1), find(el.n2)
            if ra != rb:
                parent[ra] = rb

    out = []
    ground_root = find(GROUND)
    islands: dict[str, list[str]] = {}
    for node in netlist.nodes:
        if node != GROUND and find(node) != ground_root:
            islands.setdefault(find(node), []).append(node)
    for members in islands.values():
        out.append(Violation(None, f"floating subnetwork {sorted(members)} has no path to ground"))
    # a one-terminal node on an element straight to ground is a plain one-port
    # (a probe point); hanging off any other node it is a dead stub
    for node, deg in degree.items():
        if node != GROUND and deg == 1:
            idx, el = next((i, el) for i, el in enumerate(netlist.elements)
                           if node in terminals(el))
            if GROUND not in terminals(el):
                out.append(Violation(idx, f"floating subnetwork: node {node!r} "
                                          "has a single terminal"))
    return out


def inductor_names(netlist: Netlist) -> Iterable[str]:
    return (el.name for el in netlist.elements if isinstance(el, Inductor))
