import ast
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from memsosc.checks import random_netlist
from memsosc.netlist import (
    Capacitor, Inductor, ISource, MutualCoupling, Netlist, NetlistSyntaxError, Resistor,
    Vccs, VSource, format_netlist, parse_netlist, parse_value, validate_netlist,
)


def test_parse_resistor_to_ground():
    net = parse_netlist("R1 a 0 332")
    assert net.elements == (Resistor("R1", "a", "0", 332.0),)
    assert net.nodes == {"0": 0, "a": 1}


def test_parse_motional_values_with_suffixes():
    net = parse_netlist("Lm x y 17.61u\nCm y 0 1.598e-18\nR1 x 0 1k\n")
    assert net["Lm"].henries == pytest.approx(1.761e-5, rel=1e-15)
    assert net["Cm"].farads == 1.598e-18


@pytest.mark.parametrize("token, value", [
    ("1f", 1e-15), ("2p", 2e-12), ("3n", 3e-9), ("4u", 4e-6), ("5m", 5e-3),
    ("6k", 6e3), ("7meg", 7e6), ("7MEG", 7e6), ("8M", 8e6), ("9g", 9e9), ("9G", 9e9),
    ("1e3", 1e3), ("-2.5", -2.5), ("+.5k", 500.0),
])
def test_parse_value_suffixes(token, value):
    assert parse_value(token) == pytest.approx(value, rel=1e-15)


def test_ground_aliases_are_canonical():
    net = parse_netlist("R1 a gnd 1\nC1 a GND 1p\n")
    assert net["R1"].n2 == "0" and net["C1"].n2 == "0"
    assert set(net.nodes) == {"0", "a"}


def test_comments_title_and_end():
    text = "* comment\n# another\n.title demo deck\nR1 a 0 50\n\n.end\nR2 b 0 1\n"
    net = parse_netlist(text)
    assert net.title == "demo deck"
    assert [el.name for el in net.elements] == ["R1"]


def test_vccs_and_source_fields():
    net = parse_netlist("G1 o 0 c 0 2m gamma=0.667 noiseless\nV1 c 0 1 90\nI1 0 o 1m\nR1 o 0 1\n")
    g = net["G1"]
    assert (g.out_p, g.out_n, g.ctrl_p, g.ctrl_n) == ("o", "0", "c", "0")
    assert g.gm == 2e-3 and g.gamma == 0.667 and g.noisy is False
    assert net["V1"].amplitude == pytest.approx(1j, abs=1e-15)
    assert net["I1"].amplitude == 1e-3
    assert parse_netlist("R1 a 0 5 noiseless")["R1"].noisy is False


@pytest.mark.parametrize("text, fragment", [
    ("C0 in 0 0", "nonpositive"),
    ("R1 a 0 -5", "nonpositive"),
    ("L1 a 0 1n\nL1 b 0 2n", "duplicate inductor id"),
    ("R1 a 0 1.5q", "unknown suffix"),
    ("C1 a 0 1.598a", "unknown suffix"),
    ("R1 a 0", "expected 3 fields"),
    ("Q1 a b c", "unknown element type"),
    (".option foo", "unknown directive"),
    ("* only a comment", "no elements"),
])
def test_parse_errors(text, fragment):
    with pytest.raises(NetlistSyntaxError, match=fragment):
        parse_netlist(text)


def test_parse_error_reports_line_number():
    with pytest.raises(NetlistSyntaxError) as info:
        parse_netlist("R1 a 0 1\n* fine\nR2 a 0 zero\n")
    assert info.value.line_no == 3
    assert str(info.value).startswith("line 3:")


# --------------------------------------------------------------------------
# validation
# --------------------------------------------------------------------------

def divider():
    return Netlist((VSource("V1", "in", "0", 1.0), Resistor("R1", "in", "mid", 1e3),
                    Resistor("R2", "mid", "0", 1e3), Capacitor("C1", "mid", "0", 1e-12),
                    Inductor("L1", "in", "0", 1e-9)))


def test_valid_divider_has_no_violations():
    assert validate_netlist(divider()) == []


def test_coupling_out_of_range():
    net = divider().extend(Inductor("L2", "mid", "0", 1e-9), MutualCoupling("K1", "L1", "L2", 1.2))
    (v,) = validate_netlist(net)
    assert v.index == 6 and "out of range" in v.reason


def test_single_terminal_node_is_floating():
    net = divider().extend(Capacitor("Cx", "mid", "x", 1e-15))
    problems = validate_netlist(net)
    assert any("floating subnetwork" in v.reason and "'x'" in v.reason for v in problems)


def test_island_without_ground_path():
    net = divider().extend(Resistor("Ra", "p", "q", 1.0), Capacitor("Cb", "p", "q", 1e-12))
    problems = validate_netlist(net)
    assert [v.reason for v in problems] == ["floating subnetwork ['p', 'q'] has no path to ground"]


def test_one_port_to_ground_is_valid():
    assert validate_netlist(Netlist((Resistor("R1", "a", "0", 332.0),))) == []


def test_missing_ground():
    net = Netlist((Resistor("R1", "a", "b", 1.0), Resistor("R2", "a", "b", 2.0)))
    reasons = " | ".join(v.reason for v in validate_netlist(net))
    assert "no ground" in reasons


def test_validate_does_not_mutate():
    net = divider().extend(Inductor("L2", "mid", "0", 1e-9), MutualCoupling("K1", "L1", "L2", 2.0))
    before = format_netlist(net)
    validate_netlist(net)
    assert format_netlist(net) == before


def _islands_oracle(net: Netlist) -> set:
    """Nodes with no R/C/L/V path to ground, by breadth-first search."""
    adj = {n: set() for n in net.nodes}
    for el in net.elements:
        if isinstance(el, (Resistor, Capacitor, Inductor, VSource)):
            adj[el.n1].add(el.n2)
            adj[el.n2].add(el.n1)
    seen, todo = {"0"}, ["0"]
    while todo:
        for m in adj[todo.pop()]:
            if m not in seen:
                seen.add(m)
                todo.append(m)
    return set(net.nodes) - seen


@settings(max_examples=150, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 7), st.integers(0, 7), st.sampled_from("RCLGI")),
                min_size=1, max_size=14))
def test_union_find_matches_bfs_oracle(edges):
    els = []
    for k, (a, b, kind) in enumerate(edges):
        na, nb = ("0" if a == 0 else f"n{a}"), ("0" if b == 0 else f"n{b}")
        if na == nb:
            continue
        if kind == "R":
            els.append(Resistor(f"R{k}", na, nb, 1.0))
        elif kind == "C":
            els.append(Capacitor(f"C{k}", na, nb, 1e-12))
        elif kind == "L":
            els.append(Inductor(f"L{k}", na, nb, 1e-9))
        elif kind == "G":
            els.append(Vccs(f"G{k}", na, nb, "0", "0", 1e-3))
        else:
            els.append(ISource(f"I{k}", na, nb, 1.0))
    if not els:
        return
    net = Netlist(tuple(els))
    flagged = set()
    for v in validate_netlist(net):
        if "no path to ground" in v.reason:
            flagged |= set(ast.literal_eval(v.reason.split(" has")[0].split("subnetwork ")[1]))
    assert flagged == _islands_oracle(net)


# mutations that each break exactly one invariant
def _mutate(net: Netlist, rng: np.random.Generator):
    els = list(net.elements)
    kind = int(rng.integers(9))
    passives = [i for i, e in enumerate(els) if isinstance(e, (Resistor, Capacitor, Inductor))]
    i = int(rng.choice(passives))
    el = els[i]
    bad_value = float(rng.choice([0.0, -1.0, math.nan, math.inf]))
    if kind == 0:
        if isinstance(el, Resistor):
            els[i] = Resistor(el.name, el.n1, el.n2, bad_value, el.noisy)
        elif isinstance(el, Capacitor):
            els[i] = Capacitor(el.name, el.n1, el.n2, bad_value)
        else:
            els[i] = Inductor(el.name, el.n1, el.n2, bad_value)
    elif kind == 1:
        els.append(Capacitor("Cdangle", el.n1 if el.n1 != "0" else el.n2, "dangling", 1e-15))
    elif kind == 2:
        els += [Resistor("Rf1", "fa", "fb", 10.0), Capacitor("Cf1", "fa", "fb", 1e-15)]
    elif kind == 3:
        ind = [e.name for e in els if isinstance(e, Inductor)] or ["Lnone"]
        els.append(MutualCoupling("Kbad", ind[0], "Lmissing", 0.5))
    elif kind == 4:
        ind = [e.name for e in els if isinstance(e, Inductor)] or ["Lnone"]
        els.append(MutualCoupling("Kself", ind[0], ind[0], 0.5))
    elif kind == 5:
        els += [Inductor("Lk1", el.n1, "0", 1e-9), Inductor("Lk2", el.n1, "0", 2e-9),
                MutualCoupling("Kk", "Lk1", "Lk2", float(rng.choice([1.5, -0.1, math.nan])))]
    elif kind == 6:
        els.append(Vccs("Gbad", el.n1, "0", el.n2, "0", 1e-3, True, -0.5))
    elif kind == 7:
        els.append(Resistor(el.name, el.n1, "0", 1.0))
    else:
        els.append(Vccs("Ginf", el.n1, "0", el.n2, "0", math.inf))
    return Netlist(tuple(els)), kind


def test_mutation_fuzz_always_reported():
    rng = np.random.default_rng(7)
    kinds = set()
    for _ in range(400):
        base = random_netlist(rng, nodes=int(rng.integers(2, 7)), extra=int(rng.integers(0, 5)))
        assert validate_netlist(base) == []
        mutated, kind = _mutate(base, rng)
        kinds.add(kind)
        assert validate_netlist(mutated), f"mutation {kind} went unreported"
    assert kinds == set(range(9))


# --------------------------------------------------------------------------
# round trip
# --------------------------------------------------------------------------

node_names = st.sampled_from(["0", "gnd", "a", "b", "drv", "out", "x1", "m2"])
values = st.floats(min_value=1e-18, max_value=1e9, allow_nan=False, allow_infinity=False)
signed = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False, allow_infinity=False)


@st.composite
def netlists(draw):
    els = []
    n = draw(st.integers(1, 10))
    for k in range(n):
        kind = draw(st.sampled_from("RCLGVI"))
        a, b = draw(node_names), draw(node_names)
        if kind == "R":
            els.append(Resistor(f"R{k}", a, b, draw(values), draw(st.booleans())))
        elif kind == "C":
            els.append(Capacitor(f"C{k}", a, b, draw(values)))
        elif kind == "L":
            els.append(Inductor(f"L{k}", a, b, draw(values)))
        elif kind == "G":
            els.append(Vccs(f"G{k}", a, b, draw(node_names), draw(node_names), draw(signed),
                            draw(st.booleans()), draw(st.floats(0, 10))))
        else:
            cls = VSource if kind == "V" else ISource
            els.append(cls(f"{kind}{k}", a, b, draw(signed), draw(st.floats(-360, 360))))
    inductors = [e.name for e in els if isinstance(e, Inductor)]
    if len(inductors) >= 2 and draw(st.booleans()):
        els.append(MutualCoupling("K99", inductors[0], inductors[1], draw(st.floats(0, 1))))
    title = draw(st.sampled_from(["", "tank", "rft half circuit"]))
    return Netlist(tuple(els), title)


@settings(max_examples=200, deadline=None)
@given(netlists())
def test_round_trip_is_a_fixed_point(net):
    text = format_netlist(net)
    once = parse_netlist(text)
    assert once == net
    assert format_netlist(once) == text
    assert parse_netlist(format_netlist(once)) == once
