import logging

import pytest
from hypothesis import given, settings, strategies as st

from gridsor.gridgen import GridSpec, generate
from gridsor.netlist import (
    NetlistError, decompose, parse, parse_value, serialize, validate,
)

from .conftest import RC_MIN, TWO_CELLS


def test_empty_text_is_an_error():
    with pytest.raises(NetlistError, match="no elements"):
        parse("")


def test_smallest_rc_circuit(rc_min):
    assert rc_min.source_nodes == ("vdd",)
    assert rc_min.trivial_nodes == ("n1",)
    assert len(rc_min.branches) == 2
    assert rc_min.tran.step == 1e-12 and rc_min.tran.n_steps == 10


@pytest.mark.parametrize(
    "text,value",
    [("1k", 1000.0), ("1K", 1000.0), ("2.5meg", 2.5e6), ("3MEG", 3e6), ("1m", 1e-3),
     ("4u", 4e-6), ("10n", 1e-8), ("1p", 1e-12), ("5f", 5e-15), ("2g", 2e9),
     ("1t", 1e12), ("1e-12", 1e-12), (".5", 0.5), ("-3", -3.0)],
)
def test_parse_value_suffixes(text, value):
    assert parse_value(text) == pytest.approx(value, rel=1e-15)


def test_resistor_suffix_in_netlist():
    c = parse("V1 a 0 1\nR1 a b 1k\nR2 b 0 1\n.tran 1 2")
    assert c.element("R1").value == 1000.0


def test_node_refs(rc_min):
    kinds = {n.name: (n.kind, n.index) for n in rc_min.nodes}
    assert kinds == {"vdd": ("source", 1), "0": ("ground", 0), "n1": ("trivial", 1)}


def test_ic_and_pwl_parsed():
    c = parse(
        "V1 vdd 0 1.2\nL1 vdd n1 1n\nC1 n1 0 1p\nI1 n1 0 PWL(0 0 1n 2m)\n"
        ".ic V(n1)=1.1 I(L1)=0.5m\n.tran 1p 1n\n"
    )
    assert c.node_ic == {"n1": 1.1}
    assert c.inductor_ic == {"L1": pytest.approx(5e-4)}
    assert c.element("I1").waveform.points == ((0.0, 0.0), (1e-9, 2e-3))


@pytest.mark.parametrize(
    "text,line,col,match",
    [
        ("V1 a 0 1\nR1 a b\n.tran 1 2", 2, 7, "two nodes"),
        ("V1 a 0 1\nR1 a b 1x\n.tran 1 2", 2, 8, "invalid number"),
        ("V1 a 0 1\nR1 a b 1\nR1 b 0 1\n.tran 1 2", 3, 1, "duplicate"),
        ("V1 a 0 1\nR1 a b -1\n.tran 1 2", 2, 8, "positive"),
        ("V1 a 0 1\nC1 a b 0\n.tran 1 2", 2, 8, "positive"),
        ("V1 a 0 1\nQ1 a b 1\n.tran 1 2", 2, 1, "unknown element"),
        ("V1 a 0 1\nR1 a a 1\n.tran 1 2", 2, 6, "itself"),
        ("V1 a 0 1\nR1 a b 1\n.op\n.tran 1 2", 3, 1, "unsupported directive"),
        ("V1 a 0 1\nR1 a b 1\n.ic V(zz)=1\n.tran 1 2", 3, 7, "unknown node"),
        ("V1 a 0 1\nR1 a b 1\n.ic X(b)=1\n.tran 1 2", 3, 5, "expected"),
        ("V1 a 0 1\nI1 a b PWL(0 1 2)\n.tran 1 2", 2, 8, "even"),
    ],
)
def test_syntax_errors_carry_position(text, line, col, match):
    with pytest.raises(NetlistError, match=match) as exc:
        parse(text)
    assert (exc.value.line, exc.value.column) == (line, col)


def test_missing_tran():
    with pytest.raises(NetlistError, match="missing .tran"):
        parse("V1 a 0 1\nR1 a b 1")


def test_node_both_source_and_negative_terminal():
    with pytest.raises(NetlistError, match="both a source node"):
        parse("V1 a 0 1\nV2 b a 1\nR1 b c 1\n.tran 1 2")


def test_ground_as_positive_terminal_rejected():
    with pytest.raises(NetlistError, match="positive terminal"):
        parse("V1 0 a 1\nR1 a 0 1\n.tran 1 2")


def test_end_stops_parsing():
    c = parse("V1 a 0 1\nR1 a b 1\n.tran 1 2\n.end\nthis is ignored")
    assert len(c.elements) == 2


def test_validate_clean_circuit(rc_min):
    assert validate(rc_min) == []


def test_assumption_1_negative_terminal_not_ground():
    c = parse("V1 a x 1\nR1 a b 1\nR2 x 0 1\nR3 b 0 1\n.tran 1 2")
    v = validate(c)
    assert any(x.assumption == 1 and x.subject == "V1" for x in v)


def test_assumption_2_current_source_only_node():
    c = parse("V1 a 0 1\nR1 a b 1\nC1 b 0 1p\nI1 b z 1m\n.tran 1 2")
    v = validate(c)
    assert [(x.assumption, x.subject) for x in v] == [(2, "z")]


def test_ground_only_resistor_node_admitted():
    c = parse("V1 a 0 1\nR1 a b 1\nR2 c 0 1\nI1 b c 1m\n.tran 1 2")
    assert validate(c) == []


def test_floating_component_reported():
    c = parse("V1 a 0 1\nR1 a b 1\nR2 c d 1\nI1 c 0 1m\n.tran 1 2")
    v = validate(c)
    assert [(x.assumption, x.subject) for x in v] == [(2, "c")]


def test_violations_collected_exhaustively():
    c = parse("V1 a x 1\nR1 a b 1\nR3 x 0 1\nI1 b z 1m\nI2 b y 1m\n.tran 1 2")
    subjects = {x.subject for x in validate(c)}
    assert {"V1", "z", "y"} <= subjects


def test_shared_rail_cells_are_two_components(two_cells):
    assert validate(two_cells) == []
    parts = decompose(two_cells)
    assert len(parts) == 2
    assert [p.trivial_nodes for p in parts] == [("a",), ("b",)]
    assert all(p.source_nodes == ("vdd",) for p in parts)


def test_meshed_2x2_one_component():
    c = generate(GridSpec(rows=2, cols=2))
    assert len(decompose(c)) == 1


def test_single_node_one_component(rc_min):
    parts = decompose(rc_min)
    assert len(parts) == 1 and parts[0].trivial_nodes == ("n1",)


def test_inert_branch_dropped_with_warning(caplog):
    c = parse("V1 a 0 1\nV2 b 0 2\nR0 a b 1\nR1 a n 1\nC1 n 0 1p\n.tran 1 2")
    with caplog.at_level(logging.WARNING):
        parts = decompose(c)
    assert "R0" in caplog.text
    assert all("R0" not in {e.name for e in p.elements} for p in parts)


def test_bridging_current_source_split():
    c = parse("V1 a 0 1\nR1 a x 1\nR2 a y 1\nI1 x y 1m\n.tran 1 2")
    px, py = decompose(c)
    ix = px.element("I1")
    iy = py.element("I1")
    assert (ix.a, ix.b) == ("x", "0")
    assert (iy.a, iy.b) == ("0", "y")


def test_decompose_covers_branches_and_is_disjoint():
    text = TWO_CELLS + "R9 vdd c 1\nR10 c d 1\nC3 d 0 1p\n"
    c = parse(text)
    parts = decompose(c)
    node_sets = [set(p.trivial_nodes) for p in parts]
    assert sum(len(s) for s in node_sets) == len(c.trivial_nodes)
    assert set().union(*node_sets) == set(c.trivial_nodes)
    names = [e.name for p in parts for e in p.branches]
    assert sorted(names) == sorted(e.name for e in c.branches)


def test_roundtrip_preserves_order(two_cells):
    again = parse(serialize(two_cells))
    assert again == two_cells
    assert [e.name for e in again.elements] == [e.name for e in two_cells.elements]


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 5), st.integers(1, 5), st.floats(0, 1e-10), st.integers(0, 2**16))
def test_roundtrip_generated(rows, cols, l_via, seed):
    c = generate(GridSpec(rows=rows, cols=cols, l_via=l_via, seed=seed))
    assert parse(serialize(c)) == c


def test_roundtrip_with_ics():
    c = parse("V1 vdd 0 1\nL1 vdd n 1n\nC1 n 0 1p\n.ic V(n)=0.25 I(L1)=1e-3\n.tran 1p 5p\n")
    assert parse(serialize(c)) == c
