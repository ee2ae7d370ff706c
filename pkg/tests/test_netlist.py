import random

import pytest
from hypothesis import given, settings, strategies as st

from trojanguard.errors import NetlistError, NetlistSyntaxError
from trojanguard.generate import random_netlist
from trojanguard.netlist import (
    area_power_summary,
    fanin_cone,
    format_netlist,
    parse_netlist,
    sorted_ids,
    transitive_fanin_of_net,
    transitive_fanout,
    validate,
)


def test_fig3_shape(fig3):
    assert len(fig3.instances) == 18
    assert fig3.inputs == tuple("abcdefgh")
    assert fig3.assert_outs == ("assr_1", "assr_2")
    assert fig3.clock is None


def test_sorted_ids_is_numeric():
    assert sorted_ids(["g10", "g2", "g1"]) == ["g1", "g2", "g10"]


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**6), gates=st.integers(1, 40), flops=st.integers(0, 4))
def test_format_parse_round_trip(seed, gates, flops):
    nl = random_netlist(random.Random(seed), gates, 3, flops, 1)
    text = format_netlist(nl)
    again = parse_netlist(text)
    assert again == nl
    assert format_netlist(again) == text


def test_comments_and_blank_lines():
    nl = parse_netlist("# header\n\ninput a;  # trailing\noutput y;\nINV g1 (.A(a), .Y(y));\n")
    assert list(nl.instances) == ["g1"]


@pytest.mark.parametrize("text, line, col", [
    ("input a;\nINV g1 (.A(a), .Y(y))\n", 2, 22),
    ("input a;\n  INV g1 (.A(a) .Y(y));\n", 2, 11),
    ("input a;\nINV g1 (.A(a));\n", 2, 9),
    ("input a, 1b;\n", 1, 7),
])
def test_syntax_errors_carry_position(text, line, col):
    with pytest.raises(NetlistSyntaxError) as exc:
        parse_netlist(text)
    assert exc.value.line == line
    assert exc.value.column == col
    assert str(exc.value).startswith(f"line {line}, column {col}:")


def test_duplicate_driver_and_undeclared_net():
    with pytest.raises(NetlistError, match="duplicate driver"):
        parse_netlist("input a;\nINV g1 (.A(a), .Y(y));\nBUF g2 (.A(a), .Y(y));\n")
    with pytest.raises(NetlistError, match="undeclared net 'z'"):
        parse_netlist("input a;\nAND2 g1 (.A(a), .B(z), .Y(y));\n")
    with pytest.raises(NetlistError, match="used as port"):
        parse_netlist("input a;\noutput q;\nINV g1 (.A(a), .Y(y));\n")


def test_validate_reports_unknown_cell_pins_and_cycles(lib):
    nl = parse_netlist(
        "input a;\n"
        "FOO g1 (.A(a), .Y(n1));\n"
        "AND2 g2 (.A(a), .Y(n2));\n"
        "AND2 g3 (.A(a), .B(n4), .Y(n3));\n"
        "INV g4 (.A(n3), .Y(n4));\n"
    )
    kinds = [d.kind for d in validate(nl, lib)]
    assert kinds == ["unresolved-cell", "pin-mismatch", "combinational-cycle"]


def test_validate_clean_fixture(lib, fig3):
    assert validate(fig3, lib) == []


def test_flop_breaks_cycle(lib):
    nl = parse_netlist(
        "input a;\nclock clk;\noutput q;\n"
        "XOR2 g1 (.A(a), .B(q), .Y(d));\n"
        "DFF r1 (.D(d), .CK(clk), .Q(q));\n"
    )
    assert validate(nl, lib) == []
    assert nl.topo_order == ("r1", "g1")


def test_cones(fig3):
    assert fanin_cone(fig3, "g16") == {"g1", "g2", "g3", "g6", "g7", "g9", "g12", "g13", "g16"}
    assert transitive_fanin_of_net(fig3, "assr_2") == {"g2", "g3", "g4", "g5", "g7", "g8", "g10", "g17"}
    assert transitive_fanout(fig3, "g9") == {"g9", "g12", "g13", "g15", "g16"}


def test_fanin_cone_stops_at_flops():
    nl = parse_netlist(
        "input a;\nclock clk;\noutput y;\n"
        "INV g1 (.A(a), .Y(n1));\n"
        "DFF r1 (.D(n1), .CK(clk), .Q(q));\n"
        "BUF g2 (.A(q), .Y(y));\n"
    )
    assert fanin_cone(nl, "g2") == {"g1", "r1", "g2"}
    assert fanin_cone(nl, "g2", stop_at_flops=True) == {"r1", "g2"}


def test_area_power_are_exact(lib, fig3):
    res = area_power_summary(fig3, lib)
    total = sum(lib[i.cell].area for i in fig3.instances.values())
    assert res.area == total
    assert res.area.denominator in (1, 2, 4, 5, 10, 20, 25, 50, 100)


def test_extended_rejects_collision(fig3):
    with pytest.raises(NetlistError, match="collision"):
        fig3.extended([fig3.instances["g1"]])
