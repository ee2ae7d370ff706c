import random

import pytest
from hypothesis import given, settings, strategies as st

from oracles import all_path_arrivals
from trojanguard.errors import TimingError
from trojanguard.generate import random_netlist
from trojanguard.layout import build_floorplan, place
from trojanguard.netlist import parse_netlist
from trojanguard.sta import compute_timing, max_arrival, timing_delta, tune_clock_period

CHAIN = """
input a;
clock clk;
output y;
INV g1 (.A(a), .Y(n1));
NAND2 g2 (.A(n1), .B(q), .Y(n2));
DFF r1 (.D(n2), .CK(clk), .Q(q));
BUF g3 (.A(q), .Y(y));
"""


def test_hand_computed_arrivals(lib):
    nl = parse_netlist(CHAIN)
    rep = compute_timing(nl, None, lib, 1.0)
    inv = 0.03 + 0.008 * 1
    nand_from_q = 0.12 + 0.008 * 2 + 0.04 + 0.010 * 1
    assert rep.endpoints["r1/D"].arrival == pytest.approx(max(inv + 0.04 + 0.010, nand_from_q), abs=1e-12)
    assert rep.endpoints["y"].arrival == pytest.approx(0.12 + 0.016 + 0.05 + 0.006, abs=1e-12)
    assert rep.endpoints["y"].slack == pytest.approx(1.0 - rep.endpoints["y"].arrival, abs=1e-12)
    assert rep.wns == min(e.slack for e in rep.endpoints.values())
    assert rep.tps == pytest.approx(sum(e.slack for e in rep.endpoints.values()))


def test_critical_path_traces_worst_endpoint(lib, fig3):
    rep = compute_timing(fig3, None, lib, 1.0)
    worst = min(rep.endpoints.values(), key=lambda e: e.slack)
    assert rep.critical_path[-1] == fig3.driver[worst.id]
    for a, b in zip(rep.critical_path, rep.critical_path[1:]):
        assert a in fig3.data_predecessors(b)


def test_wire_delay_only_with_layout(lib, fig3):
    lay = place(fig3, build_floorplan(fig3, lib, 0.65), lib)
    assert max_arrival(fig3, lay, lib) > max_arrival(fig3, None, lib)


def test_tuned_clock_leaves_ten_percent(lib, fig3):
    lay = place(fig3, build_floorplan(fig3, lib, 0.65), lib)
    clk = tune_clock_period(fig3, lay, lib)
    rep = compute_timing(fig3, lay, lib, clk)
    assert rep.wns == pytest.approx(0.1 * clk, abs=1e-5)


def test_errors(lib, fig3):
    with pytest.raises(TimingError, match="positive"):
        compute_timing(fig3, None, lib, 0)
    cyc = parse_netlist("input a;\noutput y;\nAND2 g1 (.A(a), .B(y), .Y(n1));\nBUF g2 (.A(n1), .Y(y));\n")
    with pytest.raises(TimingError, match="cycle"):
        compute_timing(cyc, None, lib, 1.0)
    a = compute_timing(fig3, None, lib, 1.0)
    with pytest.raises(TimingError, match="different clock"):
        timing_delta(a, compute_timing(fig3, None, lib, 2.0))
    lay = place(fig3, build_floorplan(fig3, lib, 0.65), lib)
    with pytest.raises(TimingError, match="not placed"):
        compute_timing(fig3.extended([fig3.instances["g1"].renamed("gx", {"n1": "nx"})]), lay, lib, 1.0)


def test_timing_delta_sign(lib, fig3):
    a = compute_timing(fig3, None, lib, 1.0)
    d = timing_delta(a, a)
    assert (d.tps, d.wns, d.whs) == (0.0, 0.0, 0.0)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**6), gates=st.integers(1, 12), flops=st.integers(0, 2),
       placed=st.booleans())
def test_matches_path_enumeration(lib, seed, gates, flops, placed):
    nl = random_netlist(random.Random(seed), gates, 3, flops, 1)
    lay = place(nl, build_floorplan(nl, lib, 0.6), lib) if placed else None
    rep = compute_timing(nl, lay, lib, 1.0)
    oracle = all_path_arrivals(nl, lib, lay)
    assert set(rep.endpoints) == set(oracle)
    for eid, (late, early) in oracle.items():
        assert abs(rep.endpoints[eid].arrival - late) <= 1e-9
        assert abs(rep.endpoints[eid].hold_slack - (early - lib.hold)) <= 1e-9
