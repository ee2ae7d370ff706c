import pytest

from trojanguard.attack import (
    TrojanSpec,
    checker_logic,
    evaluate_detection,
    inject_trojan,
    parse_trojan_specs,
    place_trojan,
    read_trojan_specs,
)
from trojanguard.config import bundled
from trojanguard.errors import TrojanError
from trojanguard.layout import Infeasible, Placement, build_floorplan, place
from trojanguard.monitor import MonitorCandidate, add_alert_tree, synthesize_monitor
from trojanguard.netlist import parse_netlist, validate
from trojanguard.sim import simulate


@pytest.fixture(scope="module")
def protected(lib, fig3):
    nl, mon = synthesize_monitor(fig3, MonitorCandidate("g18", frozenset({"g11", "g14", "g18"})), lib)
    nl, _ = add_alert_tree(nl, [mon.fire_net])
    return nl


def test_parse_specs():
    specs = parse_trojan_specs("# c\ntrojan target=g1 trigger=a:1,b:0 arm=2\ntrojan target=g2\n")
    assert specs[0] == TrojanSpec("g1", (("a", 1), ("b", 0)), 2)
    assert specs[0].activation_probability == 0.25
    assert specs[1].activation_probability == 1.0
    assert len(read_trojan_specs(bundled("fig3_trojans.txt"))) == 3


@pytest.mark.parametrize("text, msg", [
    ("bug target=g1", "expected"), ("trojan trigger=a:1", "missing target"),
    ("trojan target=g1 trigger=a:2", "value 0 or 1"), ("trojan target=g1 arm=x", "integer"),
])
def test_spec_errors(text, msg):
    with pytest.raises(TrojanError, match=msg):
        parse_trojan_specs(text)


def test_checker_logic(protected):
    chk = checker_logic(protected)
    assert {"g16", "g17", "Dg11", "Dg14", "Dg18", "Vg18", "ALERT_BUF"} <= chk
    assert "g13" not in chk and "g18" not in chk


def test_injection_structure(lib, fig3):
    inj = inject_trojan(fig3, TrojanSpec("g14", (("a", 1), ("b", 0), ("c", 1))), lib)
    nl = inj.netlist
    assert validate(nl, lib) == []
    assert nl.instances["g14"].output == "n14__ht"
    assert nl.instances[inj.payload].pin_map == {"A": "n14__ht", "B": inj.trigger_net}
    assert nl.driver["n14"] == inj.payload
    assert inj.footprint == 3  # one inverter, two AND2
    on = simulate(nl, lib, [dict(a=1, b=0, c=1, d=0, e=0, f=0, g=0, h=0)])[0]
    off = simulate(nl, lib, [dict(a=1, b=1, c=1, d=0, e=0, f=0, g=0, h=0)])[0]
    assert on["n14"] != on["n14__ht"] and off["n14"] == off["n14__ht"]


def test_trigger_on_victim_uses_pre_payload_net(lib, fig3):
    inj = inject_trojan(fig3, TrojanSpec("g11", (("n11", 1),)), lib)
    assert inj.trigger_net == "n11__ht"


def test_injection_refusals(lib, fig3, protected):
    with pytest.raises(TrojanError, match="unknown target"):
        inject_trojan(fig3, TrojanSpec("zz"))
    with pytest.raises(TrojanError, match="checker"):
        inject_trojan(protected, TrojanSpec("Vg18"))
    with pytest.raises(TrojanError, match="does not exist"):
        inject_trojan(fig3, TrojanSpec("g1", (("nope", 1),)))
    with pytest.raises(TrojanError, match="clocked"):
        inject_trojan(fig3, TrojanSpec("g1", (), 2))
    with pytest.raises(TrojanError, match="depends on the payload"):
        inject_trojan(fig3, TrojanSpec("g11", (("n14", 1),)))


def test_detection_on_monitored_node(lib, protected):
    rep = evaluate_detection(protected, TrojanSpec("g14"), lib, exhaustive=True)
    assert rep.exhaustive and rep.stimuli == 256
    assert rep.detection_rate == 1.0 and rep.false_positives == 0
    assert rep.latency_histogram == {0: 256}


def test_unmonitored_node_escapes(lib, protected):
    rep = evaluate_detection(protected, TrojanSpec("g15", (("a", 1), ("b", 1), ("c", 0), ("d", 1))), lib,
                             exhaustive=True)
    assert rep.activations == 16
    assert rep.detection_rate == 0.0


def test_clean_run_has_no_false_positives(lib, protected):
    rep = evaluate_detection(protected, None, lib, stimulus_budget=20_000)
    assert rep.stimuli == 20_000 and rep.false_positives == 0
    assert rep.detection_rate is None


def test_armed_trojan_waits(lib):
    nl = parse_netlist(
        "input a, b;\nclock clk;\noutput y;\nassert_out chk;\n"
        "XOR2 g1 (.A(a), .B(b), .Y(n1));\nDFF r1 (.D(n1), .CK(clk), .Q(y));\n"
        "XOR2 c1 (.A(a), .B(b), .Y(m1));\nXOR2 c2 (.A(n1), .B(m1), .Y(chk));\n"
    )
    rep = evaluate_detection(nl, TrojanSpec("g1", (), 2), lib, stimulus_budget=4000, depth=5)
    assert rep.activations == 2000  # cycles 2 and 3 of four, in each of 1000 lanes
    assert rep.detection_rate == 1.0 and rep.false_positives == 0


def test_exhaustive_limit(lib):
    wide = parse_netlist("input " + ", ".join(f"x{i}" for i in range(22)) + ";\nassert_out f;\n"
                         "XOR2 g1 (.A(x0), .B(x1), .Y(f));\n")
    with pytest.raises(TrojanError, match="too large"):
        evaluate_detection(wide, None, lib, exhaustive=True)
    with pytest.raises(TrojanError, match="no checker"):
        evaluate_detection(parse_netlist("input a;\noutput y;\nINV g (.A(a), .Y(y));\n"), None, lib)


def test_place_trojan(lib, fig3):
    lay = place(fig3, build_floorplan(fig3, lib, 0.65), lib)
    inj = inject_trojan(fig3, TrojanSpec("g14", (("a", 1),)), lib)
    got = place_trojan(lay, inj, lib, "g14")
    assert not isinstance(got, Infeasible)
    assert set(got.placements) - set(lay.placements) == set(inj.trojan_instances)
    fillers = {f"fill{r}_{a}": Placement(r, a, b - a) for r, runs in lay.gaps().items() for a, b in runs}
    full = lay.with_placements(fillers)
    big = inject_trojan(fig3, TrojanSpec("g14", tuple((n, 1) for n in "abcdefgh")), lib)
    assert isinstance(place_trojan(full, big, lib, "g14"), Infeasible)
