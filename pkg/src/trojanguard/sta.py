"""Static timing over a placed netlist.

Gate delay is ``intrinsic + load * fanout``; wire delay is the library's
``wire_delay`` coefficient times the Manhattan distance between the driver
and the sink (cell centers or boundary pins). Timing paths start at primary
inputs and flip-flop outputs and end at flip-flop data pins, primary outputs
and checker fire nets.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import LayoutError, NetlistError, TimingError
from .layout import Layout
from .library import CellLibrary
from .netlist import Netlist


@dataclass(frozen=True)
class Endpoint:
    id: str
    arrival: float
    slack: float
    hold_slack: float


@dataclass(frozen=True)
class TimingReport:
    clock: float
    endpoints: dict[str, Endpoint] = field(default_factory=dict)
    critical_path: tuple[str, ...] = ()

    @property
    def wns(self) -> float:
        """Worst (minimum) setup slack over all endpoints."""
        return min((e.slack for e in self.endpoints.values()), default=self.clock)

    @property
    def tps(self) -> float:
        return sum(max(0.0, e.slack) for e in self.endpoints.values())

    @property
    def whs(self) -> float:
        return min((e.hold_slack for e in self.endpoints.values()), default=0.0)

    def tps_over(self, endpoint_ids) -> float:
        return sum(max(0.0, self.endpoints[e].slack) for e in endpoint_ids)

    def to_json(self) -> dict:
        return {
            "clock": self.clock,
            "wns": self.wns,
            "tps": self.tps,
            "whs": self.whs,
            "endpoints": [
                {"id": e.id, "arrival": e.arrival, "slack": e.slack} for e in self.endpoints.values()
            ],
            "critical_path": list(self.critical_path),
        }


@dataclass(frozen=True)
class TimingDelta:
    tps: float
    wns: float
    whs: float


def _manhattan(a, b) -> float:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


def compute_timing(
    netlist: Netlist,
    layout: Layout | None,
    library: CellLibrary,
    clock_period: float,
    hold: float | None = None,
) -> TimingReport:
    """Longest/shortest path arrival times and per-endpoint slack.

    With ``layout=None`` wire delay is zero (pre-placement estimate).
    """
    if clock_period <= 0:
        raise TimingError("clock period must be positive")
    hold = library.hold if hold is None else hold
    kappa = library.wire_delay if layout is not None else 0.0
    try:
        order = netlist.topo_order
    except NetlistError:
        raise TimingError("combinational cycle") from None

    def loc(node: str | None, net: str):
        if layout is None:
            return (0.0, 0.0)
        if node is None:
            if net not in layout.pins:
                raise TimingError(f"port {net!r} has no pin location")
            return layout.pins[net]
        try:
            return layout.center(node)
        except LayoutError as exc:
            raise TimingError(str(exc)) from None

    late: dict[str, float] = {n: 0.0 for n in netlist.inputs}
    early: dict[str, float] = dict(late)
    worst_pred: dict[str, str | None] = {}

    def pin_arrival(net: str, sink: str) -> tuple[float, float]:
        wire = kappa * _manhattan(loc(netlist.driver[net], net), loc(sink, net))
        return late[net] + wire, early[net] + wire

    for inst_id in order:
        inst = netlist.instances[inst_id]
        cell = library[inst.cell]
        gate = cell.delay + cell.load * netlist.fanout(inst.output)
        if cell.is_sequential:
            late[inst.output] = early[inst.output] = gate
            worst_pred[inst_id] = None
            continue
        best_l, best_e, pred = 0.0, None, None
        for net in inst.data_nets:
            l, e = pin_arrival(net, inst_id)
            if pred is None or l > best_l:
                best_l, pred = l, net
            best_e = e if best_e is None else min(best_e, e)
        worst_pred[inst_id] = netlist.driver[pred] if pred is not None else None
        late[inst.output] = best_l + gate
        early[inst.output] = (best_e or 0.0) + gate

    endpoints: dict[str, Endpoint] = {}
    starts: dict[str, str | None] = {}
    for inst_id in order:
        inst = netlist.instances[inst_id]
        if inst.is_sequential:
            d_net = inst.pin_map["D"]
            l, e = pin_arrival(d_net, inst_id)
            eid = f"{inst_id}/D"
            endpoints[eid] = Endpoint(eid, l, clock_period - l, e - hold)
            starts[eid] = netlist.driver[d_net]
    for net in dict.fromkeys(netlist.outputs + netlist.assert_outs):
        drv = netlist.driver[net]
        if net in netlist.outputs:
            wire = kappa * _manhattan(loc(drv, net), loc(None, net)) if layout is not None else 0.0
        else:
            wire = 0.0
        l, e = late[net] + wire, early[net] + wire
        endpoints[net] = Endpoint(net, l, clock_period - l, e - hold)
        starts[net] = drv

    path: list[str] = []
    if endpoints:
        worst = min(endpoints.values(), key=lambda ep: (ep.slack, ep.id))
        node = starts[worst.id]
        while node is not None:
            path.append(node)
            node = worst_pred.get(node)
        path.reverse()
    return TimingReport(clock_period, endpoints, tuple(path))


def timing_delta(before: TimingReport, after: TimingReport) -> TimingDelta:
    """after - before; negative values mean degradation."""
    if before.clock != after.clock:
        raise TimingError("reports use different clock periods")
    missing = [e for e in before.endpoints if e not in after.endpoints]
    if missing:
        raise TimingError(f"after-report lacks endpoints {missing[:5]}")
    return TimingDelta(after.tps - before.tps, after.wns - before.wns, after.whs - before.whs)


def max_arrival(netlist: Netlist, layout: Layout | None, library: CellLibrary) -> float:
    rep = compute_timing(netlist, layout, library, 1.0)
    return max((e.arrival for e in rep.endpoints.values()), default=0.0)


def tune_clock_period(netlist: Netlist, layout: Layout | None, library: CellLibrary,
                      slack_fraction: float = 0.10) -> float:
    """Clock period that leaves ``slack_fraction`` of the period as worst slack."""
    if not 0 <= slack_fraction < 1:
        raise TimingError("slack fraction must be in [0, 1)")
    arr = max_arrival(netlist, layout, library)
    if arr <= 0:
        raise TimingError("design has no timed paths")
    return round(arr / (1.0 - slack_fraction), 6)
