"""Gate-level netlist IR, its line-oriented text format, and structural queries.

Grammar (one statement per line, ``#`` starts a comment)::

    input a, b;
    clock clk;
    output y;
    assert_out fire;
    NAND2 g1 (.A(a), .B(b), .Y(n1));
    DFF r0 (.D(n1), .CK(clk), .Q(q0));

Each instance has exactly one output pin. The pin name decides its role:
``Y`` marks a combinational output and ``Q`` a flip-flop output, and ``CK``
is the clock pin. The library check in :func:`validate` confirms the
convention matches the cell's declared function.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Iterable

import networkx as nx

from .errors import NetlistError, NetlistSyntaxError
from .library import CLOCK_PIN, CellLibrary

COMB_OUT = "Y"
SEQ_OUT = "Q"
OUTPUT_PINS = frozenset({COMB_OUT, SEQ_OUT})

_ID = r"[A-Za-z_][A-Za-z0-9_.]*"
_ID_RE = re.compile(rf"^{_ID}$")
_DECL_RE = re.compile(rf"^(input|output|clock|assert_out)\s+(.+?)\s*;$")
_INST_RE = re.compile(rf"^({_ID})\s+({_ID})\s*\((.*)\)\s*;$")
_CONN_RE = re.compile(rf"^\.({_ID})\s*\(\s*({_ID})\s*\)$")
_NUM_SPLIT = re.compile(r"(\d+)")


def id_key(ident: str):
    """Natural sort key so that ``g2`` orders before ``g10``."""
    return tuple((0, int(p), "") if p.isdigit() else (1, 0, p) for p in _NUM_SPLIT.split(ident) if p)


def sorted_ids(ids: Iterable[str]) -> list[str]:
    return sorted(ids, key=id_key)


@dataclass(frozen=True)
class Instance:
    id: str
    cell: str
    pins: tuple[tuple[str, str], ...]  # (input pin, net), clock pin included
    output: str
    out_pin: str = COMB_OUT

    @property
    def is_sequential(self) -> bool:
        return self.out_pin == SEQ_OUT

    @cached_property
    def pin_map(self) -> dict[str, str]:
        return dict(self.pins)

    @property
    def data_pins(self) -> tuple[tuple[str, str], ...]:
        return tuple((p, n) for p, n in self.pins if p != CLOCK_PIN)

    @property
    def data_nets(self) -> tuple[str, ...]:
        return tuple(n for p, n in self.pins if p != CLOCK_PIN)

    def renamed(self, new_id: str, net_map: dict[str, str]) -> "Instance":
        return Instance(
            id=new_id,
            cell=self.cell,
            pins=tuple((p, net_map.get(n, n)) for p, n in self.pins),
            output=net_map.get(self.output, self.output),
            out_pin=self.out_pin,
        )


@dataclass(frozen=True)
class Diagnostic:
    kind: str
    message: str
    instances: tuple[str, ...] = ()

    def __str__(self) -> str:
        return f"{self.kind}: {self.message}"


@dataclass(frozen=True)
class Netlist:
    """Immutable netlist value. Derived indices are computed lazily."""

    instances: dict[str, Instance] = field(default_factory=dict)
    inputs: tuple[str, ...] = ()
    outputs: tuple[str, ...] = ()
    clock: str | None = None
    assert_outs: tuple[str, ...] = ()

    def __post_init__(self):
        driven = set(self.inputs)
        if self.clock is not None:
            if self.clock in driven:
                raise NetlistError(f"duplicate driver for net {self.clock!r}")
            driven.add(self.clock)
        if len(driven) != len(self.inputs) + (self.clock is not None):
            dup = next(n for n in self.inputs if self.inputs.count(n) > 1)
            raise NetlistError(f"duplicate driver for net {dup!r}")
        for inst in self.instances.values():
            if inst.output in driven:
                raise NetlistError(f"duplicate driver for net {inst.output!r}")
            driven.add(inst.output)
        for inst in self.instances.values():
            for pin, net in inst.pins:
                if net not in driven:
                    raise NetlistError(f"undeclared net {net!r} on {inst.id}.{pin}")
        for net in self.outputs + self.assert_outs:
            if net not in driven:
                raise NetlistError(f"undeclared net {net!r} used as port")

    # -- derived indices -------------------------------------------------
    @cached_property
    def driver(self) -> dict[str, str | None]:
        """net -> driving instance id, or None for a primary input/clock."""
        d: dict[str, str | None] = {n: None for n in self.inputs}
        if self.clock is not None:
            d[self.clock] = None
        for inst in self.instances.values():
            d[inst.output] = inst.id
        return d

    @cached_property
    def sinks(self) -> dict[str, tuple[tuple[str, str], ...]]:
        """net -> (instance id, pin) pairs reading it, in instance order."""
        acc: dict[str, list[tuple[str, str]]] = {n: [] for n in self.driver}
        for inst in self.instances.values():
            for pin, net in inst.pins:
                acc[net].append((inst.id, pin))
        return {n: tuple(v) for n, v in acc.items()}

    @property
    def nets(self) -> list[str]:
        return list(self.driver)

    def fanout(self, net: str) -> int:
        """Sink pin count plus one per port occurrence."""
        return len(self.sinks.get(net, ())) + self.outputs.count(net) + self.assert_outs.count(net)

    def data_predecessors(self, inst_id: str) -> list[str]:
        out = []
        for net in self.instances[inst_id].data_nets:
            d = self.driver[net]
            if d is not None and d not in out:
                out.append(d)
        return out

    def data_successors(self, inst_id: str) -> list[str]:
        out = []
        for sink, pin in self.sinks[self.instances[inst_id].output]:
            if pin != CLOCK_PIN and sink not in out:
                out.append(sink)
        return out

    @cached_property
    def comb_graph(self) -> nx.DiGraph:
        """Edges between instances that do not pass through a flop boundary."""
        g = nx.DiGraph()
        g.add_nodes_from(self.instances)
        for inst in self.instances.values():
            if inst.is_sequential:
                continue
            for net in inst.data_nets:
                d = self.driver[net]
                if d is not None and not self.instances[d].is_sequential:
                    g.add_edge(d, inst.id)
        return g

    @cached_property
    def topo_order(self) -> tuple[str, ...]:
        """Instances in evaluation order; flops first (their outputs are state)."""
        try:
            order = list(nx.lexicographical_topological_sort(self.comb_graph, key=id_key))
        except nx.NetworkXUnfeasible:
            raise NetlistError("combinational cycle") from None
        seq = [i for i in order if self.instances[i].is_sequential]
        comb = [i for i in order if not self.instances[i].is_sequential]
        return tuple(seq + comb)

    @property
    def flops(self) -> list[str]:
        return [i for i, inst in self.instances.items() if inst.is_sequential]

    # -- value-producing edits --------------------------------------------
    def extended(
        self,
        instances: Iterable[Instance] = (),
        inputs: Iterable[str] = (),
        outputs: Iterable[str] = (),
        assert_outs: Iterable[str] = (),
    ) -> "Netlist":
        new = dict(self.instances)
        for inst in instances:
            if inst.id in new:
                raise NetlistError(f"instance id collision: {inst.id!r}")
            new[inst.id] = inst
        return Netlist(
            instances=new,
            inputs=self.inputs + tuple(inputs),
            outputs=self.outputs + tuple(outputs),
            clock=self.clock,
            assert_outs=self.assert_outs + tuple(assert_outs),
        )

    def replaced(self, instances: dict[str, Instance], **changes) -> "Netlist":
        kw = dict(
            instances=instances,
            inputs=self.inputs,
            outputs=self.outputs,
            clock=self.clock,
            assert_outs=self.assert_outs,
        )
        kw.update(changes)
        return Netlist(**kw)


# -- text format -------------------------------------------------------------

def _split_ids(text: str, lineno: int, col: int) -> list[str]:
    ids = [t.strip() for t in text.split(",")]
    for t in ids:
        if not _ID_RE.match(t):
            raise NetlistSyntaxError(f"bad identifier {t!r}", lineno, col)
    return ids


def parse_netlist(text: str) -> Netlist:
    inputs: list[str] = []
    outputs: list[str] = []
    asserts: list[str] = []
    clock = None
    instances: dict[str, Instance] = {}
    driven_at: dict[str, int] = {}

    def drive(net: str, lineno: int):
        if net in driven_at:
            raise NetlistError(f"line {lineno}: duplicate driver for net {net!r} (first driven on line {driven_at[net]})")
        driven_at[net] = lineno

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0]
        stripped = line.strip()
        if not stripped:
            continue
        col = len(line) - len(line.lstrip()) + 1
        m = _DECL_RE.match(stripped)
        if m:
            kind, body = m.groups()
            names = _split_ids(body, lineno, col + len(kind) + 1)
            if kind == "input":
                for n in names:
                    drive(n, lineno)
                inputs.extend(names)
            elif kind == "clock":
                if clock is not None or len(names) != 1:
                    raise NetlistSyntaxError("exactly one clock net allowed", lineno, col)
                drive(names[0], lineno)
                clock = names[0]
            elif kind == "output":
                outputs.extend(names)
            else:
                asserts.extend(names)
            continue
        m = _INST_RE.match(stripped)
        if not m:
            if not stripped.endswith(";"):
                raise NetlistSyntaxError("missing ';'", lineno, col + len(stripped))
            raise NetlistSyntaxError(f"cannot parse statement {stripped!r}", lineno, col)
        cell, inst_id, body = m.groups()
        if inst_id in instances:
            raise NetlistSyntaxError(f"duplicate instance id {inst_id!r}", lineno, col)
        pins: list[tuple[str, str]] = []
        out = None
        body_col = col + stripped.index("(") + 1
        for conn in body.split(","):
            conn = conn.strip()
            cm = _CONN_RE.match(conn)
            if not cm:
                raise NetlistSyntaxError(f"bad pin connection {conn!r} in {inst_id}", lineno, body_col)
            pin, net = cm.groups()
            if pin in OUTPUT_PINS:
                if out is not None:
                    raise NetlistSyntaxError(f"{inst_id} has more than one output pin", lineno, body_col)
                out = (pin, net)
            else:
                if any(p == pin for p, _ in pins):
                    raise NetlistSyntaxError(f"{inst_id} connects pin {pin} twice", lineno, body_col)
                pins.append((pin, net))
        if out is None:
            raise NetlistSyntaxError(f"{inst_id} has no output pin (Y or Q)", lineno, body_col)
        drive(out[1], lineno)
        instances[inst_id] = Instance(inst_id, cell, tuple(pins), out[1], out[0])

    for inst in instances.values():
        for pin, net in inst.pins:
            if net not in driven_at:
                raise NetlistError(f"undeclared net {net!r} on {inst.id}.{pin}")
    for net in outputs + asserts:
        if net not in driven_at:
            raise NetlistError(f"undeclared net {net!r} used as port")
    return Netlist(instances, tuple(inputs), tuple(outputs), clock, tuple(asserts))


def read_netlist(path: str | Path) -> Netlist:
    return parse_netlist(Path(path).read_text(encoding="utf-8"))


def format_netlist(netlist: Netlist) -> str:
    lines = [f"input {n};" for n in netlist.inputs]
    if netlist.clock is not None:
        lines.append(f"clock {netlist.clock};")
    lines += [f"output {n};" for n in netlist.outputs]
    lines += [f"assert_out {n};" for n in netlist.assert_outs]
    for inst in netlist.instances.values():
        conns = [f".{p}({n})" for p, n in inst.pins] + [f".{inst.out_pin}({inst.output})"]
        lines.append(f"{inst.cell} {inst.id} ({', '.join(conns)});")
    return "\n".join(lines) + "\n"


# -- checks and queries -----------------------------------------------------------

def validate(netlist: Netlist, library: CellLibrary) -> list[Diagnostic]:
    diags: list[Diagnostic] = []
    for inst in netlist.instances.values():
        if inst.cell not in library:
            diags.append(Diagnostic("unresolved-cell", f"{inst.id}: unknown cell type {inst.cell!r}", (inst.id,)))
            continue
        cell = library[inst.cell]
        want = set(cell.inputs) | ({cell.clock} if cell.clock else set())
        have = {p for p, _ in inst.pins}
        if have != want or inst.out_pin != cell.output:
            diags.append(Diagnostic(
                "pin-mismatch",
                f"{inst.id}: pins {sorted(have)}/{inst.out_pin} do not match {cell.name} "
                f"{sorted(want)}/{cell.output}",
                (inst.id,),
            ))
        if cell.clock and inst.pin_map.get(cell.clock) != netlist.clock:
            diags.append(Diagnostic("clock", f"{inst.id}: clock pin not tied to the design clock", (inst.id,)))
    for scc in nx.strongly_connected_components(netlist.comb_graph):
        members = sorted_ids(scc)
        if len(members) > 1 or netlist.comb_graph.has_edge(members[0], members[0]):
            diags.append(Diagnostic("combinational-cycle", f"cycle through {', '.join(members)}", tuple(members)))
    diags.sort(key=lambda d: (id_key(d.instances[0]) if d.instances else (), d.kind))
    return diags


def fanin_cone(netlist: Netlist, node: str, stop_at_flops: bool = False) -> set[str]:
    if node not in netlist.instances:
        raise NetlistError(f"unknown node {node!r}")
    seen = {node}
    queue = deque([node])
    while queue:
        cur = queue.popleft()
        if stop_at_flops and cur != node and netlist.instances[cur].is_sequential:
            continue
        for pred in netlist.data_predecessors(cur):
            if pred not in seen:
                seen.add(pred)
                queue.append(pred)
    return seen


def transitive_fanin_of_net(netlist: Netlist, net: str) -> set[str]:
    """All instances with a data path (crossing flops) into ``net``."""
    d = netlist.driver.get(net, "<missing>")
    if d == "<missing>":
        raise NetlistError(f"unknown net {net!r}")
    return set() if d is None else fanin_cone(netlist, d)


def transitive_fanout(netlist: Netlist, inst_id: str) -> set[str]:
    seen = {inst_id}
    queue = deque([inst_id])
    while queue:
        cur = queue.popleft()
        for succ in netlist.data_successors(cur):
            if succ not in seen:
                seen.add(succ)
                queue.append(succ)
    return seen


@dataclass(frozen=True)
class ResourceSummary:
    area: Fraction
    power: Fraction
    instances: int


def area_power_summary(netlist: Netlist, library: CellLibrary) -> ResourceSummary:
    area = Fraction(0)
    power = Fraction(0)
    for inst in netlist.instances.values():
        cell = library[inst.cell]
        area += cell.area
        power += cell.power
    return ResourceSummary(area, power, len(netlist.instances))
