"""Dual-modular-redundancy monitors for logic no checker observes.

An uncovered region is split into cones, one per root (a node whose output
leaves the uncovered region). Each cone is duplicated cell-for-cell, reading
the same external nets as the original, and an XOR voter compares the two
root outputs. The voter output is a checker fire net and stays at 0 unless
the original or duplicate logic misbehaves.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Iterable

from .errors import MonitorError
from .layout import DEFAULT_WINDOW_H, DEFAULT_WINDOW_W, Layout, density_window_analysis
from .library import CLOCK_PIN, CellLibrary
from .netlist import COMB_OUT, Instance, Netlist, id_key, sorted_ids

log = logging.getLogger(__name__)

VOTER_CELL = "XOR2"
ALERT_NET = "trojan_alert"


@dataclass(frozen=True)
class MonitorCandidate:
    root: str
    cone: frozenset[str]
    free_sites: int = 0
    feasible: bool = True
    rank: int | None = None

    @property
    def size(self) -> int:
        return len(self.cone)


@dataclass(frozen=True)
class Monitor:
    root: str
    cone: tuple[str, ...]
    duplicates: tuple[str, ...]
    voter: str
    fire_net: str
    cells: tuple[tuple[str, str], ...] = field(default=())  # (instance id, cell type), placement order

    @property
    def added(self) -> tuple[str, ...]:
        return self.duplicates + (self.voter,)

    @property
    def covered_nodes(self) -> tuple[str, ...]:
        return self.cone + self.added

    def to_json(self) -> dict:
        return {
            "root": self.root,
            "cone": list(self.cone),
            "duplicates": list(self.duplicates),
            "voter": self.voter,
            "fire_net": self.fire_net,
        }


def _escapes(netlist: Netlist, node: str, region: set[str]) -> bool:
    net = netlist.instances[node].output
    if net in netlist.outputs or net in netlist.assert_outs:
        return True
    sinks = netlist.sinks[net]
    return not sinks or any(s not in region for s, _ in sinks)


def _claim(netlist: Netlist, root: str, allowed: set[str]) -> set[str]:
    cone = {root}
    queue = deque([root])
    while queue:
        cur = queue.popleft()
        for pred in netlist.data_predecessors(cur):
            if pred in allowed and pred not in cone:
                cone.add(pred)
                queue.append(pred)
    return cone


def split_cones(netlist: Netlist, uncovered: Iterable[str]) -> list[tuple[str, frozenset[str]]]:
    """Partition the uncovered region into single-root cones (all sizes).

    Larger fanin claims are served first (ties: lower root id); a node
    already claimed by a larger cone is not crossed by a smaller one.
    """
    region = {n for n in uncovered if n in netlist.instances}
    roots = [n for n in sorted_ids(region) if _escapes(netlist, n, region)]
    full = {r: _claim(netlist, r, region) for r in roots}
    order = sorted(roots, key=lambda r: (-len(full[r]), id_key(r)))
    taken: set[str] = set()
    cones = []
    for r in order:
        cone = _claim(netlist, r, region - taken)
        taken |= cone
        cones.append((r, frozenset(cone)))
    return cones


def find_candidate_cones(netlist: Netlist, uncovered: Iterable[str], layout: Layout,
                         w: int = DEFAULT_WINDOW_W, h: int = DEFAULT_WINDOW_H) -> list[MonitorCandidate]:
    cones = [(r, c) for r, c in split_cones(netlist, uncovered) if len(c) >= 2]
    windows = density_window_analysis(layout, [r for r, _ in cones], w, h) if cones else []
    return [
        MonitorCandidate(root=r, cone=c, free_sites=win.free_sites, feasible=win.feasible)
        for (r, c), win in zip(cones, windows)
    ]


def rank_candidates(candidates: Iterable[MonitorCandidate]) -> list[MonitorCandidate]:
    kept = []
    for cand in candidates:
        if not cand.feasible:
            log.info("dropping cone at %s (size %d): preventing factor Density", cand.root, cand.size)
            continue
        kept.append(cand)
    kept.sort(key=lambda c: (-c.size, -c.free_sites, id_key(c.root)))
    return [replace(c, rank=i) for i, c in enumerate(kept, 1)]


def _fresh(name: str, taken: set[str]) -> str:
    if name not in taken:
        return name
    k = 1
    while f"{name}_{k}" in taken:
        k += 1
    return f"{name}_{k}"


def synthesize_monitor(netlist: Netlist, candidate: MonitorCandidate,
                       library: CellLibrary) -> tuple[Netlist, Monitor]:
    cone = set(candidate.cone)
    root = candidate.root
    if root not in cone:
        raise MonitorError(f"root {root} is not part of its cone")
    for node in cone:
        if node not in netlist.instances:
            raise MonitorError(f"cone member {node} is not in the netlist")
        cell = netlist.instances[node].cell
        if cell not in library:
            raise MonitorError(f"library lacks cell type {cell} needed to duplicate {node}")
    if VOTER_CELL not in library:
        raise MonitorError(f"library lacks {VOTER_CELL} for the voter")
    root_net = netlist.instances[root].output
    if root_net == netlist.clock or any(p == CLOCK_PIN for _, p in netlist.sinks[root_net]):
        raise MonitorError(f"root {root} drives a clock pin; refusing to monitor it")

    ids = set(netlist.instances)
    nets = set(netlist.driver)
    members = sorted_ids(cone)
    dup_id: dict[str, str] = {}
    net_map: dict[str, str] = {}
    for node in members:
        dup_id[node] = _fresh(f"D{node}", ids)
        ids.add(dup_id[node])
        out = netlist.instances[node].output
        net_map[out] = _fresh(f"D{out}", nets)
        nets.add(net_map[out])
    dups = [netlist.instances[n].renamed(dup_id[n], net_map) for n in members]
    voter = _fresh(f"V{root}", ids)
    fire = _fresh(f"fire_{root}", nets)
    vote = Instance(voter, VOTER_CELL, (("A", root_net), ("B", net_map[root_net])), fire, COMB_OUT)
    new = netlist.extended(dups + [vote], assert_outs=(fire,))
    cells = tuple((d.id, d.cell) for d in dups) + ((voter, VOTER_CELL),)
    mon = Monitor(root, tuple(members), tuple(dup_id[n] for n in members), voter, fire, cells)
    return new, mon


def add_alert_tree(netlist: Netlist, fire_nets: list[str], name: str = ALERT_NET,
                   or_cell: str = "OR2", buf_cell: str = "BUF") -> tuple[Netlist, list[Instance]]:
    """OR-reduce monitor fire nets onto one new primary output."""
    if not fire_nets:
        return netlist, []
    ids = set(netlist.instances)
    nets = set(netlist.driver)
    if name in nets:
        raise MonitorError(f"net {name!r} already exists")
    nets.add(name)
    added: list[Instance] = []
    level = list(fire_nets)
    k = 0
    while len(level) > 1 or not added:
        nxt = []
        if len(level) == 1:
            iid = _fresh("ALERT_BUF", ids)
            added.append(Instance(iid, buf_cell, (("A", level[0]),), name, COMB_OUT))
            break
        for i in range(0, len(level) - 1, 2):
            last = len(level) == 2
            out = name if last else _fresh(f"alert_n{k}", nets)
            nets.add(out)
            iid = _fresh(f"ALERT_OR{k}", ids)
            ids.add(iid)
            k += 1
            added.append(Instance(iid, or_cell, (("A", level[i]), ("B", level[i + 1])), out, COMB_OUT))
            nxt.append(out)
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt
    return netlist.extended(added, outputs=(name,)), added


def alert_nets(netlist: Netlist) -> list[str]:
    """Every net whose high value means a checker or monitor fired."""
    nets = list(netlist.assert_outs)
    if ALERT_NET in netlist.outputs and ALERT_NET not in nets:
        nets.append(ALERT_NET)
    return nets
