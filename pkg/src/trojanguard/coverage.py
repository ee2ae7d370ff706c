"""Assertion coverage of design nodes and the resulting security coverage score.

A node (cell instance) is covered by an assertion when manipulating its
output can change the assertion's fire signal. Two engines are provided:

* :func:`structural_coverage` - transitive fanin of the fire net. Fast and a
  sound superset of the functional answer.
* :func:`exact_coverage` - complement-forcing fault propagation over input
  sequences, exhaustive when the sequence space is small enough and a seeded
  random sample (plus the all-zeros and all-ones corners) otherwise.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import CoverageError
from .library import CellLibrary
from .netlist import Netlist, sorted_ids, transitive_fanin_of_net
from .sim import FaultSimulator, exhaustive_stimulus, pack_lanes, random_stimulus

log = logging.getLogger(__name__)

STRUCTURAL = "structural"
EXACT = "exact"
DEFAULT_DEPTH = 3
EXHAUSTIVE_LIMIT = 1 << 20
DEFAULT_BUDGET = EXHAUSTIVE_LIMIT
CHUNK = 1 << 18  # lanes per simulated batch


@dataclass(frozen=True)
class CoverageMap:
    covered: dict[str, frozenset[str]]
    universe: frozenset[str]
    mode: str = STRUCTURAL
    unroll_depth: int | None = None
    input_budget: int | None = None
    budgeted: bool = False

    def __post_init__(self):
        for net, ids in self.covered.items():
            stray = ids - self.universe
            if stray:
                raise CoverageError(f"{net} covers nodes outside the universe: {sorted_ids(stray)}")

    @property
    def k(self) -> int:
        return len(self.covered)

    @property
    def union(self) -> frozenset[str]:
        return frozenset().union(*self.covered.values()) if self.covered else frozenset()

    @property
    def vulnerable(self) -> frozenset[str]:
        return self.universe - self.union


@dataclass(frozen=True)
class SecurityReport:
    sc: Fraction
    covered: int
    vulnerable: int
    per_assertion: dict[str, Fraction] = field(default_factory=dict)


def _check_assertion(netlist: Netlist, assertion_net: str) -> None:
    if assertion_net not in netlist.assert_outs:
        raise CoverageError(f"unknown assertion net {assertion_net!r}")


def structural_coverage(netlist: Netlist, assertion_net: str) -> set[str]:
    _check_assertion(netlist, assertion_net)
    return transitive_fanin_of_net(netlist, assertion_net)


def _cone_netlist(netlist: Netlist, cone: set[str], net: str) -> Netlist:
    instances = {i: inst for i, inst in netlist.instances.items() if i in cone}
    return Netlist(instances, netlist.inputs, (), netlist.clock, (net,))


def _stimulus_chunks(n_inputs: int, depth: int, budget: int, seed: int):
    """Yield stimulus arrays of shape (depth, n_inputs, lanes)."""
    if is_exhaustive(n_inputs, depth, budget):
        total = 1 << (n_inputs * depth)
        if total <= CHUNK:
            yield exhaustive_stimulus(n_inputs, depth)
            return
        for start in range(0, total, CHUNK):
            lanes = np.arange(start, start + CHUNK, dtype=np.int64)
            out = np.empty((depth, n_inputs, CHUNK), dtype=bool)
            for t in range(depth):
                for i in range(n_inputs):
                    out[t, i] = (lanes >> (t * n_inputs + i)) & 1
            yield out
        return
    rng = np.random.default_rng(seed)
    corners = np.zeros((depth, n_inputs, 2), dtype=bool)
    corners[:, :, 1] = True
    yield corners
    remaining = budget
    while remaining > 0:
        lanes = min(CHUNK, remaining)
        yield random_stimulus(n_inputs, depth, lanes, rng)
        remaining -= lanes


def is_exhaustive(n_inputs: int, depth: int, budget: int) -> bool:
    bits = n_inputs * depth
    return bits <= 62 and (1 << bits) <= min(budget, EXHAUSTIVE_LIMIT)


def _exact(
    netlist: Netlist,
    library: CellLibrary,
    assertion_net: str,
    unroll_depth: int,
    input_budget: int,
    seed: int,
) -> tuple[set[str], bool]:
    _check_assertion(netlist, assertion_net)
    if unroll_depth < 1:
        raise CoverageError("unroll_depth must be >= 1")
    if input_budget <= 0:
        raise CoverageError("input budget must be positive")
    cone = transitive_fanin_of_net(netlist, assertion_net)
    if not cone:
        return set(), False
    sub = _cone_netlist(netlist, cone, assertion_net)
    depth = unroll_depth if sub.flops else 1
    sim = FaultSimulator(sub, library)
    watch = sim.index[assertion_net]
    n_in = len(netlist.inputs)
    exhaustive = is_exhaustive(n_in, depth, input_budget)
    pending = sorted_ids(cone)
    found: set[str] = set()
    for stim in _stimulus_chunks(n_in, depth, input_budget, seed):
        trace = sim.golden(pack_lanes(stim))
        still = []
        for node in pending:
            if sim.detects(trace, node, watch):
                found.add(node)
            else:
                still.append(node)
        pending = still
        if not pending:
            break
    return found, not exhaustive


def exact_coverage(
    netlist: Netlist,
    library: CellLibrary,
    assertion_net: str,
    unroll_depth: int = DEFAULT_DEPTH,
    input_budget: int = DEFAULT_BUDGET,
    seed: int = 0,
) -> set[str]:
    return _exact(netlist, library, assertion_net, unroll_depth, input_budget, seed)[0]


def analyze_coverage(
    netlist: Netlist,
    library: CellLibrary | None = None,
    mode: str = STRUCTURAL,
    unroll_depth: int = DEFAULT_DEPTH,
    input_budget: int = DEFAULT_BUDGET,
    seed: int = 0,
) -> CoverageMap:
    """Coverage of every ``assert_out`` net in declaration order."""
    universe = frozenset(netlist.instances)
    covered: dict[str, frozenset[str]] = {}
    budgeted = False
    for net in netlist.assert_outs:
        if mode == STRUCTURAL:
            covered[net] = frozenset(structural_coverage(netlist, net))
        elif mode == EXACT:
            if library is None:
                raise CoverageError("exact coverage needs a cell library")
            ids, b = _exact(netlist, library, net, unroll_depth, input_budget, seed)
            covered[net] = frozenset(ids)
            budgeted |= b
        else:
            raise CoverageError(f"unknown coverage mode {mode!r}")
        log.debug("%s covers %d nodes", net, len(covered[net]))
    if mode == STRUCTURAL:
        return CoverageMap(covered, universe, mode)
    return CoverageMap(covered, universe, mode, unroll_depth, input_budget, budgeted)


def security_coverage(cmap: CoverageMap) -> SecurityReport:
    if not cmap.universe:
        raise CoverageError("empty universe")
    n = len(cmap.universe)
    union = cmap.union
    per = {net: Fraction(len(ids), n) for net, ids in cmap.covered.items()}
    return SecurityReport(Fraction(len(union), n), len(union), n - len(union), per)


def uncovered_nodes(cmap: CoverageMap) -> list[str]:
    return sorted_ids(cmap.vulnerable)


def coverage_report(cmap: CoverageMap) -> dict:
    """JSON-ready coverage report."""
    rep = security_coverage(cmap)
    out = {
        "mode": cmap.mode,
        "universe_size": len(cmap.universe),
        "per_assertion": {net: sorted_ids(ids) for net, ids in cmap.covered.items()},
        "covered": rep.covered,
        "vulnerable": rep.vulnerable,
        "sc_numerator": rep.covered,
        "sc_denominator": len(cmap.universe),
        "sc": float(rep.sc),
        "uncovered_nodes": uncovered_nodes(cmap),
    }
    if cmap.mode == EXACT:
        out["unroll_depth"] = cmap.unroll_depth
        out["input_budget"] = cmap.input_budget
        out["budgeted"] = cmap.budgeted
    return out
