"""Binding pre-synthesized checkers to a design and the assertion selection loop.

Candidates are taken in manifest order. Each one is bound, its overheads are
measured against the design with the already accepted checkers, its coverage
gain is computed, and it is kept or rejected. Rejections are verdicts, not errors.
"""

from __future__ import annotations

import logging
import shlex
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

from .coverage import DEFAULT_BUDGET, DEFAULT_DEPTH, EXACT, STRUCTURAL, _exact, structural_coverage
from .errors import BindError, ConfigError, NetlistError, TimingError
from .library import CellLibrary
from .netlist import Netlist, area_power_summary, read_netlist
from .sta import compute_timing

log = logging.getLogger(__name__)

CANDIDATE = "candidate"
ACCEPTED = "accepted"
REJECTED_OVERHEAD = "rejected-overhead"
REJECTED_SC = "rejected-sc"
PER_ASSERTION = "per-assertion"
DESIGN_TOTAL = "design-total"


@dataclass(frozen=True)
class AssertionCandidate:
    name: str
    checker: Netlist
    port_map: dict[str, str]
    status: str = CANDIDATE

    @property
    def prefix(self) -> str:
        return f"{self.name}."


@dataclass(frozen=True)
class SelectionConfig:
    max_area: float = 0.20
    max_power: float = 0.20
    min_sc_gain: float = 0.0
    sc_target: float | None = None
    basis: str = PER_ASSERTION
    coverage_mode: str = STRUCTURAL
    unroll_depth: int = DEFAULT_DEPTH
    input_budget: int = DEFAULT_BUDGET

    def __post_init__(self):
        for name in ("max_area", "max_power", "min_sc_gain"):
            if not 0 <= getattr(self, name) <= 1:
                raise ConfigError(f"{name} must be in [0, 1]")
        if self.sc_target is not None and not 0 <= self.sc_target <= 1:
            raise ConfigError("sc_target must be in [0, 1]")
        if self.basis not in (PER_ASSERTION, DESIGN_TOTAL):
            raise ConfigError(f"unknown decision basis {self.basis!r}")
        if self.coverage_mode not in (STRUCTURAL, EXACT):
            raise ConfigError(f"unknown coverage mode {self.coverage_mode!r}")


@dataclass(frozen=True)
class CandidateReport:
    name: str
    area_delta: float  # incremental, relative to the netlist without this candidate
    power_delta: float
    wns_delta: float
    sc_gain: Fraction
    area_overhead: float = 0.0  # cumulative, relative to the bare design
    power_overhead: float = 0.0
    wns_after: float = 0.0
    sc_after: Fraction = Fraction(0)

    def deltas(self) -> dict:
        return {
            "area": self.area_delta,
            "power": self.power_delta,
            "wns": self.wns_delta,
            "area_overhead": self.area_overhead,
            "power_overhead": self.power_overhead,
        }


@dataclass
class SelectionResult:
    netlist: Netlist
    candidates: list[AssertionCandidate]
    reports: dict[str, CandidateReport] = field(default_factory=dict)
    satisfied: bool = False
    sc: Fraction = Fraction(0)

    def verdicts(self) -> list[dict]:
        out = []
        for c in self.candidates:
            rep = self.reports.get(c.name)
            out.append({
                "name": c.name,
                "status": c.status,
                "deltas": rep.deltas() if rep else None,
                "sc_gain": float(rep.sc_gain) if rep else None,
                "sc_gain_exact": f"{rep.sc_gain.numerator}/{rep.sc_gain.denominator}" if rep else None,
            })
        return out


# -- manifest ----------------------------------------------------------------

def parse_manifest(text: str, base_dir: str | Path = ".") -> list[AssertionCandidate]:
    """``assertion <name> file=<path> map=<pin:net,...>``; paths relative to ``base_dir``."""
    base = Path(base_dir)
    out: list[AssertionCandidate] = []
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = shlex.split(line)
        if len(tokens) < 2 or tokens[0] != "assertion":
            raise ConfigError(f"manifest line {lineno}: expected 'assertion <name> file=... map=...'")
        name = tokens[1]
        if name in seen:
            raise ConfigError(f"manifest line {lineno}: duplicate assertion {name!r}")
        seen.add(name)
        fields = dict(t.split("=", 1) for t in tokens[2:] if "=" in t)
        if "file" not in fields:
            raise ConfigError(f"manifest line {lineno}: missing file=")
        port_map = {}
        for pair in filter(None, fields.get("map", "").split(",")):
            pin, sep, net = pair.partition(":")
            if not sep or not pin or not net:
                raise ConfigError(f"manifest line {lineno}: bad map entry {pair!r}")
            port_map[pin] = net
        path = Path(fields["file"])
        if not path.is_absolute():
            path = base / path
        try:
            checker = read_netlist(path)
        except OSError as exc:
            raise ConfigError(f"manifest line {lineno}: cannot read {path}: {exc.strerror}") from None
        out.append(AssertionCandidate(name, checker, port_map))
    return out


def read_manifest(path: str | Path) -> list[AssertionCandidate]:
    path = Path(path)
    return parse_manifest(path.read_text(encoding="utf-8"), path.parent)


# -- binding -----------------------------------------------------------------

def bind_assertion(design: Netlist, candidate: AssertionCandidate) -> Netlist:
    checker = candidate.checker
    if not checker.instances:
        return design
    if len(checker.assert_outs) != 1:
        raise BindError(f"{candidate.name}: checker must have exactly one assert_out, has {len(checker.assert_outs)}")
    for pin in checker.inputs:
        if pin not in candidate.port_map:
            raise BindError(f"{candidate.name}: checker input {pin!r} is not mapped")
    for pin, net in candidate.port_map.items():
        if pin not in checker.inputs:
            raise BindError(f"{candidate.name}: map names unknown checker input {pin!r}")
        if net not in design.driver:
            raise BindError(f"{candidate.name}: unresolved port {pin!r}: design has no net {net!r}")
    net_map = dict(candidate.port_map)
    if checker.clock is not None:
        if design.clock is None:
            raise BindError(f"{candidate.name}: registered checker needs a clocked design")
        net_map[checker.clock] = design.clock
    pre = candidate.prefix
    for inst in checker.instances.values():
        net_map.setdefault(inst.output, pre + inst.output)
    new = []
    for inst in checker.instances.values():
        nid = pre + inst.id
        if nid in design.instances:
            raise BindError(f"{candidate.name}: instance {nid!r} already exists")
        if inst.output in net_map and net_map[inst.output] in design.driver:
            raise BindError(f"{candidate.name}: net {net_map[inst.output]!r} already exists")
        new.append(inst.renamed(nid, net_map))
    fire = net_map.get(checker.assert_outs[0])
    if fire is None or fire in candidate.port_map.values():
        raise BindError(f"{candidate.name}: fire output must be driven by checker logic")
    try:
        bound = design.extended(new, assert_outs=(fire,))
        _ = bound.topo_order
    except NetlistError as exc:
        raise BindError(f"{candidate.name}: {exc}") from None
    return bound


def strip_assertions(netlist: Netlist, names) -> Netlist:
    """Remove every instance and fire net bound under any of ``names``."""
    prefixes = tuple(f"{n}." for n in names)
    if not prefixes:
        return netlist
    keep = {i: inst for i, inst in netlist.instances.items() if not i.startswith(prefixes)}
    if len(keep) == len(netlist.instances):
        return netlist
    asserts = tuple(n for n in netlist.assert_outs if not n.startswith(prefixes))
    return netlist.replaced(keep, assert_outs=asserts)


# -- evaluation --------------------------------------------------------------

class _CoverageCache:
    """Per-assert-net coverage; binding a checker never changes an existing cone."""

    def __init__(self, library: CellLibrary, config: SelectionConfig, seed: int = 0):
        self.library = library
        self.config = config
        self.seed = seed
        self._sets: dict[str, frozenset[str]] = {}

    def union(self, netlist: Netlist) -> set[str]:
        out: set[str] = set()
        for net in netlist.assert_outs:
            if net not in self._sets:
                if self.config.coverage_mode == STRUCTURAL:
                    ids = structural_coverage(netlist, net)
                else:
                    ids, _ = _exact(netlist, self.library, net, self.config.unroll_depth,
                                    self.config.input_budget, self.seed)
                self._sets[net] = frozenset(ids)
            out |= self._sets[net]
        return out


def _rel(after: Fraction, before: Fraction) -> float:
    return float((after - before) / before) if before else 0.0


def _wns(netlist: Netlist, library: CellLibrary, clock_period: float) -> float:
    return compute_timing(netlist, None, library, clock_period).wns


def evaluate_candidate(design: Netlist, candidate: AssertionCandidate, library: CellLibrary,
                       clock_period: float, baseline: Netlist | None = None,
                       config: SelectionConfig | None = None, _cache: _CoverageCache | None = None) -> CandidateReport:
    """Overheads and SC gain of adding ``candidate`` on top of ``design``.

    ``baseline`` (default ``design``) is the bare design used for the
    cumulative overhead figures.
    """
    config = config or SelectionConfig()
    cache = _cache or _CoverageCache(library, config)
    baseline = design if baseline is None else baseline
    with_c = bind_assertion(design, candidate)
    before = area_power_summary(design, library)
    after = area_power_summary(with_c, library)
    bare = area_power_summary(baseline, library)
    try:
        wns_before = _wns(design, library, clock_period)
        wns_after = _wns(with_c, library, clock_period)
    except TimingError as exc:
        raise TimingError(f"{candidate.name}: {exc}") from None
    cov_before = cache.union(design)
    cov_after = cache.union(with_c)
    n = len(with_c.instances)
    gain = Fraction(len(cov_after) - len(cov_before), n) if n else Fraction(0)
    return CandidateReport(
        name=candidate.name,
        area_delta=_rel(after.area, before.area),
        power_delta=_rel(after.power, before.power),
        wns_delta=wns_after - wns_before,
        sc_gain=gain,
        area_overhead=_rel(after.area, bare.area),
        power_overhead=_rel(after.power, bare.power),
        wns_after=wns_after,
        sc_after=Fraction(len(cov_after), n) if n else Fraction(0),
    )


def select_assertions(design: Netlist, candidates: list[AssertionCandidate], config: SelectionConfig,
                      library: CellLibrary, clock_period: float, seed: int = 0) -> SelectionResult:
    """Process candidates once each, in order, and bind the ones that pass.

    Candidates already bound in ``design`` are stripped first so a rerun on
    the loop's own output reproduces the same result.
    """
    bare = strip_assertions(design, [c.name for c in candidates])
    cache = _CoverageCache(library, config, seed)
    current = bare
    n0 = len(current.instances)
    sc = Fraction(len(cache.union(current)), n0) if n0 else Fraction(0)
    result = SelectionResult(current, [], sc=sc)
    pending = list(candidates)
    satisfied = False
    for idx, cand in enumerate(pending):
        if config.basis == DESIGN_TOTAL and config.sc_target is not None and sc >= Fraction(config.sc_target).limit_denominator(10**9):
            log.info("SC target %.4f satisfied at %.4f; %d candidate(s) left unprocessed",
                     config.sc_target, float(sc), len(pending) - idx)
            satisfied = True
            result.candidates.extend(replace(c, status=CANDIDATE) for c in pending[idx:])
            break
        rep = evaluate_candidate(current, cand, library, clock_period, bare, config, cache)
        result.reports[cand.name] = rep
        overhead_ok = (rep.area_delta <= config.max_area + 1e-12
                       and rep.power_delta <= config.max_power + 1e-12
                       and rep.wns_after >= 0)
        if config.basis == PER_ASSERTION:
            sc_ok = rep.sc_gain >= Fraction(config.min_sc_gain).limit_denominator(10**9) if config.min_sc_gain > 0 else True
        else:
            sc_ok = rep.sc_gain > 0
        if not overhead_ok:
            status = REJECTED_OVERHEAD
        elif not sc_ok:
            status = REJECTED_SC
        else:
            status = ACCEPTED
            current = bind_assertion(current, cand)
            sc = rep.sc_after
        log.info("assertion %s %s area=%+.4f power=%+.4f wns=%+.4f gain=%.4f sc=%.4f", cand.name, status,
                 rep.area_delta, rep.power_delta, rep.wns_delta, float(rep.sc_gain), float(sc))
        result.candidates.append(replace(cand, status=status))
    else:
        if config.basis == DESIGN_TOTAL and config.sc_target is not None:
            satisfied = sc >= Fraction(config.sc_target).limit_denominator(10**9)
            if satisfied:
                log.info("SC target %.4f satisfied at %.4f", config.sc_target, float(sc))
            else:
                log.info("candidate list exhausted at SC %.4f below target %.4f", float(sc), config.sc_target)
    result.netlist = current
    result.satisfied = satisfied
    result.sc = sc
    return result
