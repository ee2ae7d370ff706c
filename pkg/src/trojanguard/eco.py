"""Incremental monitor insertion gated by a timing budget.

Monitors are tried one at a time in rank order. A round is kept when the
protected layout still meets timing (worst slack >= 0) and its total
positive slack has not dropped by more than the degrading-factor budget
relative to the last kept layout. The budget is fixed once from the
baseline: ``df_fraction * baseline TPS``. Slack degradation is measured over
the endpoints that existed before the round, so the new voter endpoint
cannot mask slack lost elsewhere; it still counts toward worst slack.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

from .errors import ConfigError, MonitorError, ToolError
from .layout import DEFAULT_WINDOW_H, DEFAULT_WINDOW_W, Infeasible, Layout, format_layout, insert_cells
from .library import CellLibrary
from .monitor import Monitor, MonitorCandidate, synthesize_monitor
from .netlist import Netlist
from .sta import TimingReport, compute_timing

log = logging.getLogger(__name__)

ACCEPTED = "accepted"
DISCARDED_TIMING = "discarded-timing"
DISCARDED_DENSITY = "discarded-density"
DENSITY = "Density"
TIMING = "Timing"


@dataclass(frozen=True)
class EcoConfig:
    df_fraction: float = 0.25
    max_rounds: int | None = None
    window_w: int = DEFAULT_WINDOW_W
    window_h: int = DEFAULT_WINDOW_H

    def __post_init__(self):
        if not 0 <= self.df_fraction <= 1:
            raise ConfigError("df_fraction must be in [0, 1]")


@dataclass(frozen=True)
class EcoRound:
    index: int
    root: str
    cone_size: int
    verdict: str
    tps_before: float
    tps_after: float
    tps_degradation: float
    wns_before: float
    wns_after: float
    sc_after: Fraction
    density_after: float
    snapshot: str
    added: tuple[str, ...] = ()

    def to_json(self) -> dict:
        d = asdict(self)
        d["sc_after"] = float(self.sc_after)
        d["sc_after_exact"] = f"{self.sc_after.numerator}/{self.sc_after.denominator}"
        d["added"] = list(self.added)
        return d


@dataclass
class EcoResult:
    rounds: list[EcoRound]
    netlist: Netlist
    layout: Layout
    preventing_factor: str
    baseline: TimingReport
    final_timing: TimingReport
    df_absolute: float
    covered: frozenset[str]
    universe: frozenset[str]
    sc_before: Fraction
    instances_before: int = 0
    monitors: list[Monitor] = field(default_factory=list)
    layouts: list[Layout] = field(default_factory=list)  # state after each round

    @property
    def sc_after(self) -> Fraction:
        return Fraction(len(self.covered), len(self.universe))

    @property
    def applied(self) -> int:
        return sum(r.verdict == ACCEPTED for r in self.rounds)

    @property
    def ignored(self) -> int:
        return len(self.rounds) - self.applied


def run_eco(
    netlist: Netlist,
    layout: Layout,
    ranked: list[MonitorCandidate],
    config: EcoConfig,
    library: CellLibrary,
    clock_period: float,
    covered: frozenset[str] | set[str],
) -> EcoResult:
    universe = frozenset(netlist.instances)
    covered = frozenset(covered) & universe
    base = compute_timing(netlist, layout, library, clock_period)
    sc_before = Fraction(len(covered), len(universe)) if universe else Fraction(0)
    result = EcoResult([], netlist, layout, TIMING, base, base, 0.0, covered, universe, sc_before,
                       len(universe))
    if base.tps <= 0:
        log.info("baseline has no positive slack; nothing to spend")
        return result
    df_abs = config.df_fraction * base.tps
    result.df_absolute = df_abs
    cur_nl, cur_lay, cur_t = netlist, layout, base
    any_timing = False
    for index, cand in enumerate(ranked, 1):
        if config.max_rounds is not None and index > config.max_rounds:
            break
        if cand.cone & covered:
            raise MonitorError(f"cone at {cand.root} overlaps nodes that are already covered")
        nl2, mon = synthesize_monitor(cur_nl, cand, library)
        cells = [(iid, library[cell].width) for iid, cell in mon.cells]
        lay2 = insert_cells(cur_lay, cells, cand.root, config.window_w, config.window_h)
        snap = f"Layout{index}"
        if isinstance(lay2, Infeasible):
            rnd = EcoRound(index, cand.root, cand.size, DISCARDED_DENSITY, cur_t.tps, cur_t.tps, 0.0,
                           cur_t.wns, cur_t.wns, Fraction(len(covered), len(universe)), cur_lay.density, snap)
            result.rounds.append(rnd)
            result.layouts.append(cur_lay)
            log.info("round %d %s %s (no room for %s)", index, cand.root, rnd.verdict, lay2.cell)
            continue
        t2 = compute_timing(nl2, lay2, library, clock_period)
        prev_ids = list(cur_t.endpoints)
        degradation = cur_t.tps_over(prev_ids) - t2.tps_over(prev_ids)
        ok = t2.wns >= 0 and degradation <= df_abs
        if ok:
            new_cov = covered | set(mon.covered_nodes)
            new_uni = universe | set(mon.added)
            verdict = ACCEPTED
        else:
            new_cov, new_uni = covered, universe
            verdict = DISCARDED_TIMING
            any_timing = True
        sc = Fraction(len(new_cov), len(new_uni))
        rnd = EcoRound(index, cand.root, cand.size, verdict, cur_t.tps, t2.tps, degradation, cur_t.wns, t2.wns,
                       sc, (lay2 if ok else cur_lay).density, snap, mon.added if ok else ())
        result.rounds.append(rnd)
        log.info("round %d %s %s wns=%.4f tps=%.4f sc=%.4f", index, cand.root, verdict, t2.wns, t2.tps, float(sc))
        if ok:
            cur_nl, cur_lay, cur_t = nl2, lay2, t2
            covered, universe = new_cov, new_uni
            result.monitors.append(mon)
        result.layouts.append(cur_lay)
    result.netlist, result.layout, result.final_timing = cur_nl, cur_lay, cur_t
    result.covered, result.universe = covered, universe
    result.preventing_factor = TIMING if any_timing else DENSITY
    return result


def emit_snapshots(result: EcoResult, directory: str | Path) -> list[Path]:
    """Write ``LayoutN.txt`` plus a ``LayoutN.json`` round sidecar per attempted candidate."""
    out = Path(directory)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ToolError(f"cannot create snapshot directory {out}: {exc}") from None
    paths = []
    for rnd, lay in zip(result.rounds, result.layouts):
        path = out / f"{rnd.snapshot}.txt"
        try:
            path.write_text(format_layout(lay), encoding="utf-8")
            (out / f"{rnd.snapshot}.json").write_text(json.dumps(rnd.to_json(), indent=2) + "\n", encoding="utf-8")
        except OSError as exc:
            raise ToolError(f"cannot write snapshot {path}: {exc}") from None
        paths.append(path)
    return paths


def table1_summary(result: EcoResult) -> dict:
    monitored = sum(len(m.covered_nodes) for m in result.monitors)
    return {
        "instances": result.instances_before,
        "sc_before": float(result.sc_before),
        "sc_total": float(result.sc_after),
        "sc_added": float(result.sc_after - result.sc_before),
        "nodes_covered_by_monitors": monitored,
        "applied_monitors": result.applied,
        "ignored_monitors": result.ignored,
        "total_monitors": len(result.rounds),
        "preventing_factor": result.preventing_factor,
    }
