"""Command-line driver.

Stages hand off through files in the output directory, so each one can be
rerun on its own. Every failure prints ``error: <kind>: <message>`` on
stderr and exits nonzero.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from fractions import Fraction
from pathlib import Path

from .assertions import read_manifest, select_assertions
from .attack import evaluate_detection, inject_trojan, place_trojan, read_trojan_specs
from .config import PipelineConfig, read_config
from .coverage import EXACT, STRUCTURAL, analyze_coverage, coverage_report, uncovered_nodes
from .eco import emit_snapshots, run_eco, table1_summary
from .errors import ConfigError, ToolError
from .layout import Infeasible, Layout, build_floorplan, format_layout, hpwl, insert_cells, place, read_layout
from .library import read_cell_library
from .monitor import ALERT_NET, add_alert_tree, find_candidate_cones, rank_candidates
from .netlist import Netlist, area_power_summary, format_netlist, read_netlist, sorted_ids, validate
from .sta import compute_timing, tune_clock_period

log = logging.getLogger("trojanguard")

EXIT_ERROR = 2
EXIT_DIAGNOSTICS = 1


class ValidationFailed(Exception):
    def __init__(self, diags):
        super().__init__(f"{len(diags)} diagnostic(s)")
        self.diags = diags


# -- output helpers ----------------------------------------------------------

def _write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


def _write_json(path: Path, obj) -> Path:
    return _write(path, json.dumps(obj, indent=2) + "\n")


def _write_csv(path: Path, header: list[str], rows: list[list]) -> Path:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return _write(path, buf.getvalue())


def _frac(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def _pct(after: float, before: float) -> float:
    return 100.0 * (after - before) / before if before else 0.0


# -- loading -----------------------------------------------------------------

def _load(cfg: PipelineConfig, netlist_path: Path | None = None):
    path = netlist_path or cfg.netlist
    if path is None:
        raise ConfigError("no netlist given (positional argument or 'netlist' in the config)")
    if not Path(path).exists():
        raise ConfigError(f"netlist path {path} does not exist")
    lib = read_cell_library(cfg.library_path)
    nl = read_netlist(path)
    diags = validate(nl, lib)
    if diags:
        raise ValidationFailed(diags)
    return lib, nl


def _coverage(cfg: PipelineConfig, nl: Netlist, lib, mode: str | None = None):
    return analyze_coverage(nl, lib, mode or cfg.coverage_mode, cfg.unroll_depth, cfg.input_budget, cfg.seed)


def _placed_layout(cfg: PipelineConfig, nl: Netlist, lib, layout_path: Path | None) -> Layout:
    if layout_path is not None:
        lay = read_layout(layout_path)
        missing = [i for i in nl.instances if i not in lay.placements]
        if missing:
            raise ToolError(f"layout does not place {sorted_ids(missing)[:5]}")
        return lay
    return place(nl, build_floorplan(nl, lib, cfg.target_density), lib, cfg.gap_quantum)


# -- subcommands -------------------------------------------------------------

def cmd_parse(cfg: PipelineConfig, args) -> int:
    lib, nl = _load(cfg, args.netlist)
    res = area_power_summary(nl, lib)
    summary = {
        "instances": len(nl.instances),
        "nets": len(nl.nets),
        "inputs": len(nl.inputs),
        "outputs": len(nl.outputs),
        "assert_outs": list(nl.assert_outs),
        "flops": len(nl.flops),
        "clock": nl.clock,
        "area": float(res.area),
        "power": float(res.power),
    }
    _write_json(cfg.out / "parse.json", summary)
    _write(cfg.out / "netlist.net", format_netlist(nl))
    print(json.dumps(summary))
    return 0


def cmd_coverage(cfg: PipelineConfig, args) -> int:
    lib, nl = _load(cfg, args.netlist)
    modes = [STRUCTURAL, EXACT] if args.mode == "both" else [args.mode or cfg.coverage_mode]
    maps = {}
    for mode in modes:
        cmap = _coverage(cfg, nl, lib, mode)
        maps[mode] = cmap
        rep = coverage_report(cmap) if nl.instances else {"mode": mode, "universe_size": 0}
        _write_json(cfg.out / f"coverage_{mode}.json", rep)
        print(f"{mode}: SC = {rep.get('sc_numerator', 0)}/{rep.get('sc_denominator', 0)}")
    primary = maps.get(EXACT) or maps[modes[0]]
    _write(cfg.out / "uncovered.txt", "".join(f"{n}\n" for n in uncovered_nodes(primary)))
    if len(maps) == 2:
        s, e = maps[STRUCTURAL], maps[EXACT]
        diff = {net: sorted_ids(s.covered[net] - e.covered[net]) for net in nl.assert_outs}
        diff = {k: v for k, v in diff.items() if v}
        lines = [f"{net} {node}" for net, nodes in diff.items() for node in nodes]
        _write(cfg.out / "coverage_diff.txt", "".join(f"{ln}\n" for ln in lines))
        print(f"structural-only nodes: {len(lines)}")
    return 0


def cmd_select(cfg: PipelineConfig, args) -> int:
    lib, nl = _load(cfg, args.netlist)
    manifest = args.manifest or cfg.manifest
    if manifest is None:
        raise ConfigError("no candidate manifest given")
    cands = read_manifest(manifest)
    clock = cfg.clock_period or tune_clock_period(nl, None, lib)
    records: list[str] = []
    handler = _ListHandler(records)
    sel_log = logging.getLogger("trojanguard.assertions")
    old_level, old_prop = sel_log.level, sel_log.propagate
    sel_log.addHandler(handler)
    sel_log.setLevel(logging.INFO)
    sel_log.propagate = False
    try:
        res = select_assertions(nl, cands, cfg.selection(), lib, clock, cfg.seed)
    finally:
        sel_log.removeHandler(handler)
        sel_log.setLevel(old_level)
        sel_log.propagate = old_prop
    out = {"clock": clock, "sc": float(res.sc), "sc_exact": _frac(res.sc), "satisfied": res.satisfied,
           "verdicts": res.verdicts()}
    _write_json(cfg.out / "verdicts.json", out)
    _write(cfg.out / "selected.net", format_netlist(res.netlist))
    _write(cfg.out / "select.log", "".join(f"{r}\n" for r in records))
    for r in records:
        print(r)
    return 0


def cmd_place(cfg: PipelineConfig, args) -> int:
    lib, nl = _load(cfg, args.netlist)
    lay = _placed_layout(cfg, nl, lib, None)
    clock = cfg.clock_period or tune_clock_period(nl, lay, lib)
    t = compute_timing(nl, lay, lib, clock)
    summary = {"rows": lay.rows, "sites": lay.sites, "density": lay.density,
               "density_exact": _frac(lay.density_fraction), "hpwl": hpwl(nl, lay), "clock": clock,
               "wns": t.wns, "tps": t.tps, "whs": t.whs}
    _write(cfg.out / "layout.txt", format_layout(lay))
    _write_json(cfg.out / "place.json", summary)
    _write_json(cfg.out / "timing.json", t.to_json())
    print(json.dumps(summary))
    return 0


def _metrics(nl: Netlist, lay: Layout, lib, timing) -> dict:
    res = area_power_summary(nl, lib)
    return {"area": float(res.area), "power": float(res.power), "density": lay.density,
            "hpwl": hpwl(nl, lay), "setup_slack": timing.wns, "hold_slack": timing.whs, "tps": timing.tps,
            "instances": len(nl.instances)}


def cmd_harden(cfg: PipelineConfig, args) -> int:
    lib, nl = _load(cfg, args.netlist)
    out = cfg.out
    cmap = _coverage(cfg, nl, lib)
    lay = _placed_layout(cfg, nl, lib, getattr(args, "layout", None))
    clock = cfg.clock_period or tune_clock_period(nl, lay, lib)
    ecfg = cfg.eco()
    cands = find_candidate_cones(nl, uncovered_nodes(cmap), lay, ecfg.window_w, ecfg.window_h)
    ranked = rank_candidates(cands)
    res = run_eco(nl, lay, ranked, ecfg, lib, clock, cmap.union)
    emit_snapshots(res, out / "snapshots")

    fires = [m.fire_net for m in res.monitors]
    final_nl, final_lay, alert_placed = res.netlist, res.layout, False
    if fires:
        with_alert, added = add_alert_tree(res.netlist, fires)
        cells = [(i.id, lib[i.cell].width) for i in added]
        placed = insert_cells(res.layout, cells, res.monitors[0].voter, res.layout.sites, res.layout.rows)
        if isinstance(placed, Infeasible):
            log.info("alert tree does not fit (%s); fire nets left as checker outputs", placed.cell)
        else:
            # new port on the right edge; existing pins stay where they are
            pin = (placed.core_width, placed.core_height / 2)
            final_nl, final_lay, alert_placed = with_alert, placed.with_pins({ALERT_NET: pin}), True
    base_t = res.baseline
    final_t = compute_timing(final_nl, final_lay, lib, clock)

    before = _metrics(nl, lay, lib, base_t)
    after = _metrics(final_nl, final_lay, lib, final_t)
    table2 = {k: {"before": before[k], "after": after[k], "delta_pct": _pct(after[k], before[k])} for k in before}
    t1 = table1_summary(res)
    t1["sc_before_exact"] = _frac(res.sc_before)
    t1["sc_total_exact"] = _frac(res.sc_after)
    t1["clock"] = clock
    t1["df_absolute"] = res.df_absolute
    t1["baseline_tps"] = base_t.tps
    t1["candidates"] = len(cands)
    t1["dropped_density"] = len(cands) - len(ranked)
    t1["alert_tree"] = alert_placed

    _write_json(out / "coverage.json", coverage_report(cmap))
    _write(out / "baseline_layout.txt", format_layout(lay))
    _write(out / "protected_layout.txt", format_layout(final_lay))
    _write(out / "protected.net", format_netlist(final_nl))
    _write_json(out / "candidates.json", [
        {"rank": c.rank, "root": c.root, "size": c.size, "free_sites": c.free_sites, "cone": sorted_ids(c.cone)}
        for c in ranked])
    _write_json(out / "rounds.json", [r.to_json() for r in res.rounds])
    _write_json(out / "monitors.json", [m.to_json() for m in res.monitors])
    _write_json(out / "timing_baseline.json", base_t.to_json())
    _write_json(out / "timing_final.json", final_t.to_json())
    _write_json(out / "table1.json", t1)
    _write_csv(out / "table1.csv",
               ["instances", "sc_before", "sc_total", "sc_added", "nodes_covered_by_monitors", "applied_monitors",
                "ignored_monitors", "total_monitors", "preventing_factor"],
               [[t1["instances"], f"{t1['sc_before']:.6f}", f"{t1['sc_total']:.6f}", f"{t1['sc_added']:.6f}",
                 t1["nodes_covered_by_monitors"], t1["applied_monitors"], t1["ignored_monitors"],
                 t1["total_monitors"], t1["preventing_factor"]]])
    _write_json(out / "table2.json", table2)
    _write_csv(out / "table2.csv", ["metric", "before", "after", "delta_pct"],
               [[k, f"{v['before']:.6f}", f"{v['after']:.6f}", f"{v['delta_pct']:.4f}"] for k, v in table2.items()])
    lines = [f"round {r.index} root={r.root} {r.verdict} wns={r.wns_after:.6f} tps={r.tps_after:.6f} "
             f"sc={float(r.sc_after):.6f}" for r in res.rounds]
    lines.append(f"done applied={res.applied} ignored={res.ignored} preventing_factor={res.preventing_factor}")
    _write(out / "eco.log", "".join(f"{ln}\n" for ln in lines))
    for ln in lines:
        print(ln)
    return 0


def cmd_attack(cfg: PipelineConfig, args) -> int:
    lib, nl = _load(cfg, args.netlist)
    specs_path = args.trojans or cfg.trojans
    if specs_path is None:
        raise ConfigError("no trojan spec file given")
    specs = read_trojan_specs(specs_path)
    kw = dict(stimulus_budget=cfg.detection_budget, seed=cfg.seed, exhaustive=cfg.exhaustive,
              depth=cfg.unroll_depth)
    clean = evaluate_detection(nl, None, lib, **kw)
    lay = read_layout(args.layout) if getattr(args, "layout", None) else None
    campaign = []
    for spec in specs:
        entry = {"target": spec.target, "trigger": [f"{n}:{v}" for n, v in spec.trigger], "arm": spec.arm,
                 "activation_probability": spec.activation_probability}
        try:
            rep = evaluate_detection(nl, spec, lib, **kw)
        except ToolError as exc:
            entry["refused"] = str(exc)
            campaign.append(entry)
            print(f"{spec.target}: refused ({exc})")
            continue
        entry.update(rep.to_json())
        if lay is not None and cfg.place_trojans:
            inj = inject_trojan(nl, spec, lib)
            entry["placed"] = not isinstance(place_trojan(lay, inj, lib, spec.target), Infeasible)
        campaign.append(entry)
        rate = rep.detection_rate
        print(f"{spec.target}: activations={rep.activations} detected={rep.detected_corruptions}/"
              f"{rep.corrupting_activations} rate={'n/a' if rate is None else f'{rate:.4f}'}")
    print(f"clean run: false_positives={clean.false_positives} over {clean.stimuli} cycles")
    _write_json(cfg.out / "attack.json", {"clean": clean.to_json(), "campaign": campaign})
    cols = ["target", "activations", "corrupting_activations", "detected_corruptions", "detection_rate",
            "false_positives", "refused"]
    _write_csv(cfg.out / "attack.csv", cols, [[e.get(c, "") if e.get(c) is not None else "" for c in cols]
                                              for e in campaign])
    return 0


def cmd_report(cfg: PipelineConfig, args) -> int:
    from .plotting import plot_eco_rounds, plot_occupancy, plot_table2

    src = Path(args.harden_dir)
    try:
        t1 = json.loads((src / "table1.json").read_text(encoding="utf-8"))
        t2 = json.loads((src / "table2.json").read_text(encoding="utf-8"))
        rounds = json.loads((src / "rounds.json").read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"{src} is not a harden output directory: {exc.strerror}") from None
    base = read_layout(src / "baseline_layout.txt")
    final = read_layout(src / "protected_layout.txt")
    fig_dir = cfg.out / "figures"
    fig_dir.mkdir(parents=True, exist_ok=True)
    paths = [
        plot_eco_rounds(rounds, t1["baseline_tps"], t2["setup_slack"]["before"], t1["sc_before"],
                        t1["df_absolute"], fig_dir / "eco_rounds.png"),
        plot_table2({k: v["delta_pct"] for k, v in t2.items() if k != "instances"}, fig_dir / "table2.png"),
        plot_occupancy(final, set(final.placements) - set(base.placements), fig_dir / "occupancy.png"),
    ]
    _write_csv(cfg.out / "rounds.csv",
               ["index", "root", "cone_size", "verdict", "tps_before", "tps_after", "tps_degradation", "wns_after",
                "sc_after", "density_after"],
               [[r["index"], r["root"], r["cone_size"], r["verdict"], f"{r['tps_before']:.6f}",
                 f"{r['tps_after']:.6f}", f"{r['tps_degradation']:.6f}", f"{r['wns_after']:.6f}",
                 f"{r['sc_after']:.6f}", f"{r['density_after']:.6f}"] for r in rounds])
    for p in paths:
        print(p.name)
    return 0


class _ListHandler(logging.Handler):
    def __init__(self, sink: list[str]):
        super().__init__(logging.INFO)
        self.sink = sink

    def emit(self, record):
        self.sink.append(record.getMessage())


# -- argument parsing --------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=argparse.SUPPRESS, help="flat key=value config file")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--out", type=Path, default=argparse.SUPPRESS, help="output directory")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    p = argparse.ArgumentParser(prog="trojanguard", parents=[common],
                                description="Assertion selection, coverage analysis and monitor hardening.")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.set_defaults(func=func)
        return sp

    sp = add("parse", cmd_parse, "parse and validate a netlist")
    sp.add_argument("netlist", type=Path, nargs="?")
    sp = add("coverage", cmd_coverage, "security coverage of every assert_out")
    sp.add_argument("netlist", type=Path, nargs="?")
    sp.add_argument("--mode", choices=[STRUCTURAL, EXACT, "both"])
    sp = add("select", cmd_select, "run the assertion selection loop")
    sp.add_argument("netlist", type=Path, nargs="?")
    sp.add_argument("--manifest", type=Path)
    sp = add("place", cmd_place, "floorplan, place and time a netlist")
    sp.add_argument("netlist", type=Path, nargs="?")
    sp = add("harden", cmd_harden, "insert monitors into layout gaps under the timing budget")
    sp.add_argument("netlist", type=Path, nargs="?")
    sp.add_argument("--layout", type=Path, help="existing placement (default: place from scratch)")
    sp = add("attack", cmd_attack, "inject trojans and measure detection")
    sp.add_argument("netlist", type=Path, nargs="?")
    sp.add_argument("--trojans", type=Path)
    sp.add_argument("--layout", type=Path, help="protected layout, used with place_trojans")
    sp = add("report", cmd_report, "render figures and CSV from a harden output directory")
    sp.add_argument("harden_dir", type=Path)
    return p


def _resolve_config(args) -> PipelineConfig:
    cfg = read_config(args.config) if getattr(args, "config", None) else PipelineConfig()
    cfg = cfg.with_overrides(seed=getattr(args, "seed", None), out=getattr(args, "out", None))
    cfg.check_paths()
    return cfg


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = _resolve_config(args)
        return args.func(cfg, args)
    except ValidationFailed as exc:
        for d in exc.diags:
            print(f"error: validation: {d}", file=sys.stderr)
        return EXIT_DIAGNOSTICS
    except ToolError as exc:
        print(f"error: {exc.kind}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: io: {exc.strerror or exc}: {exc.filename or ''}".rstrip(": "), file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
