"""Additive hardware-trojan injection and runtime detection measurement.

A trojan flips one instance output while its trigger holds. The trigger is
an AND tree over (net, value) literals, optionally gated by an arming shift
register that goes high after ``arm`` clock cycles. A random trigger with
``n`` literals fires with probability ``2**-n`` per cycle.

Detection is measured with paired simulation: the clean and attacked
netlists see identical stimulus, so every divergence is caused by the
payload.
"""

from __future__ import annotations

import logging
import shlex
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .coverage import is_exhaustive
from .errors import NetlistError, TrojanError
from .layout import Infeasible, Layout, insert_cells
from .library import CLOCK_PIN, CellLibrary
from .monitor import ALERT_NET, alert_nets
from .netlist import COMB_OUT, SEQ_OUT, Instance, Netlist, transitive_fanin_of_net, validate
from .sim import Simulator, exhaustive_stimulus, random_stimulus

log = logging.getLogger(__name__)

DEFAULT_LANES = 1000
MAX_LATENCY = 3


@dataclass(frozen=True)
class TrojanSpec:
    target: str
    trigger: tuple[tuple[str, int], ...] = ()
    arm: int = 0

    @property
    def activation_probability(self) -> float:
        return 2.0 ** -len(self.trigger)


@dataclass(frozen=True)
class Injection:
    netlist: Netlist
    trigger_net: str
    payload: str
    trojan_instances: tuple[str, ...]

    @property
    def footprint(self) -> int:
        """Trigger-logic instance count (payload XOR excluded)."""
        return len(self.trojan_instances) - 1


@dataclass
class DetectionReport:
    target: str
    stimuli: int = 0
    activations: int = 0
    corrupting_activations: int = 0
    detections: int = 0
    detected_corruptions: int = 0
    false_positives: int = 0
    latency_histogram: dict[int, int] = field(default_factory=dict)
    exhaustive: bool = False

    @property
    def detection_rate(self) -> float | None:
        if not self.corrupting_activations:
            return None
        return self.detected_corruptions / self.corrupting_activations

    def to_json(self) -> dict:
        return {
            "target": self.target,
            "stimuli": self.stimuli,
            "activations": self.activations,
            "corrupting_activations": self.corrupting_activations,
            "detections": self.detections,
            "detected_corruptions": self.detected_corruptions,
            "detection_rate": self.detection_rate,
            "false_positives": self.false_positives,
            "latency_histogram": {str(k): v for k, v in sorted(self.latency_histogram.items())},
            "exhaustive": self.exhaustive,
        }


def parse_trojan_specs(text: str) -> list[TrojanSpec]:
    specs = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = shlex.split(line)
        if tokens[0] != "trojan":
            raise TrojanError(f"line {lineno}: expected 'trojan target=... trigger=... arm=...'")
        fields = dict(t.split("=", 1) for t in tokens[1:] if "=" in t)
        if "target" not in fields:
            raise TrojanError(f"line {lineno}: missing target")
        lits = []
        for lit in filter(None, fields.get("trigger", "").split(",")):
            net, _, val = lit.partition(":")
            if val not in ("0", "1"):
                raise TrojanError(f"line {lineno}: trigger literal {lit!r} needs value 0 or 1")
            lits.append((net, int(val)))
        try:
            arm = int(fields.get("arm", "0"))
        except ValueError:
            raise TrojanError(f"line {lineno}: arm must be an integer") from None
        specs.append(TrojanSpec(fields["target"], tuple(lits), arm))
    return specs


def read_trojan_specs(path: str | Path) -> list[TrojanSpec]:
    return parse_trojan_specs(Path(path).read_text(encoding="utf-8"))


def checker_logic(netlist: Netlist) -> set[str]:
    """Instances that feed only checker/monitor outputs, never functional ones."""
    functional: set[str] = set()
    for net in netlist.outputs:
        if net != ALERT_NET:
            functional |= transitive_fanin_of_net(netlist, net)
    return set(netlist.instances) - functional


def _fresh(name: str, taken: set[str]) -> str:
    k = 0
    cand = name
    while cand in taken:
        k += 1
        cand = f"{name}_{k}"
    return cand


def inject_trojan(netlist: Netlist, spec: TrojanSpec, library: CellLibrary | None = None) -> Injection:
    if spec.target not in netlist.instances:
        raise TrojanError(f"unknown target {spec.target!r}")
    if spec.target in checker_logic(netlist):
        raise TrojanError(f"target {spec.target} is checker/monitor logic; refusing")
    for net, _ in spec.trigger:
        if net not in netlist.driver:
            raise TrojanError(f"trigger net {net!r} does not exist")
    if spec.arm < 0:
        raise TrojanError("arm delay must be >= 0")
    if spec.arm and netlist.clock is None:
        raise TrojanError("an arm delay needs a clocked design")

    ids = set(netlist.instances)
    nets = set(netlist.driver)
    target = netlist.instances[spec.target]
    victim = target.output
    pre = _fresh(f"{victim}__ht", nets)
    nets.add(pre)
    added: list[Instance] = []

    def new_inst(base: str, cell: str, pins, out_base: str, out_pin: str = COMB_OUT) -> str:
        iid = _fresh(base, ids)
        ids.add(iid)
        out = _fresh(out_base, nets)
        nets.add(out)
        added.append(Instance(iid, cell, tuple(pins), out, out_pin))
        return out

    literal_nets = []
    for k, (net, val) in enumerate(spec.trigger):
        src = pre if net == victim else net
        literal_nets.append(src if val else new_inst(f"HT_inv{k}", "INV", [("A", src)], f"ht_lit{k}"))
    if spec.arm:
        stage = new_inst("HT_arm_tie", "TIE1", [], "ht_one")
        for k in range(spec.arm):
            stage = new_inst(f"HT_arm{k}", "DFF", [("D", stage), (CLOCK_PIN, netlist.clock)], f"ht_arm{k}", SEQ_OUT)
        literal_nets.append(stage)
    if not literal_nets:
        literal_nets.append(new_inst("HT_on", "TIE1", [], "ht_on"))
    k = 0
    while len(literal_nets) > 1:
        nxt = [new_inst(f"HT_and{k + i}", "AND2", [("A", a), ("B", b)], f"ht_and{k + i}")
               for i, (a, b) in enumerate(zip(literal_nets[0::2], literal_nets[1::2]))]
        k += len(nxt)
        if len(literal_nets) % 2:
            nxt.append(literal_nets[-1])
        literal_nets = nxt
    trigger = literal_nets[0]
    payload = _fresh("HT_payload", ids)
    added.append(Instance(payload, "XOR2", (("A", pre), ("B", trigger)), victim, COMB_OUT))

    instances = {}
    for iid, inst in netlist.instances.items():
        if iid == spec.target:
            inst = Instance(inst.id, inst.cell, inst.pins, pre, inst.out_pin)
        instances[iid] = inst
    for inst in added:
        instances[inst.id] = inst
    try:
        attacked = netlist.replaced(instances)
        _ = attacked.topo_order
    except NetlistError as exc:
        raise TrojanError(f"trigger depends on the payload: {exc}") from None
    if library is not None:
        diags = validate(attacked, library)
        if diags:
            raise TrojanError(f"attacked netlist does not validate: {diags[0]}")
    return Injection(attacked, trigger, payload, tuple(i.id for i in added))


def _functional_nets(netlist: Netlist) -> list[str]:
    """Primary outputs (alert excluded) and flop data nets of the original design."""
    nets = [n for n in netlist.outputs if n != ALERT_NET]
    checker = checker_logic(netlist)
    for f in netlist.flops:
        if f not in checker:
            nets.append(netlist.instances[f].pin_map["D"])
    return list(dict.fromkeys(nets))


def _stimulus(n_inputs: int, depth: int, budget: int, seed: int, exhaustive: bool):
    if exhaustive:
        return exhaustive_stimulus(n_inputs, depth)
    lanes = min(DEFAULT_LANES, budget)
    cycles = max(1, budget // lanes)
    return random_stimulus(n_inputs, cycles, lanes, np.random.default_rng(seed))


def evaluate_detection(
    protected: Netlist,
    spec: TrojanSpec | None,
    library: CellLibrary,
    stimulus_budget: int = 100_000,
    seed: int = 0,
    exhaustive: bool = False,
    depth: int = 3,
    max_latency: int = MAX_LATENCY,
) -> DetectionReport:
    """Paired clean/attacked simulation; ``spec=None`` measures a clean design only.

    Random mode splits the budget into independent lanes of equal length
    starting from the all-zero state. Exhaustive mode enumerates every input
    sequence of ``depth`` cycles (one cycle for combinational designs).
    """
    alerts = alert_nets(protected)
    if not alerts:
        raise TrojanError("protected netlist has no checker outputs")
    depth = depth if protected.flops else 1
    if exhaustive and not is_exhaustive(len(protected.inputs), depth, 1 << 20):
        raise TrojanError("input space too large for exhaustive detection")
    stim = _stimulus(len(protected.inputs), depth, stimulus_budget, seed, exhaustive)
    cycles, _, lanes = stim.shape
    clean_sim = Simulator(protected, library)
    functional = _functional_nets(protected)
    clean = clean_sim.run(stim, watch=alerts + functional)
    clean_alert = clean[:, : len(alerts)].any(axis=1)
    report = DetectionReport(spec.target if spec else "", stimuli=cycles * lanes, exhaustive=exhaustive)
    report.false_positives = int(clean_alert.sum())
    if spec is None:
        return report

    inj = inject_trojan(protected, spec, library)
    att = Simulator(inj.netlist, library).run(stim, watch=alerts + functional + [inj.trigger_net])
    att_alert = att[:, : len(alerts)].any(axis=1)
    corrupt = (att[:, len(alerts):-1] != clean[:, len(alerts):]).any(axis=1)
    active = att[:, -1]
    report.activations = int(active.sum())
    report.corrupting_activations = int((active & corrupt).sum())

    hist: Counter[int] = Counter()
    first_active = np.where(active.any(axis=0), active.argmax(axis=0), cycles)
    for lane in range(lanes):
        fa = first_active[lane]
        report.false_positives += int(att_alert[:fa, lane].sum())
        if fa == cycles:
            continue
        for t in np.flatnonzero(active[:, lane]):
            window = att_alert[t: t + max_latency + 1, lane]
            if window.any():
                lat = int(window.argmax())
                report.detections += 1
                hist[lat] += 1
                if corrupt[t, lane]:
                    report.detected_corruptions += 1
    report.latency_histogram = dict(hist)
    return report


def place_trojan(layout: Layout, injection: Injection, library: CellLibrary, anchor: str) -> Layout | Infeasible:
    """Try to fit the trojan cells into remaining gaps anywhere in the core."""
    cells = [(iid, library[injection.netlist.instances[iid].cell].width) for iid in injection.trojan_instances]
    return insert_cells(layout, cells, anchor, layout.sites, layout.rows)
