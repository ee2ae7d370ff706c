"""Seeded netlist generators for tests and bundled fixtures."""

from __future__ import annotations

import random
from pathlib import Path

from .assertions import AssertionCandidate, bind_assertion
from .library import CLOCK_PIN
from .netlist import COMB_OUT, SEQ_OUT, Instance, Netlist, format_netlist

BINARY = ("AND2", "OR2", "XOR2", "NAND2", "NOR2", "XNOR2")
UNARY = ("INV", "BUF")


def random_netlist(rng: random.Random, n_gates: int, n_inputs: int, n_flops: int = 0,
                   n_asserts: int = 1, tie_prob: float = 0.05) -> Netlist:
    """Random DAG (plus flop feedback) with ``n_asserts`` assert_out nets."""
    inputs = [f"x{i}" for i in range(n_inputs)]
    clock = "clk" if n_flops else None
    flop_q = [f"q{k}" for k in range(n_flops)]
    avail = inputs + flop_q
    insts: list[Instance] = []
    for k in range(n_gates):
        r = rng.random()
        out = f"n{k}"
        if r < tie_prob or not avail:
            insts.append(Instance(f"g{k}", rng.choice(("TIE0", "TIE1")), (), out, COMB_OUT))
        elif r < 0.2:
            insts.append(Instance(f"g{k}", rng.choice(UNARY), (("A", rng.choice(avail)),), out, COMB_OUT))
        elif r < 0.27:
            a, b, s = (rng.choice(avail) for _ in range(3))
            insts.append(Instance(f"g{k}", "MUX2", (("A", a), ("B", b), ("S", s)), out, COMB_OUT))
        else:
            a, b = rng.choice(avail), rng.choice(avail)
            insts.append(Instance(f"g{k}", rng.choice(BINARY), (("A", a), ("B", b)), out, COMB_OUT))
        avail.append(out)
    gate_nets = [i.output for i in insts]
    for k, q in enumerate(flop_q):
        d = rng.choice(gate_nets or inputs)
        insts.append(Instance(f"f{k}", "DFF", (("D", d), (CLOCK_PIN, clock)), q, SEQ_OUT))
    used = {net for i in insts for _, net in i.pins}
    asserts = tuple(dict.fromkeys(rng.sample(gate_nets, min(n_asserts, len(gate_nets))))) if gate_nets else ()
    outputs = tuple(n for n in gate_nets if n not in used and n not in asserts)
    return Netlist({i.id: i for i in insts}, tuple(inputs), outputs, clock, asserts)


# -- medium fixture ------------------------------------------------------------

MEDIUM_SEED = 2024
MEDIUM_INPUTS = 24
MEDIUM_BLOCKS = 75
UNCOVERED_EVERY = 3  # every third block gets no checker
MEDIUM_REGISTERED = 0.35
MEDIUM_WINDOW = 12  # blocks read only from this many recent block outputs


def _tree_block(rng: random.Random, name: str, leaves: list[str]) -> list[Instance]:
    """Read-once tree over distinct leaves: every gate is sensitizable."""
    frontier = list(leaves)
    rng.shuffle(frontier)
    insts: list[Instance] = []
    k = 0
    while len(frontier) > 1 or not insts:
        if len(frontier) > 1:
            a, b = frontier.pop(), frontier.pop()
            pins = (("A", a), ("B", b))
            cell = rng.choice(BINARY)
        else:
            pins = (("A", frontier.pop()),)
            cell = "INV"
        out = f"{name}_n{k}"
        insts.append(Instance(f"{name}_g{k}", cell, pins, out, COMB_OUT))
        frontier.insert(0, out)
        k += 1
    return insts


def medium_fixture(seed: int = MEDIUM_SEED):
    """Base design plus one duplicate-compare checker per covered block.

    Returns ``(base, candidates)``. Each block is a read-once tree whose root
    optionally goes through a flip-flop; a checker recomputes the block from
    the same leaves (and register) and XORs the two results, so it never
    fires on a fault-free design.
    """
    rng = random.Random(seed)
    inputs = [f"x{i}" for i in range(MEDIUM_INPUTS)]
    insts: dict[str, Instance] = {}
    block_outs: list[str] = []
    candidates: list[AssertionCandidate] = []
    consumed: set[str] = set()
    for b in range(MEDIUM_BLOCKS):
        name = f"b{b}"
        n_leaves = rng.choice((3, 4, 4, 5, 6))
        pool = inputs + block_outs[-MEDIUM_WINDOW:]
        leaves = rng.sample(pool, min(n_leaves, len(pool)))
        consumed.update(leaves)
        block = _tree_block(rng, name, leaves)
        root = block[-1].output
        registered = rng.random() < MEDIUM_REGISTERED
        if registered:
            block.append(Instance(f"{name}_r", "DFF", (("D", root), (CLOCK_PIN, "clk")), f"{name}_q", SEQ_OUT))
        observed = block[-1].output
        for inst in block:
            insts[inst.id] = inst
        block_outs.append(observed)
        if b % UNCOVERED_EVERY != UNCOVERED_EVERY - 1:
            candidates.append(_checker(name, leaves, block, observed, registered))
    outputs = tuple(n for n in block_outs if n not in consumed)
    base = Netlist(insts, tuple(inputs), outputs, "clk", ())
    return base, candidates


def _checker(name: str, leaves: list[str], block: list[Instance], observed: str,
             registered: bool) -> AssertionCandidate:
    pins = {leaf: f"p{i}" for i, leaf in enumerate(leaves)}
    net_map = dict(pins)
    for inst in block:
        net_map[inst.output] = f"d_{inst.output}"
    dup = [inst.renamed(f"d_{inst.id}", {**net_map, "clk": "ck"}) for inst in block]
    vote = Instance("v", "XOR2", (("A", "obs"), ("B", net_map[observed])), "fire", COMB_OUT)
    checker = Netlist({i.id: i for i in dup + [vote]}, tuple(pins.values()) + ("obs",), (),
                      "ck" if registered else None, ("fire",))
    port_map = {pin: leaf for leaf, pin in pins.items()}
    port_map["obs"] = observed
    return AssertionCandidate(f"A_{name}", checker, port_map)


def medium_design(seed: int = MEDIUM_SEED) -> Netlist:
    base, candidates = medium_fixture(seed)
    design = base
    for cand in candidates:
        design = bind_assertion(design, cand)
    return design


def write_medium(directory: str | Path, seed: int = MEDIUM_SEED) -> list[Path]:
    """Write the base design, checker files, manifest and bound design."""
    out = Path(directory)
    (out / "checkers").mkdir(parents=True, exist_ok=True)
    base, candidates = medium_fixture(seed)
    paths = [out / "medium_base.net", out / "medium_candidates.txt", out / "medium.net"]
    paths[0].write_text(format_netlist(base), encoding="utf-8")
    lines = []
    for c in candidates:
        p = out / "checkers" / f"{c.name}.net"
        p.write_text(format_netlist(c.checker), encoding="utf-8")
        mapping = ",".join(f"{k}:{v}" for k, v in c.port_map.items())
        lines.append(f"assertion {c.name} file=checkers/{c.name}.net map={mapping}")
        paths.append(p)
    paths[1].write_text("\n".join(lines) + "\n", encoding="utf-8")
    paths[2].write_text(format_netlist(medium_design(seed)), encoding="utf-8")
    return paths
