"""Two-valued, cycle-based logic simulation.

:class:`Simulator` evaluates many independent stimulus sequences at once:
every net holds a numpy bool vector with one lane per sequence. Flip-flops
sample their data input at the end of each cycle. Faults are modeled as
complement forcing on an instance output and can be applied to any set of
instances for the whole run.
"""

from __future__ import annotations

from typing import Iterable, Mapping, Sequence

import numpy as np

from .library import CellLibrary, evaluate
from .netlist import Netlist, transitive_fanout


class Simulator:
    def __init__(self, netlist: Netlist, library: CellLibrary):
        self.netlist = netlist
        self.index = {net: i for i, net in enumerate(netlist.nets)}
        self.inputs = [self.index[n] for n in netlist.inputs]
        self.clock = self.index[netlist.clock] if netlist.clock is not None else None
        order = netlist.topo_order
        self.flops: list[tuple[str, int, int]] = []
        self.ops: list[tuple[str, str, int, tuple[int, ...]]] = []
        for inst_id in order:
            inst = netlist.instances[inst_id]
            cell = library[inst.cell]
            if cell.is_sequential:
                self.flops.append((inst_id, self.index[inst.output], self.index[inst.pin_map["D"]]))
            else:
                ins = tuple(self.index[inst.pin_map[p]] for p in cell.inputs)
                self.ops.append((inst_id, cell.function, self.index[inst.output], ins))

    @property
    def n_inputs(self) -> int:
        return len(self.inputs)

    def run(
        self,
        stimulus: np.ndarray,
        initial_state: np.ndarray | None = None,
        flips: Iterable[str] = (),
        watch: Sequence[str] | None = None,
    ) -> np.ndarray:
        """Simulate ``stimulus`` of shape (cycles, n_inputs, lanes).

        Returns watched net values with shape (cycles, len(watch), lanes);
        all nets are returned when ``watch`` is None, in ``netlist.nets`` order.
        """
        stimulus = np.asarray(stimulus, dtype=bool)
        cycles, n_in, lanes = stimulus.shape
        if n_in != len(self.inputs):
            raise ValueError(f"stimulus has {n_in} inputs, netlist has {len(self.inputs)}")
        flips = frozenset(flips)
        watch_idx = (
            np.arange(len(self.index)) if watch is None else np.array([self.index[n] for n in watch], dtype=int)
        )
        vals = np.zeros((len(self.index), lanes), dtype=bool)
        state = np.zeros((len(self.flops), lanes), dtype=bool)
        if initial_state is not None:
            init = np.asarray(initial_state, dtype=bool)
            state[:] = init.reshape(len(self.flops), -1)
        out = np.empty((cycles, len(watch_idx), lanes), dtype=bool)
        for t in range(cycles):
            vals[self.inputs] = stimulus[t]
            for k, (inst_id, q, _) in enumerate(self.flops):
                vals[q] = ~state[k] if inst_id in flips else state[k]
            for inst_id, fn, o, ins in self.ops:
                v = evaluate(fn, [vals[i] for i in ins])
                vals[o] = v
                if inst_id in flips:
                    vals[o] = ~vals[o]
            out[t] = vals[watch_idx]
            for k, (_, _, d) in enumerate(self.flops):
                state[k] = vals[d]
        return out


def simulate(
    netlist: Netlist,
    library: CellLibrary,
    stimulus: Sequence[Sequence[int] | Mapping[str, int]],
    initial_state: Mapping[str, int] | None = None,
) -> list[dict[str, int]]:
    """Single-lane convenience wrapper returning per-cycle net values."""
    sim = Simulator(netlist, library)
    vecs = []
    for vec in stimulus:
        if isinstance(vec, Mapping):
            vec = [vec[n] for n in netlist.inputs]
        if len(vec) != sim.n_inputs:
            raise ValueError(f"vector {list(vec)} does not match {sim.n_inputs} primary inputs")
        vecs.append([[bool(v)] for v in vec])
    arr = np.array(vecs, dtype=bool).reshape(len(vecs), sim.n_inputs, 1)
    init = None
    if initial_state is not None:
        init = np.array([[bool(initial_state.get(f, 0))] for f, _, _ in sim.flops], dtype=bool)
    trace = sim.run(arr, init)
    nets = netlist.nets
    return [{n: int(trace[t, i, 0]) for i, n in enumerate(nets)} for t in range(len(vecs))]


def exhaustive_stimulus(n_inputs: int, cycles: int) -> np.ndarray:
    """Every input sequence of the given length, one per lane."""
    bits = n_inputs * cycles
    lanes = np.arange(1 << bits, dtype=np.int64)
    out = np.empty((cycles, n_inputs, 1 << bits), dtype=bool)
    for t in range(cycles):
        for i in range(n_inputs):
            out[t, i] = (lanes >> (t * n_inputs + i)) & 1
    return out


def random_stimulus(n_inputs: int, cycles: int, lanes: int, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(0, 2, size=(cycles, n_inputs, lanes), dtype=np.uint8).astype(bool)


def pack_lanes(stimulus: np.ndarray) -> np.ndarray:
    """Pack the lane axis of a bool array into uint64 words (64 lanes per word).

    Padding lanes are zero, i.e. the all-zeros input sequence.
    """
    stimulus = np.asarray(stimulus, dtype=bool)
    lanes = stimulus.shape[-1]
    pad = (-lanes) % 64
    if pad:
        stimulus = np.concatenate([stimulus, np.zeros(stimulus.shape[:-1] + (pad,), dtype=bool)], axis=-1)
    packed = np.packbits(stimulus, axis=-1, bitorder="little")
    return np.ascontiguousarray(packed).view("<u8").astype(np.uint64, copy=False)


_ONES = np.uint64(0xFFFFFFFFFFFFFFFF)


class FaultSimulator:
    """Bit-packed golden simulation plus fanout-restricted single-fault replay.

    A fault complements one instance output in every cycle. Only instances
    in the structural fanout of the faulted one are re-evaluated; everything
    else is read from the stored golden trace.
    """

    def __init__(self, netlist: Netlist, library: CellLibrary):
        self.netlist = netlist
        self.index = {net: i for i, net in enumerate(netlist.nets)}
        self.inputs = [self.index[n] for n in netlist.inputs]
        self.flops: list[tuple[str, int, int]] = []
        self.ops: list[tuple[str, str, int, tuple[int, ...]]] = []
        for inst_id in netlist.topo_order:
            inst = netlist.instances[inst_id]
            cell = library[inst.cell]
            if cell.is_sequential:
                self.flops.append((inst_id, self.index[inst.output], self.index[inst.pin_map["D"]]))
            else:
                ins = tuple(self.index[inst.pin_map[p]] for p in cell.inputs)
                self.ops.append((inst_id, cell.function, self.index[inst.output], ins))
        self._fanout_cache: dict[str, tuple[list, list]] = {}

    @staticmethod
    def _eval(fn: str, args, words: int):
        if fn == "TIE0":
            return np.zeros(words, dtype=np.uint64)
        if fn == "TIE1":
            return np.full(words, _ONES, dtype=np.uint64)
        return evaluate(fn, args)

    def golden(self, packed: np.ndarray) -> np.ndarray:
        """Trace of shape (cycles, nets, words) from the all-zero initial state."""
        cycles, _, words = packed.shape
        trace = np.zeros((cycles, len(self.index), words), dtype=np.uint64)
        state = np.zeros((len(self.flops), words), dtype=np.uint64)
        for t in range(cycles):
            vals = trace[t]
            vals[self.inputs] = packed[t]
            for k, (_, q, _) in enumerate(self.flops):
                vals[q] = state[k]
            for _, fn, o, ins in self.ops:
                vals[o] = self._eval(fn, [vals[i] for i in ins], words)
            for k, (_, _, d) in enumerate(self.flops):
                state[k] = vals[d]
        return trace

    def _fanout(self, node: str):
        if node not in self._fanout_cache:
            reach = transitive_fanout(self.netlist, node)
            self._fanout_cache[node] = (
                [op for op in self.ops if op[0] in reach],
                [fl for fl in self.flops if fl[0] in reach],
            )
        return self._fanout_cache[node]

    def detects(self, trace: np.ndarray, node: str, watch: int) -> bool:
        """True when complementing ``node`` changes net ``watch`` in some lane and cycle."""
        ops, flops = self._fanout(node)
        cycles, _, words = trace.shape
        prev: dict[int, np.ndarray] = {}
        for t in range(cycles):
            gold = trace[t]
            faulty: dict[int, np.ndarray] = {}
            for inst_id, q, d in flops:
                if t > 0 and d in prev:
                    v = prev[d]
                else:
                    v = gold[q]
                faulty[q] = ~v if inst_id == node else v
            for inst_id, fn, o, ins in ops:
                v = self._eval(fn, [faulty[i] if i in faulty else gold[i] for i in ins], words)
                faulty[o] = ~v if inst_id == node else v
            if watch in faulty and np.any(faulty[watch] ^ gold[watch]):
                return True
            prev = faulty
        return False
