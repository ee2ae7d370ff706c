"""Row/site placement model with gap accounting and insert-only ECO placement.

Coordinates: site ``s`` of row ``r`` spans ``[s*site_width, (s+1)*site_width)``
horizontally and row ``r`` spans ``[r*row_height, (r+1)*row_height)``.
Placement density is occupied sites over total sites, which equals placed
cell area over core area for libraries whose cell area is
``width * site_width * row_height``.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable

from .errors import LayoutError
from .library import CellLibrary
from .netlist import Netlist, id_key, sorted_ids

DEFAULT_WINDOW_W = 10
DEFAULT_WINDOW_H = 1
GAP_QUANTUM = 6  # sites; wide enough for an XOR2 voter


@dataclass(frozen=True)
class Placement:
    row: int
    site: int
    width: int

    @property
    def end(self) -> int:
        return self.site + self.width


@dataclass(frozen=True)
class Layout:
    rows: int
    sites: int
    site_width: float
    row_height: float
    placements: dict[str, Placement] = field(default_factory=dict)
    pins: dict[str, tuple[float, float]] = field(default_factory=dict)

    @property
    def core_width(self) -> float:
        return self.sites * self.site_width

    @property
    def core_height(self) -> float:
        return self.rows * self.row_height

    @property
    def core_area(self) -> float:
        return self.core_width * self.core_height

    @property
    def total_sites(self) -> int:
        return self.rows * self.sites

    @property
    def occupied_sites(self) -> int:
        return sum(p.width for p in self.placements.values())

    @property
    def density_fraction(self) -> Fraction:
        return Fraction(self.occupied_sites, self.total_sites)

    @property
    def density(self) -> float:
        return float(self.density_fraction)

    def center(self, inst_id: str) -> tuple[float, float]:
        try:
            p = self.placements[inst_id]
        except KeyError:
            raise LayoutError(f"instance {inst_id!r} is not placed") from None
        return ((p.site + p.width / 2) * self.site_width, (p.row + 0.5) * self.row_height)

    def occupancy(self) -> list[bytearray]:
        occ = [bytearray(self.sites) for _ in range(self.rows)]
        for p in self.placements.values():
            occ[p.row][p.site:p.end] = b"\x01" * p.width
        return occ

    def gaps(self) -> dict[int, list[tuple[int, int]]]:
        """Per row, free half-open site intervals in ascending order."""
        out: dict[int, list[tuple[int, int]]] = {}
        for r, row in enumerate(self.occupancy()):
            out[r] = _free_runs(row, 0, self.sites)
        return out

    def check(self) -> None:
        """Raise LayoutError on overlap, out-of-bounds, or gap-map mismatch."""
        by_row: dict[int, list[tuple[int, int, str]]] = {}
        for inst, p in self.placements.items():
            if not (0 <= p.row < self.rows and 0 <= p.site and p.end <= self.sites and p.width >= 1):
                raise LayoutError(f"{inst} placed outside the core")
            by_row.setdefault(p.row, []).append((p.site, p.end, inst))
        for r, cells in by_row.items():
            cells.sort()
            for (s0, e0, a), (s1, _, b) in zip(cells, cells[1:]):
                if s1 < e0:
                    raise LayoutError(f"{a} and {b} overlap in row {r}")
        for r, free in self.gaps().items():
            covered = sum(e - s for s, e in free) + sum(e - s for s, e, _ in by_row.get(r, []))
            if covered != self.sites:
                raise LayoutError(f"gap map of row {r} is not the complement of its placements")

    def with_placements(self, new: dict[str, Placement]) -> "Layout":
        merged = dict(self.placements)
        merged.update(new)
        return Layout(self.rows, self.sites, self.site_width, self.row_height, merged, dict(self.pins))

    def with_pins(self, pins: dict[str, tuple[float, float]]) -> "Layout":
        merged = dict(self.pins)
        merged.update(pins)
        return Layout(self.rows, self.sites, self.site_width, self.row_height, dict(self.placements), merged)


@dataclass(frozen=True)
class DensityWindow:
    anchor: str
    w: int
    h: int
    free_sites: int
    largest_gap: int
    row_span: tuple[int, int]
    site_span: tuple[int, int]

    @property
    def feasible(self) -> bool:
        return self.free_sites > 0


@dataclass(frozen=True)
class Infeasible:
    """Returned by :func:`insert_cells` when a cell cannot be placed."""

    cell: str
    reason: str = "no free interval inside the window"


def _free_runs(row: bytearray, lo: int, hi: int) -> list[tuple[int, int]]:
    runs = []
    s = None
    for i in range(lo, hi):
        if not row[i]:
            if s is None:
                s = i
        elif s is not None:
            runs.append((s, i))
            s = None
    if s is not None:
        runs.append((s, hi))
    return runs


def boundary_pins(netlist: Netlist, rows: int, sites: int, site_width: float, row_height: float):
    """Inputs evenly along the left edge, outputs along the right edge."""
    h = rows * row_height
    w = sites * site_width
    pins: dict[str, tuple[float, float]] = {}
    ins = [n for n in netlist.inputs]
    for k, net in enumerate(ins):
        pins[net] = (0.0, h * (k + 0.5) / len(ins))
    outs = list(dict.fromkeys(netlist.outputs))
    for k, net in enumerate(outs):
        pins[net] = (w, h * (k + 0.5) / len(outs))
    return pins


def build_floorplan(netlist: Netlist, library: CellLibrary, target_density: float) -> Layout:
    if not 0 < target_density < 1:
        raise LayoutError("target density must be strictly between 0 and 1")
    if not netlist.instances:
        raise LayoutError("empty netlist")
    widths = [library[i.cell].width for i in netlist.instances.values()]
    needed = sum(widths)
    target_sites = needed / target_density
    sw, rh = library.site_width, library.row_height
    rows = max(1, round(math.sqrt(target_sites * sw / rh)))
    sites = max(math.ceil(target_sites / rows), max(widths))
    return Layout(rows, sites, sw, rh, {}, boundary_pins(netlist, rows, sites, sw, rh))


def _bfs_order(netlist: Netlist) -> list[str]:
    seen: set[str] = set()
    order: list[str] = []
    queue: deque[str] = deque()

    def push(i):
        if i not in seen:
            seen.add(i)
            queue.append(i)

    for net in netlist.inputs:
        for sink, _ in netlist.sinks[net]:
            push(sink)
    for inst in netlist.instances.values():
        if not inst.data_nets:
            push(inst.id)
    pending = iter(netlist.instances)
    while True:
        while queue:
            cur = queue.popleft()
            order.append(cur)
            for succ in netlist.data_successors(cur):
                push(succ)
        nxt = next((i for i in pending if i not in seen), None)
        if nxt is None:
            return order
        push(nxt)


def place(netlist: Netlist, layout: Layout, library: CellLibrary, gap_quantum: int = GAP_QUANTUM) -> Layout:
    """Deterministic row-major placement with evenly spread gaps.

    Cells go in breadth-first order from the primary inputs and rows are
    filled to an equal share of the total cell width. Each row's free sites
    are cut into about ``free / gap_quantum`` equal gaps, and those gaps are
    spread evenly over the slots before, between and after its cells.
    """
    if gap_quantum < 1:
        raise LayoutError("gap quantum must be >= 1")
    order = _bfs_order(netlist)
    widths = {i: library[netlist.instances[i].cell].width for i in order}
    total = sum(widths.values())
    share = total / layout.rows
    rows: list[list[str]] = [[] for _ in range(layout.rows)]
    r, used, cum = 0, 0, 0
    for inst in order:
        w = widths[inst]
        while r < layout.rows - 1 and (used + w > layout.sites or (used > 0 and cum + w / 2 > share * (r + 1))):
            r, used = r + 1, 0
        if used + w > layout.sites:
            raise LayoutError("insufficient core area")
        rows[r].append(inst)
        used += w
        cum += w
    placements: dict[str, Placement] = {}
    for r, cells in enumerate(rows):
        free = layout.sites - sum(widths[c] for c in cells)
        slots = len(cells) + 1
        n_gaps = min(slots, max(1, round(free / gap_quantum)))
        gap_at = [0] * slots
        for j in range(n_gaps):
            gap_at[(2 * j + 1) * slots // (2 * n_gaps)] = (j + 1) * free // n_gaps - j * free // n_gaps
        site = 0
        for k, c in enumerate(cells):
            site += gap_at[k]
            placements[c] = Placement(r, site, widths[c])
            site += widths[c]
    return Layout(layout.rows, layout.sites, layout.site_width, layout.row_height, placements, dict(layout.pins))


def _window_bounds(layout: Layout, anchor: str, w: int, h: int):
    if w <= 0 or h <= 0:
        raise LayoutError("window W and H must be positive")
    try:
        p = layout.placements[anchor]
    except KeyError:
        raise LayoutError(f"anchor {anchor!r} is not placed") from None
    rows = (max(0, p.row - h), min(layout.rows - 1, p.row + h))
    sites = (max(0, p.site - w), min(layout.sites, p.end + w))
    return rows, sites


def density_window_analysis(layout: Layout, nodes: Iterable[str], w: int = DEFAULT_WINDOW_W,
                            h: int = DEFAULT_WINDOW_H) -> list[DensityWindow]:
    occ = layout.occupancy()
    out = []
    for node in nodes:
        (r0, r1), (s0, s1) = _window_bounds(layout, node, w, h)
        free = 0
        largest = 0
        for r in range(r0, r1 + 1):
            for a, b in _free_runs(occ[r], s0, s1):
                free += b - a
                largest = max(largest, b - a)
        out.append(DensityWindow(node, w, h, free, largest, (r0, r1), (s0, s1)))
    return out


def insert_cells(layout: Layout, cells: list[tuple[str, int]], anchor: str, w: int = DEFAULT_WINDOW_W,
                 h: int = DEFAULT_WINDOW_H) -> Layout | Infeasible:
    """Place ``cells`` greedily nearest to ``anchor`` without moving anything.

    Distance is Manhattan between cell centers in micrometers; ties go to the
    lower row, then the lower site. Wider cells are placed first so narrow
    ones do not fragment the few gaps that can hold them. Either every cell
    is placed or the input layout is returned untouched inside an
    :class:`Infeasible`.
    """
    (r0, r1), (s0, s1) = _window_bounds(layout, anchor, w, h)
    ax, ay = layout.center(anchor)
    occ = layout.occupancy()
    new: dict[str, Placement] = {}
    for cell_id, width in sorted(cells, key=lambda c: -c[1]):
        if cell_id in layout.placements or cell_id in new:
            raise LayoutError(f"{cell_id} is already placed")
        best = None
        for r in range(r0, r1 + 1):
            dy = abs((r + 0.5) * layout.row_height - ay)
            for a, b in _free_runs(occ[r], s0, s1):
                for s in range(a, b - width + 1):
                    dx = abs((s + width / 2) * layout.site_width - ax)
                    key = (round(dx + dy, 9), r, s)
                    if best is None or key < best:
                        best = key
        if best is None:
            return Infeasible(cell_id)
        _, r, s = best
        occ[r][s:s + width] = b"\x01" * width
        new[cell_id] = Placement(r, s, width)
    return layout.with_placements(new)


def hpwl(netlist: Netlist, layout: Layout) -> float:
    total = 0.0
    for net, drv in netlist.driver.items():
        if net == netlist.clock:
            continue
        pts = []
        if drv is None:
            if net not in layout.pins:
                raise LayoutError(f"primary input {net!r} has no pin location")
            pts.append(layout.pins[net])
        else:
            pts.append(layout.center(drv))
        for sink, _ in netlist.sinks[net]:
            pts.append(layout.center(sink))
        if net in netlist.outputs:
            if net not in layout.pins:
                raise LayoutError(f"primary output {net!r} has no pin location")
            pts.append(layout.pins[net])
        if len(pts) < 2:
            continue
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        total += (max(xs) - min(xs)) + (max(ys) - min(ys))
    return total


# -- snapshot file --------------------------------------------------------------

def format_layout(layout: Layout) -> str:
    lines = [
        "# layout snapshot",
        f"core {layout.core_width:.6f} {layout.core_height:.6f}",
        f"site_width {layout.site_width!r}",
        f"row_height {layout.row_height!r}",
        f"rows {layout.rows}",
        f"sites {layout.sites}",
    ]
    for net in sorted(layout.pins, key=id_key):
        x, y = layout.pins[net]
        lines.append(f"pin {net} {x!r} {y!r}")
    for inst in sorted_ids(layout.placements):
        p = layout.placements[inst]
        lines.append(f"place {inst} {p.row} {p.site} {p.width}")
    return "\n".join(lines) + "\n"


def parse_layout(text: str) -> Layout:
    fields: dict[str, str] = {}
    placements: dict[str, Placement] = {}
    pins: dict[str, tuple[float, float]] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].split()
        if not line:
            continue
        key = line[0]
        try:
            if key == "place":
                placements[line[1]] = Placement(int(line[2]), int(line[3]), int(line[4]))
            elif key == "pin":
                pins[line[1]] = (float(line[2]), float(line[3]))
            elif key in ("site_width", "row_height", "rows", "sites"):
                fields[key] = line[1]
            elif key != "core":
                raise LayoutError(f"line {lineno}: unknown record {key!r}")
        except (IndexError, ValueError):
            raise LayoutError(f"line {lineno}: malformed {key} record") from None
    missing = {"site_width", "row_height", "rows", "sites"} - fields.keys()
    if missing:
        raise LayoutError(f"layout header lacks {sorted(missing)}")
    layout = Layout(int(fields["rows"]), int(fields["sites"]), float(fields["site_width"]),
                    float(fields["row_height"]), placements, pins)
    layout.check()
    return layout


def read_layout(path: str | Path) -> Layout:
    return parse_layout(Path(path).read_text(encoding="utf-8"))
