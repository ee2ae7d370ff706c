"""Standard-cell library model and its text format.

A library file holds one optional ``library`` header line followed by one
``cell`` line per cell type::

    library demo65 site_width=0.2 row_height=1.8 wire_delay=0.002 hold=0.0
    cell NAND2 fn=NAND area=1.08 width=3 power=0.0021 delay=0.04 load=0.01 pins=in:A,in:B,out:Y

Area and power are parsed as exact fractions so that resource accounting
sums without rounding drift.
"""

from __future__ import annotations

import shlex
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .errors import LibraryError

# logic tag -> ordered data input pins
FUNCTION_PINS: dict[str, tuple[str, ...]] = {
    "INV": ("A",),
    "BUF": ("A",),
    "AND": ("A", "B"),
    "NAND": ("A", "B"),
    "OR": ("A", "B"),
    "NOR": ("A", "B"),
    "XOR": ("A", "B"),
    "XNOR": ("A", "B"),
    "MUX2": ("A", "B", "S"),
    "DFF": ("D",),
    "TIE0": (),
    "TIE1": (),
}

SEQUENTIAL_FUNCTIONS = frozenset({"DFF"})
CLOCK_PIN = "CK"


def evaluate(fn: str, args):
    """Evaluate a combinational logic tag.

    Works on Python bools and on numpy bool arrays alike; ``args`` follows
    the pin order of :data:`FUNCTION_PINS`. TIE cells return plain bools,
    which broadcast.
    """
    if fn == "INV":
        return _not(args[0])
    if fn == "BUF":
        return args[0]
    if fn == "TIE0":
        return False
    if fn == "TIE1":
        return True
    a, b = args[0], args[1]
    if fn == "AND":
        return a & b
    if fn == "OR":
        return a | b
    if fn == "XOR":
        return a ^ b
    if fn == "NAND":
        return _not(a & b)
    if fn == "NOR":
        return _not(a | b)
    if fn == "XNOR":
        return _not(a ^ b)
    if fn == "MUX2":
        s = args[2]
        return (a & _not(s)) | (b & s)
    raise LibraryError(f"no combinational semantics for {fn!r}")


def _not(x):
    return (not x) if isinstance(x, bool) else ~x


@dataclass(frozen=True)
class Cell:
    name: str
    function: str
    area: Fraction
    width: int
    power: Fraction
    delay: float
    load: float
    inputs: tuple[str, ...]
    output: str
    clock: str | None = None

    @property
    def is_sequential(self) -> bool:
        return self.function in SEQUENTIAL_FUNCTIONS


@dataclass(frozen=True)
class CellLibrary:
    name: str = "lib"
    cells: dict[str, Cell] = field(default_factory=dict)
    site_width: float = 0.2
    row_height: float = 1.8
    wire_delay: float = 0.0  # ns per um of Manhattan distance
    hold: float = 0.0

    def __contains__(self, cell_type: str) -> bool:
        return cell_type in self.cells

    def __getitem__(self, cell_type: str) -> Cell:
        try:
            return self.cells[cell_type]
        except KeyError:
            raise LibraryError(f"unknown cell type {cell_type!r}") from None

    def by_function(self, fn: str) -> Cell:
        """First cell implementing ``fn`` in file order."""
        for cell in self.cells.values():
            if cell.function == fn:
                return cell
        raise LibraryError(f"library has no cell with function {fn}")

    def require(self, *cell_types: str) -> None:
        missing = [c for c in cell_types if c not in self.cells]
        if missing:
            raise LibraryError(f"library lacks required cell types: {', '.join(missing)}")


_HEADER_FLOATS = ("site_width", "row_height", "wire_delay", "hold")
_CELL_KEYS = ("fn", "area", "width", "power", "delay", "load", "pins")


def _fields(tokens: list[str], lineno: int) -> dict[str, str]:
    out = {}
    for tok in tokens:
        if "=" not in tok:
            raise LibraryError(f"line {lineno}: expected key=value, got {tok!r}")
        key, value = tok.split("=", 1)
        out[key] = value
    return out


def _number(text: str, key: str, lineno: int, kind=float):
    try:
        return kind(text)
    except (ValueError, ZeroDivisionError):
        raise LibraryError(f"line {lineno}: bad value for {key}: {text!r}") from None


def load_cell_library(text: str) -> CellLibrary:
    header: dict[str, object] = {"name": "lib"}
    cells: dict[str, Cell] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = shlex.split(line)
        head = tokens[0]
        if head == "library":
            if len(tokens) > 1 and "=" not in tokens[1]:
                header["name"] = tokens[1]
                tokens = tokens[1:]
            for key, value in _fields(tokens[1:], lineno).items():
                if key not in _HEADER_FLOATS:
                    raise LibraryError(f"line {lineno}: unknown header field {key!r}")
                header[key] = _number(value, key, lineno)
            continue
        if head != "cell" or len(tokens) < 2:
            raise LibraryError(f"line {lineno}: expected 'cell <NAME> ...'")
        name = tokens[1]
        if name in cells:
            raise LibraryError(f"line {lineno}: duplicate cell {name!r}")
        f = _fields(tokens[2:], lineno)
        for key in _CELL_KEYS:
            if key not in f:
                raise LibraryError(f"line {lineno}: cell {name} missing required field {key!r}")
        fn = f["fn"]
        if fn not in FUNCTION_PINS:
            raise LibraryError(f"line {lineno}: cell {name} has unknown logic function {fn!r}")
        area = _number(f["area"], "area", lineno, Fraction)
        width = _number(f["width"], "width", lineno, int)
        delay = _number(f["delay"], "delay", lineno)
        if area <= 0:
            raise LibraryError(f"line {lineno}: cell {name} area must be > 0")
        if width < 1:
            raise LibraryError(f"line {lineno}: cell {name} width must be >= 1")
        if delay < 0:
            raise LibraryError(f"line {lineno}: cell {name} delay must be >= 0")
        ins, outs, clk = [], [], None
        for spec in f["pins"].split(","):
            if not spec:
                continue
            direction, _, pin = spec.partition(":")
            if direction == "in":
                ins.append(pin)
            elif direction == "out":
                outs.append(pin)
            elif direction == "clk":
                clk = pin
            else:
                raise LibraryError(f"line {lineno}: bad pin direction {direction!r}")
        if len(outs) != 1:
            raise LibraryError(f"line {lineno}: cell {name} must have exactly one output pin")
        if tuple(ins) != FUNCTION_PINS[fn]:
            raise LibraryError(
                f"line {lineno}: cell {name} pins {ins} do not match {fn} pins {list(FUNCTION_PINS[fn])}"
            )
        if (fn in SEQUENTIAL_FUNCTIONS) != (clk is not None):
            raise LibraryError(f"line {lineno}: cell {name} clock pin inconsistent with {fn}")
        cells[name] = Cell(
            name=name,
            function=fn,
            area=area,
            width=width,
            power=_number(f["power"], "power", lineno, Fraction),
            delay=delay,
            load=_number(f["load"], "load", lineno),
            inputs=tuple(ins),
            output=outs[0],
            clock=clk,
        )
    return CellLibrary(cells=cells, **header)


def read_cell_library(path: str | Path) -> CellLibrary:
    return load_cell_library(Path(path).read_text(encoding="utf-8"))
