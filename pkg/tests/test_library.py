from fractions import Fraction

import numpy as np
import pytest

from trojanguard.errors import LibraryError
from trojanguard.library import evaluate, load_cell_library


def test_bundled_library(lib):
    assert lib.name == "demo65"
    assert lib["NAND2"].area == Fraction(108, 100)
    assert lib["DFF"].is_sequential and lib["DFF"].clock == "CK"
    assert lib.by_function("XOR").name == "XOR2"
    # area is width * site * row everywhere, so site occupancy tracks area
    for cell in lib.cells.values():
        assert cell.area == Fraction(cell.width) * Fraction("0.2") * Fraction("1.8")


@pytest.mark.parametrize("fn, table", [
    ("AND", [0, 0, 0, 1]), ("OR", [0, 1, 1, 1]), ("XOR", [0, 1, 1, 0]),
    ("NAND", [1, 1, 1, 0]), ("NOR", [1, 0, 0, 0]), ("XNOR", [1, 0, 0, 1]),
])
def test_two_input_truth_tables(fn, table):
    got = [int(evaluate(fn, [bool(a), bool(b)])) for a in (0, 1) for b in (0, 1)]
    assert got == table


def test_mux_and_arrays():
    a = np.array([0, 0, 1, 1], dtype=bool)
    b = np.array([0, 1, 0, 1], dtype=bool)
    s = np.array([1, 1, 0, 0], dtype=bool)
    assert evaluate("MUX2", [a, b, s]).tolist() == [False, True, True, True]
    assert evaluate("INV", [a]).tolist() == [True, True, False, False]
    assert evaluate("TIE1", []) is True


@pytest.mark.parametrize("text, msg", [
    ("cell X fn=FOO area=1 width=1 power=0 delay=0 load=0 pins=out:Y", "FOO"),
    ("cell X fn=INV area=1 width=1 power=0 delay=0 pins=in:A,out:Y", "load"),
    ("cell X fn=INV area=1 width=1 power=0 delay=0 load=0 pins=in:A,out:Y\n"
     "cell X fn=INV area=1 width=1 power=0 delay=0 load=0 pins=in:A,out:Y", "duplicate"),
    ("cell X fn=INV area=abc width=1 power=0 delay=0 load=0 pins=in:A,out:Y", "area"),
])
def test_library_errors(text, msg):
    with pytest.raises(LibraryError, match=msg):
        load_cell_library(text)
