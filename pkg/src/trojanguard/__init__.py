"""Assertion- and monitor-based hardening of gate-level designs against additive hardware trojans.

Typical flow: parse a netlist, measure security coverage of its bound
assertion checkers, place it, then insert duplicate-and-compare monitors
on the uncovered logic through an insert-only ECO loop.
"""

from .coverage import analyze_coverage, security_coverage, uncovered_nodes
from .errors import ToolError
from .library import load_cell_library, read_cell_library
from .netlist import Netlist, parse_netlist, read_netlist

__version__ = "0.1.0"

__all__ = [
    "Netlist",
    "ToolError",
    "analyze_coverage",
    "load_cell_library",
    "parse_netlist",
    "read_cell_library",
    "read_netlist",
    "security_coverage",
    "uncovered_nodes",
]
