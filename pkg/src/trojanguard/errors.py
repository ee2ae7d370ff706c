"""Exception types shared across the toolchain."""


class ToolError(Exception):
    """Base class; ``kind`` is the machine-readable tag printed by the CLI."""

    kind = "error"


class NetlistSyntaxError(ToolError):
    kind = "syntax"

    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class NetlistError(ToolError):
    kind = "netlist"


class LibraryError(ToolError):
    kind = "library"


class BindError(ToolError):
    kind = "bind"


class LayoutError(ToolError):
    kind = "layout"


class TimingError(ToolError):
    kind = "timing"


class CoverageError(ToolError):
    kind = "coverage"


class MonitorError(ToolError):
    kind = "monitor"


class TrojanError(ToolError):
    kind = "trojan"


class ConfigError(ToolError):
    kind = "config"
