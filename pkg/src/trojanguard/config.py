"""Flat ``key = value`` pipeline configuration.

Blank lines and ``#`` comments are ignored. Relative paths resolve against
the directory holding the config file. Unknown keys are errors so typos do
not silently fall back to defaults.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from importlib.resources import files
from pathlib import Path

from .assertions import PER_ASSERTION, SelectionConfig
from .coverage import DEFAULT_BUDGET, DEFAULT_DEPTH, EXACT
from .eco import EcoConfig
from .errors import ConfigError
from .layout import DEFAULT_WINDOW_H, DEFAULT_WINDOW_W, GAP_QUANTUM

PATH_KEYS = ("netlist", "library", "manifest", "trojans")


def bundled(name: str) -> Path:
    return Path(str(files("trojanguard") / "data" / name))


@dataclass(frozen=True)
class PipelineConfig:
    netlist: Path | None = None
    library: Path | None = None
    manifest: Path | None = None
    trojans: Path | None = None
    out: Path = Path("out")
    seed: int = 0
    clock_period: float | None = None  # None: tune to 10% worst slack
    target_density: float = 0.65
    gap_quantum: int = GAP_QUANTUM
    coverage_mode: str = EXACT
    unroll_depth: int = DEFAULT_DEPTH
    input_budget: int = DEFAULT_BUDGET
    df_fraction: float = 0.25
    max_rounds: int | None = None
    window_w: int = DEFAULT_WINDOW_W
    window_h: int = DEFAULT_WINDOW_H
    max_area: float = 0.20
    max_power: float = 0.20
    min_sc_gain: float = 0.0
    sc_target: float | None = None
    basis: str = PER_ASSERTION
    detection_budget: int = 100_000
    exhaustive: bool = False
    place_trojans: bool = False

    @property
    def library_path(self) -> Path:
        return self.library or bundled("demo65.lib")

    def selection(self) -> SelectionConfig:
        return SelectionConfig(self.max_area, self.max_power, self.min_sc_gain, self.sc_target, self.basis,
                               self.coverage_mode, self.unroll_depth, self.input_budget)

    def eco(self) -> EcoConfig:
        return EcoConfig(self.df_fraction, self.max_rounds, self.window_w, self.window_h)

    def require(self, *keys: str) -> None:
        for key in keys:
            path = getattr(self, key)
            if path is None:
                raise ConfigError(f"{key} is not set")
            if not Path(path).exists():
                raise ConfigError(f"{key} path {path} does not exist")

    def check_paths(self) -> None:
        for key in PATH_KEYS:
            path = getattr(self, key)
            if path is not None and not Path(path).exists():
                raise ConfigError(f"{key} path {path} does not exist")

    def with_overrides(self, **kw) -> "PipelineConfig":
        return dataclasses.replace(self, **{k: v for k, v in kw.items() if v is not None})


_BOOL = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}


def _convert(name: str, ftype: str, raw: str, base: Path):
    if raw.lower() in ("none", "") and "None" in ftype:
        return None
    try:
        if "Path" in ftype:
            p = Path(raw).expanduser()
            return p if p.is_absolute() else base / p
        if ftype.startswith("bool"):
            return _BOOL[raw.lower()]
        if ftype.startswith("int"):
            return int(raw)
        if ftype.startswith("float"):
            return float(raw)
        return raw
    except (KeyError, ValueError):
        raise ConfigError(f"bad value for {name}: {raw!r}") from None


def parse_config(text: str, base_dir: str | Path = ".") -> PipelineConfig:
    base = Path(base_dir)
    types = {f.name: str(f.type) for f in fields(PipelineConfig)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if not sep:
            raise ConfigError(f"config line {lineno}: expected key = value")
        if key not in types:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        values[key] = _convert(key, types[key], val, base)
    try:
        cfg = PipelineConfig(**values)
        cfg.selection()
        cfg.eco()
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def read_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, path.parent)
