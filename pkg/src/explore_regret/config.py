"""YAML run configuration with line-aware validation errors.

Schema (every key optional; defaults reproduce the published experiment)::

    experiment:
      theta0_list: [-2, -0.7, -0.5, -0.4, -0.3, 0.2, 0.4, 0.7, 1, 3]  # ten test systems
      T: 50                      # design horizon
      sigma2: 1.0                # measurement-noise variance
      n_mc: 1000                 # Monte Carlo replicates
      master_seed: 20240601      # root of every noise stream (not published)
      design_mode: both          # a (bound), b (empirical) or both
      oracle_design: false       # design-time formulas use the true theta0
      design_estimate: per-replicate   # or "mean" (bank-mean init estimate)
      u_init: 1.0                # input of the identification experiment
      i0: null                   # override for initial scaled information
      fig2_theta0: 0.4           # system whose trajectories are exported
      strategies: [lazy, immediate_gaussian, immediate_binary, decaying_gaussian]
      max_evaluations: 1.0e10    # cap on replicate-steps per run
    grids:
      constants: {count: 301, lo: 1.0e-3, hi: 1.0e2}   # x_g, x_b, c (log-spaced)
      exponents: {count: 21, lo: -20, hi: -0.1}        # p (log-spaced magnitudes)
    plan:
      families: [gaussian, binary]
      x_max: 100.0
    verify:
      T: [3, 4, 5]
      i0: [0.5, 1, 2]
      u0_star: [-2, -1, -0.5]
      families: [gaussian, binary]
      grid: {count: 40, lo: 1.0e-3, hi: 1.0e2}   # plus an explicit 0
      budget: 1.0e8
      kkt_tol: 1.0e-8
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np
import yaml

from .mc import ExperimentConfig, GridSpec


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PlanConfig:
    families: tuple = ("gaussian", "binary")
    x_max: float = 100.0


@dataclass(frozen=True)
class VerifyConfig:
    T: tuple = (3, 4, 5)
    i0: tuple = (0.5, 1.0, 2.0)
    u0_star: tuple = (-2.0, -1.0, -0.5)
    families: tuple = ("gaussian", "binary")
    grid: GridSpec = GridSpec(40, 1e-3, 1e2)
    budget: float = 1e8
    kkt_tol: float = 1e-8

    def grid_points(self) -> np.ndarray:
        return np.concatenate([[0.0], self.grid.constants()])


@dataclass(frozen=True)
class RunConfig:
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)
    plan: PlanConfig = field(default_factory=PlanConfig)
    verify: VerifyConfig = field(default_factory=VerifyConfig)
    source: Optional[str] = None


_SECTIONS = ("experiment", "grids", "plan", "verify")
_EXPERIMENT_KEYS = {f.name for f in dataclasses.fields(ExperimentConfig)} - {"constants", "exponents"}
_GRID_KEYS = ("count", "lo", "hi")


def _marks(node, path=(), out=None):
    """Map each key path to the 1-based line of its key (root: first line)."""
    out = {} if out is None else out
    out[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            key = k.value
            _marks(v, path + (key,), out)
            out[path + (key,)] = k.start_mark.line + 1
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            _marks(v, path + (i,), out)
    return out


class _Reader:
    def __init__(self, source: str, lines: dict):
        self.source = source
        self.lines = lines

    def fail(self, path, why):
        line = None
        for n in range(len(path), -1, -1):
            if tuple(path[:n]) in self.lines:
                line = self.lines[tuple(path[:n])]
                break
        dotted = ".".join(str(p) for p in path) or "<root>"
        where = f"{self.source}:{line}" if line is not None else self.source
        raise ConfigError(f"{where}: {dotted}: {why}")

    def mapping(self, value, path, allowed):
        if value is None:
            return {}
        if not isinstance(value, dict):
            self.fail(path, "expected a mapping")
        for k in value:
            if k not in allowed:
                self.fail(path + (k,), f"unknown key (allowed: {', '.join(sorted(allowed))})")
        return value

    def number(self, value, path, integer=False):
        if isinstance(value, str):
            # YAML 1.1 reads "1e10" as a string
            try:
                value = float(value)
            except ValueError:
                self.fail(path, f"expected a number, got {value!r}")
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.fail(path, f"expected a number, got {value!r}")
        if integer:
            if float(value) != int(value):
                self.fail(path, f"expected an integer, got {value!r}")
            return int(value)
        return float(value)

    def numbers(self, value, path, integer=False):
        if not isinstance(value, list):
            self.fail(path, "expected a list")
        return tuple(self.number(v, path + (i,), integer) for i, v in enumerate(value))

    def strings(self, value, path):
        if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
            self.fail(path, "expected a list of names")
        return tuple(value)

    def grid(self, value, path, default: GridSpec):
        value = self.mapping(value, path, _GRID_KEYS)
        return GridSpec(
            self.number(value.get("count", default.count), path + ("count",), integer=True),
            self.number(value.get("lo", default.lo), path + ("lo",)),
            self.number(value.get("hi", default.hi), path + ("hi",)),
        )


def _experiment(r: _Reader, raw: dict) -> ExperimentConfig:
    base = ExperimentConfig()
    exp = r.mapping(raw.get("experiment"), ("experiment",), _EXPERIMENT_KEYS)
    grids = r.mapping(raw.get("grids"), ("grids",), ("constants", "exponents"))
    kw: dict[str, Any] = {}
    p = ("experiment",)
    for key, val in exp.items():
        if key == "theta0_list":
            kw[key] = r.numbers(val, p + (key,))
        elif key == "strategies":
            kw[key] = r.strings(val, p + (key,))
        elif key in ("T", "n_mc", "master_seed"):
            kw[key] = r.number(val, p + (key,), integer=True)
        elif key in ("design_mode", "design_estimate"):
            if not isinstance(val, str):
                r.fail(p + (key,), "expected a string")
            kw[key] = val
        elif key == "oracle_design":
            if not isinstance(val, bool):
                r.fail(p + (key,), "expected true or false")
            kw[key] = val
        elif key == "i0":
            kw[key] = None if val is None else r.number(val, p + (key,))
        else:
            kw[key] = r.number(val, p + (key,))
    kw["constants"] = r.grid(grids.get("constants"), ("grids", "constants"), base.constants)
    kw["exponents"] = r.grid(grids.get("exponents"), ("grids", "exponents"), base.exponents)
    cfg = dataclasses.replace(base, **kw)
    check_experiment(cfg, r)
    return cfg


def check_experiment(cfg: ExperimentConfig, reader: Optional[_Reader] = None) -> None:
    try:
        cfg.validate()
    except ValueError as exc:
        name, _, why = str(exc).partition(": ")
        path = ("grids", name) if name in ("constants", "exponents") else ("experiment", name)
        (reader or _Reader("<config>", {})).fail(path, why)


def _plan(r: _Reader, raw: dict) -> PlanConfig:
    d = PlanConfig()
    v = r.mapping(raw.get("plan"), ("plan",), ("families", "x_max"))
    fam = r.strings(v["families"], ("plan", "families")) if "families" in v else d.families
    for i, f in enumerate(fam):
        if f not in ("gaussian", "binary"):
            r.fail(("plan", "families", i), f"unknown family {f!r}")
    x_max = r.number(v.get("x_max", d.x_max), ("plan", "x_max"))
    if not x_max > 0:
        r.fail(("plan", "x_max"), "must be positive")
    return PlanConfig(fam, x_max)


def _verify(r: _Reader, raw: dict) -> VerifyConfig:
    d = VerifyConfig()
    p = ("verify",)
    v = r.mapping(raw.get("verify"), p, ("T", "i0", "u0_star", "families", "grid", "budget", "kkt_tol"))
    T = r.numbers(v["T"], p + ("T",), integer=True) if "T" in v else d.T
    i0 = r.numbers(v["i0"], p + ("i0",)) if "i0" in v else d.i0
    u0 = r.numbers(v["u0_star"], p + ("u0_star",)) if "u0_star" in v else d.u0_star
    fam = r.strings(v["families"], p + ("families",)) if "families" in v else d.families
    grid = r.grid(v.get("grid"), p + ("grid",), d.grid)
    budget = r.number(v.get("budget", d.budget), p + ("budget",))
    kkt_tol = r.number(v.get("kkt_tol", d.kkt_tol), p + ("kkt_tol",))
    for i, t in enumerate(T):
        if t < 2:
            r.fail(p + ("T", i), "horizon must be at least 2")
    for i, x in enumerate(i0):
        if not x > 0:
            r.fail(p + ("i0", i), "must be positive")
    for i, f in enumerate(fam):
        if f not in ("gaussian", "binary"):
            r.fail(p + ("families", i), f"unknown family {f!r}")
    if grid.count < 1 or not 0 < grid.lo < grid.hi:
        r.fail(p + ("grid",), "need count >= 1 and 0 < lo < hi")
    if not budget > 0:
        r.fail(p + ("budget",), "must be positive")
    return VerifyConfig(T, i0, u0, fam, grid, budget, kkt_tol)


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    try:
        node = yaml.compose(text)
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = f":{mark.line + 1}" if mark is not None else ""
        raise ConfigError(f"{source}{line}: YAML syntax error: {getattr(exc, 'problem', exc)}")
    lines = _marks(node) if node is not None else {}
    r = _Reader(source, lines)
    raw = r.mapping(raw, (), _SECTIONS)
    return RunConfig(_experiment(r, raw), _plan(r, raw), _verify(r, raw), source)


def load_config(path: Optional[str] = None) -> RunConfig:
    """Read a YAML config; ``None`` gives the defaults. I/O errors propagate as ``OSError``."""
    if path is None:
        return RunConfig()
    return parse_config(Path(path).read_text(), str(path))
