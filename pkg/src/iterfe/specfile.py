"""JSON equation files: loading with full validation, and writing back.

Schema (all keys except ``system`` and ``g`` optional)::

    {
      "system":    {"maps": [<map>, ...], "weights": [...], "periodic_order": 2},
      "g":         <function>,
      "h":         <function>,
      "endpoints": {"a": 0.0, "b": 0.0},
      "grid":      {"M": 1024, "x_min": 0.0, "x_max": 1.0},
      "params":    {"tol": 1e-6, "m_max": 2048, "n_values": [64, 128, 256, 512],
                    "shift_max": 256, "branch_budget": 10000000, "mc_samples": 10000,
                    "seed": 0, "method": "auto", "k_max": 100},
      "options":   {"command": "solve", "class": "bounded", "max_undecided": 0.0,
                    "points": [0.5], "n_samples": 100000, "max_steps": 10000,
                    "absorb_eps": 1e-9, "confirm_steps": 20}
    }

Map and function descriptors are the ``to_dict`` forms of the classes in
:mod:`iterfe.funcspace`.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .almostlim import AlmostLimitParams
from .errors import DomainError, SpecParseError, SpecValidationError
from .funcspace import EndpointPair, FunctionRep, Grid, fn_from_dict, map_from_dict
from .solver import SolveParams
from .stochastic import TrajectoryConfig
from .transfer import DEFAULT_BRANCH_BUDGET, WeightedSystem
from .verify import CLASS_SELECTORS

__all__ = ["NumericParams", "CommandOptions", "EquationSpec", "load_spec", "write_spec",
           "spec_from_dict", "COMMANDS", "METHODS"]

COMMANDS = ("solve", "solve-e0", "diagnose", "simulate", "verify")
METHODS = ("auto", "exact", "periodic", "monte_carlo", "grid")


@dataclass(frozen=True)
class NumericParams:
    tol: float = 1e-6
    m_max: int = 2048
    n_values: tuple[int, ...] = (64, 128, 256, 512)
    shift_max: int = 256
    branch_budget: int = DEFAULT_BRANCH_BUDGET
    mc_samples: int = 10_000
    seed: int = 0
    method: str = "auto"
    k_max: int = 100

    def almost(self) -> AlmostLimitParams:
        return AlmostLimitParams(self.n_values, self.shift_max, self.tol, self.m_max)

    def solve_params(self, workers: int = 1) -> SolveParams:
        return SolveParams(self.almost(), self.method, self.branch_budget, self.mc_samples,
                           self.seed, workers, self.k_max, m_cap=min(64, self.m_max))


@dataclass(frozen=True)
class CommandOptions:
    command: str = "solve"
    class_selector: str = "bounded"
    max_undecided: float = 0.0
    points: tuple[float, ...] = ()
    n_samples: int = 100_000
    max_steps: int = 10_000
    absorb_eps: float = 1e-9
    confirm_steps: int = 20

    def trajectory(self, seed: int) -> TrajectoryConfig:
        return TrajectoryConfig(self.max_steps, self.absorb_eps, self.confirm_steps, seed)


@dataclass(frozen=True)
class EquationSpec:
    system: WeightedSystem
    g: FunctionRep
    h: FunctionRep | None = None
    endpoints: EndpointPair = EndpointPair(0.0, 0.0)
    grid: Grid = Grid()
    params: NumericParams = NumericParams()
    options: CommandOptions = field(default_factory=CommandOptions)

    def to_dict(self) -> dict:
        opts = asdict(self.options)
        opts["class"] = opts.pop("class_selector")
        opts["points"] = list(self.options.points)
        params = asdict(self.params)
        params["n_values"] = list(self.params.n_values)
        d = {
            "system": self.system.to_dict(),
            "g": self.g.to_dict(),
            "endpoints": {"a": self.endpoints.a, "b": self.endpoints.b},
            "grid": {"M": self.grid.M, "x_min": self.grid.x_min, "x_max": self.grid.x_max},
            "params": params,
            "options": opts,
        }
        if self.grid.extra_points:
            d["grid"]["extra_points"] = list(self.grid.extra_points)
        if self.h is not None:
            d["h"] = self.h.to_dict()
        return d


def _section(raw, key, problems):
    val = raw.get(key, {})
    if not isinstance(val, dict):
        problems.append(f"{key} must be an object")
        return {}
    return val


def _build(cls, values: dict, renames: dict, problems: list, where: str):
    known = {f.name for f in fields(cls)}
    kwargs = {}
    for key, val in values.items():
        name = renames.get(key, key)
        if name not in known:
            problems.append(f"{where}: unknown key {key!r}")
            continue
        kwargs[name] = tuple(val) if isinstance(val, list) else val
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        problems.append(f"{where}: {exc}")
        return None


def _system(raw, problems):
    sysd = raw.get("system")
    if not isinstance(sysd, dict):
        problems.append("system must be an object with maps and weights")
        return None
    maps = []
    for i, md in enumerate(sysd.get("maps", [])):
        try:
            maps.append(map_from_dict(md))
        except (DomainError, KeyError, TypeError, ValueError) as exc:
            problems.append(f"system.maps[{i}]: {exc}")
    weights = sysd.get("weights", [])
    try:
        weights = [float(w) for w in weights]
    except (TypeError, ValueError):
        problems.append("system.weights must be numbers")
        return None
    if len(maps) != len(sysd.get("maps", [])):
        return None
    before = len(problems)
    if any(w < 0 for w in weights):
        problems.append("system.weights must be nonnegative")
    total = sum(weights)
    if abs(total - 1.0) > 1e-12:
        problems.append(f"weights sum {total:g}, expected 1")
    if len(weights) != len(maps):
        problems.append(f"{len(maps)} maps but {len(weights)} weights")
    if len(problems) > before:
        return None
    try:
        return WeightedSystem(tuple(maps), tuple(weights), sysd.get("periodic_order"))
    except DomainError as exc:
        problems.append(f"system: {exc}")
        return None


def _function(raw, key, problems):
    d = raw.get(key)
    if d is None:
        return None
    try:
        return fn_from_dict(d)
    except (DomainError, KeyError, TypeError, ValueError) as exc:
        problems.append(f"{key}: {exc}")
        return None


def spec_from_dict(raw: dict) -> EquationSpec:
    """Build and validate an equation file; every violated invariant is collected before raising."""
    if not isinstance(raw, dict):
        raise SpecValidationError(["top level must be an object"])
    problems: list[str] = []
    unknown = set(raw) - {"system", "g", "h", "endpoints", "grid", "params", "options"}
    problems += [f"unknown key {k!r}" for k in sorted(unknown)]
    system = _system(raw, problems)
    if "g" not in raw:
        problems.append("g is required")
    g = _function(raw, "g", problems)
    h = _function(raw, "h", problems)
    ends = _build(EndpointPair, {"a": 0.0, "b": 0.0, **_section(raw, "endpoints", problems)},
                  {}, problems, "endpoints")
    grid = _build(Grid, _section(raw, "grid", problems), {}, problems, "grid")
    params = _build(NumericParams, _section(raw, "params", problems), {}, problems, "params")
    options = _build(CommandOptions, _section(raw, "options", problems),
                     {"class": "class_selector"}, problems, "options")

    if g is not None:
        g0, g1 = g(np.array([0.0, 1.0]))
        if g0 != 0.0 or g1 != 0.0:
            problems.append(
                f"g(0)={g0:g}, g(1)={g1:g}: every map fixes 0 and 1, so any solution "
                "satisfies phi(0) = phi(0) + g(0) and phi(1) = phi(1) + g(1); g must vanish there")
    if h is not None and ends is not None:
        h0, h1 = h(np.array([0.0, 1.0]))
        if h0 != ends.a or h1 != ends.b:
            problems.append(f"h(0)={h0:g}, h(1)={h1:g} do not match endpoints a={ends.a:g}, b={ends.b:g}")
    if params is not None:
        if params.method not in METHODS:
            problems.append(f"params.method must be one of {METHODS}")
        try:
            params.solve_params()
        except (DomainError, TypeError) as exc:
            problems.append(f"params: {exc}")
    if options is not None:
        if options.command not in COMMANDS:
            problems.append(f"options.command must be one of {COMMANDS}")
        if options.class_selector not in CLASS_SELECTORS:
            problems.append(f"options.class must be one of {CLASS_SELECTORS}")
        if not 0.0 <= options.max_undecided <= 1.0:
            problems.append("options.max_undecided must lie in [0, 1]")
        if any(not 0.0 <= p <= 1.0 for p in options.points):
            problems.append("options.points must lie in [0, 1]")
        if options.n_samples < 100:
            problems.append("options.n_samples must be >= 100")
        try:
            options.trajectory(0)
        except DomainError as exc:
            problems.append(f"options: {exc}")
    if problems:
        raise SpecValidationError(problems)
    options = replace(options, points=tuple(float(p) for p in options.points))
    return EquationSpec(system, g, h, ends, grid, params, options)


def load_spec(path) -> EquationSpec:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise SpecParseError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SpecParseError(f"{path}: invalid JSON: {exc}") from exc
    return spec_from_dict(raw)


def write_spec(spec: EquationSpec, path) -> None:
    Path(path).write_text(json.dumps(spec.to_dict(), indent=2) + "\n")
