"""Self-maps of [0, 1] fixing both endpoints and bounded functions on [0, 1].

Every object here is immutable and evaluates vectorised over numpy arrays.
Maps are called as ``f(x)``; the public helpers :func:`eval_map` and
:func:`eval_fn` add the domain check and accept scalars.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import DomainError

__all__ = [
    "UnitMap", "Identity", "Power", "MirrorPower", "PiecewiseLinear",
    "PointSwap", "PointCycle", "Composition", "FunctionRep", "ClosedForm", "GridFunction",
    "Combination", "Composed", "EndpointPair", "Grid", "eval_map", "eval_fn",
    "compose_map_power", "jordan_decompose", "map_from_dict", "fn_from_dict",
    "constant", "polynomial", "affine",
]


def _as_unit_array(x):
    arr = np.asarray(x, dtype=float)
    if arr.size and (np.isnan(arr).any() or arr.min() < 0.0 or arr.max() > 1.0):
        raise DomainError(f"argument outside [0, 1]: {x!r}")
    return arr


def _unwrap(arr, like):
    return float(arr) if np.ndim(like) == 0 else arr


# ----------------------------------------------------------------------------
# Maps

class UnitMap:
    """A self-map of [0, 1] with f(0) = 0 and f(1) = 1."""

    kind = "abstract"

    def __call__(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def special_points(self) -> tuple[float, ...]:
        """Points where the map is not determined by its continuous part."""
        return ()

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Identity(UnitMap):
    kind = "identity"

    def __call__(self, x):
        return np.array(x, dtype=float, copy=True)

    def to_dict(self):
        return {"kind": self.kind}


@dataclass(frozen=True)
class Power(UnitMap):
    """x -> x**exponent."""

    exponent: float
    kind = "power"

    def __post_init__(self):
        if not self.exponent >= 1.0:
            raise DomainError(f"power exponent must be >= 1, got {self.exponent}")

    def __call__(self, x):
        return np.power(np.asarray(x, dtype=float), self.exponent)

    def to_dict(self):
        return {"kind": self.kind, "exponent": self.exponent}


@dataclass(frozen=True)
class MirrorPower(UnitMap):
    """x -> 1 - (1 - x)**exponent."""

    exponent: float
    kind = "mirror_power"

    def __post_init__(self):
        if not self.exponent >= 1.0:
            raise DomainError(f"mirror_power exponent must be >= 1, got {self.exponent}")

    def __call__(self, x):
        return 1.0 - np.power(1.0 - np.asarray(x, dtype=float), self.exponent)

    def to_dict(self):
        return {"kind": self.kind, "exponent": self.exponent}


@dataclass(frozen=True)
class PiecewiseLinear(UnitMap):
    knots: tuple[tuple[float, float], ...]
    kind = "piecewise_linear"

    def __post_init__(self):
        knots = tuple((float(a), float(b)) for a, b in self.knots)
        object.__setattr__(self, "knots", knots)
        if len(knots) < 2 or knots[0] != (0.0, 0.0) or knots[-1] != (1.0, 1.0):
            raise DomainError("piecewise_linear knots must start at (0,0) and end at (1,1)")
        xs = np.array([k[0] for k in knots])
        ys = np.array([k[1] for k in knots])
        if np.any(np.diff(xs) <= 0):
            raise DomainError("piecewise_linear knot abscissae must be strictly increasing")
        if ys.min() < 0.0 or ys.max() > 1.0:
            raise DomainError("piecewise_linear knot values must lie in [0, 1]")

    def __call__(self, x):
        xs = [k[0] for k in self.knots]
        ys = [k[1] for k in self.knots]
        return np.interp(np.asarray(x, dtype=float), xs, ys)

    def to_dict(self):
        return {"kind": self.kind, "knots": [list(k) for k in self.knots]}


@dataclass(frozen=True)
class PointSwap(UnitMap):
    """Exchanges u and v for every listed pair; identity elsewhere.

    Matching is by exact floating-point equality, so the swapped points must
    be passed around as the very same floats (JSON round-trips preserve them).
    """

    pairs: tuple[tuple[float, float], ...]
    kind = "point_swap"

    def __post_init__(self):
        pairs = tuple((float(u), float(v)) for u, v in self.pairs)
        object.__setattr__(self, "pairs", pairs)
        seen = set()
        for u, v in pairs:
            if u == v or not (0.0 < u < 1.0 and 0.0 < v < 1.0):
                raise DomainError(f"point_swap pair ({u}, {v}) must be distinct points of (0, 1)")
            if u in seen or v in seen:
                raise DomainError("point_swap pairs must be disjoint")
            seen.update((u, v))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.array(x, copy=True)
        for u, v in self.pairs:
            out[x == u] = v
            out[x == v] = u
        return out

    def special_points(self):
        return tuple(p for pair in self.pairs for p in pair)

    def to_dict(self):
        return {"kind": self.kind, "pairs": [list(p) for p in self.pairs]}


@dataclass(frozen=True)
class PointCycle(UnitMap):
    """Sends each listed point to the next one in its cycle; identity elsewhere.

    A cycle ``(c0, c1, c2)`` maps c0 -> c1 -> c2 -> c0, so with cycles of
    lengths dividing k the map satisfies f^k = id.  Matching is by exact
    floating-point equality, as for :class:`PointSwap`.
    """

    cycles: tuple[tuple[float, ...], ...]
    kind = "point_cycle"

    def __post_init__(self):
        cycles = tuple(tuple(float(c) for c in cyc) for cyc in self.cycles)
        object.__setattr__(self, "cycles", cycles)
        flat = [c for cyc in cycles for c in cyc]
        if any(len(cyc) < 2 for cyc in cycles):
            raise DomainError("point_cycle cycles need at least two points")
        if not all(0.0 < c < 1.0 for c in flat):
            raise DomainError("point_cycle points must lie in (0, 1)")
        if len(set(flat)) != len(flat):
            raise DomainError("point_cycle points must be distinct")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.array(x, copy=True)
        for cyc in self.cycles:
            for src, dst in zip(cyc, cyc[1:] + cyc[:1]):
                out[x == src] = dst
        return out

    def special_points(self):
        return tuple(c for cyc in self.cycles for c in cyc)

    def to_dict(self):
        return {"kind": self.kind, "cycles": [list(c) for c in self.cycles]}


@dataclass(frozen=True)
class Composition(UnitMap):
    """``maps[0] o maps[1] o ... o maps[-1]``; the last map is applied first."""

    maps: tuple[UnitMap, ...]
    kind = "composition"

    def __post_init__(self):
        object.__setattr__(self, "maps", tuple(self.maps))

    def __call__(self, x):
        y = np.asarray(x, dtype=float)
        for f in reversed(self.maps):
            y = f(y)
        return y

    def special_points(self):
        pts = []
        for f in self.maps:
            pts.extend(f.special_points())
        return tuple(dict.fromkeys(pts))

    def to_dict(self):
        return {"kind": self.kind, "maps": [f.to_dict() for f in self.maps]}


def eval_map(f: UnitMap, x):
    """Evaluate ``f`` at a scalar or array ``x`` in [0, 1]."""
    arr = _as_unit_array(x)
    y = np.clip(f(arr), 0.0, 1.0)
    return _unwrap(y, x)


def compose_map_power(f: UnitMap, n: int) -> UnitMap:
    """The n-fold composition f^n, with f^0 the identity."""
    if n < 0:
        raise DomainError("composition power must be nonnegative")
    if n == 0:
        return Identity()
    if n == 1:
        return f
    return Composition((f,) * n)


_MAP_KINDS = {
    "identity": lambda d: Identity(),
    "power": lambda d: Power(float(d["exponent"])),
    "mirror_power": lambda d: MirrorPower(float(d["exponent"])),
    "piecewise_linear": lambda d: PiecewiseLinear(tuple(tuple(k) for k in d["knots"])),
    "point_swap": lambda d: PointSwap(tuple(tuple(p) for p in d["pairs"])),
    "point_cycle": lambda d: PointCycle(tuple(tuple(c) for c in d["cycles"])),
    "composition": lambda d: Composition(tuple(map_from_dict(m) for m in d["maps"])),
}


def map_from_dict(d: dict) -> UnitMap:
    try:
        build = _MAP_KINDS[d["kind"]]
    except KeyError:
        raise DomainError(f"unknown map kind in {d!r}") from None
    return build(d)


# ----------------------------------------------------------------------------
# Functions

class FunctionRep:
    """A bounded real function on [0, 1] with a known sup-norm bound."""

    kind = "abstract"
    declared_bound: float

    def __call__(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def special_points(self) -> tuple[float, ...]:
        """Points whose values are not given by the smooth/interpolated part."""
        return ()

    def constant_value(self) -> float | None:
        """The value if the function is known to be constant, else None."""
        return None

    def to_dict(self) -> dict:
        raise NotImplementedError


_MASKS = ("none", "below_one", "at_one")


@dataclass(frozen=True)
class ClosedForm(FunctionRep):
    """``mask(x) * P(inner(x))`` for a polynomial P with ascending ``coeffs``.

    ``mask`` is ``"none"``, ``"below_one"`` (indicator of [0, 1)) or
    ``"at_one"`` (indicator of {1}); ``inner`` is an optional UnitMap.
    """

    coeffs: tuple[float, ...]
    mask: str = "none"
    inner: UnitMap | None = None
    declared_bound: float = field(default=None)
    kind = "closed_form"

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs) or (0.0,))
        if self.mask not in _MASKS:
            raise DomainError(f"mask must be one of {_MASKS}")
        # |P(y)| <= sum |c_i| for y in [0, 1]
        bound = float(sum(abs(c) for c in self.coeffs))
        if self.declared_bound is None:
            object.__setattr__(self, "declared_bound", bound)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        y = x if self.inner is None else self.inner(x)
        out = npoly.polyval(y, self.coeffs) * np.ones_like(x)
        if self.mask == "below_one":
            out = np.where(x < 1.0, out, 0.0)
        elif self.mask == "at_one":
            out = np.where(x == 1.0, out, 0.0)
        return out

    def special_points(self):
        return () if self.inner is None else self.inner.special_points()

    def constant_value(self):
        if self.mask == "none" and not any(self.coeffs[1:]):
            return self.coeffs[0]
        return None

    def to_dict(self):
        d = {"kind": self.kind, "coeffs": list(self.coeffs)}
        if self.mask != "none":
            d["mask"] = self.mask
        if self.inner is not None:
            d["inner"] = self.inner.to_dict()
        return d


def constant(c: float) -> ClosedForm:
    return ClosedForm((c,))


def polynomial(*coeffs: float) -> ClosedForm:
    return ClosedForm(coeffs)


def affine(a: float, b: float) -> ClosedForm:
    """The interpolant a + (b - a) x."""
    return ClosedForm((a, b - a))


@dataclass(frozen=True)
class GridFunction(FunctionRep):
    """Sampled function with optional exact-point overrides.

    Nodes are ``xs`` when given, otherwise ``len(values)`` uniform abscissae
    on ``[x_min, x_max]``.  Outside the node range the edge value is used.
    Off-node evaluation carries an O(spacing * local slope) error.
    """

    values: tuple[float, ...]
    x_min: float = 0.0
    x_max: float = 1.0
    interpolation: str = "linear"
    overrides: tuple[tuple[float, float], ...] = ()
    xs: tuple[float, ...] | None = None
    declared_bound: float = field(default=None)

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", values)
        overrides = tuple(sorted((float(p), float(v)) for p, v in self.overrides))
        object.__setattr__(self, "overrides", overrides)
        if self.interpolation not in ("linear", "nearest"):
            raise DomainError("interpolation must be 'linear' or 'nearest'")
        if self.xs is not None:
            xs = tuple(float(v) for v in self.xs)
            object.__setattr__(self, "xs", xs)
            if len(xs) != len(values) or np.any(np.diff(xs) <= 0):
                raise DomainError("grid nodes must be strictly increasing and match values")
        elif len(values) >= 2 and not self.x_min < self.x_max:
            raise DomainError("grid requires x_min < x_max")
        if not values:
            raise DomainError("grid needs at least one value")
        pts = [p for p, _ in overrides]
        if len(set(pts)) != len(pts) or any(not 0.0 <= p <= 1.0 for p in pts):
            raise DomainError("override points must be distinct points of [0, 1]")
        actual = max(abs(v) for v in values + tuple(v for _, v in overrides))
        if self.declared_bound is None:
            object.__setattr__(self, "declared_bound", actual)
        elif self.declared_bound < actual:
            raise DomainError(f"declared_bound {self.declared_bound} below max |value| {actual}")

    @property
    def kind(self):
        return "grid_with_overrides" if self.overrides else "grid"

    def nodes(self) -> np.ndarray:
        if self.xs is not None:
            return np.array(self.xs)
        if len(self.values) == 1:
            return np.array([self.x_min])
        return np.linspace(self.x_min, self.x_max, len(self.values))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        nodes = self.nodes()
        vals = np.array(self.values)
        if len(vals) == 1:
            out = np.full_like(x, vals[0])
        elif self.interpolation == "linear":
            out = np.interp(x, nodes, vals)
        else:
            idx = np.clip(np.searchsorted(nodes, x), 1, len(nodes) - 1)
            left = nodes[idx - 1]
            right = nodes[idx]
            idx = np.where(x - left <= right - x, idx - 1, idx)
            out = vals[idx]
        if self.overrides:
            out = np.array(out, dtype=float, copy=True)
            for p, v in self.overrides:
                out[x == p] = v
        return out

    def special_points(self):
        return tuple(p for p, _ in self.overrides)

    def to_dict(self):
        d = {"kind": self.kind, "values": list(self.values),
             "interpolation": self.interpolation}
        if self.xs is not None:
            d["xs"] = list(self.xs)
        else:
            d["x_min"], d["x_max"] = self.x_min, self.x_max
        if self.overrides:
            d["overrides"] = [list(o) for o in self.overrides]
        return d


@dataclass(frozen=True)
class Combination(FunctionRep):
    """Finite linear combination sum c_i f_i."""

    terms: tuple[tuple[float, FunctionRep], ...]
    kind = "sum"

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple((float(c), f) for c, f in self.terms))

    @property
    def declared_bound(self):
        return float(sum(abs(c) * f.declared_bound for c, f in self.terms))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for c, f in self.terms:
            out = out + c * f(x)
        return out

    def special_points(self):
        pts = []
        for _, f in self.terms:
            pts.extend(f.special_points())
        return tuple(dict.fromkeys(pts))

    def to_dict(self):
        return {"kind": self.kind,
                "terms": [{"coef": c, "fn": f.to_dict()} for c, f in self.terms]}


@dataclass(frozen=True)
class Composed(FunctionRep):
    """fn o f."""

    fn: FunctionRep
    f: UnitMap
    kind = "compose"

    @property
    def declared_bound(self):
        return self.fn.declared_bound

    def __call__(self, x):
        return self.fn(self.f(np.asarray(x, dtype=float)))

    def special_points(self):
        return tuple(dict.fromkeys(self.fn.special_points() + self.f.special_points()))

    def to_dict(self):
        return {"kind": self.kind, "fn": self.fn.to_dict(), "map": self.f.to_dict()}


def eval_fn(h: FunctionRep, x):
    """Evaluate ``h`` at a scalar or array ``x`` in [0, 1]."""
    arr = _as_unit_array(x)
    return _unwrap(np.asarray(h(arr), dtype=float), x)


def fn_from_dict(d: dict) -> FunctionRep:
    kind = d.get("kind")
    if kind == "closed_form":
        inner = map_from_dict(d["inner"]) if d.get("inner") else None
        return ClosedForm(tuple(d["coeffs"]), d.get("mask", "none"), inner,
                          d.get("declared_bound"))
    if kind == "constant":
        return constant(float(d["value"]))
    if kind in ("grid", "grid_with_overrides"):
        return GridFunction(
            tuple(d["values"]), d.get("x_min", 0.0), d.get("x_max", 1.0),
            d.get("interpolation", "linear"),
            tuple(tuple(o) for o in d.get("overrides", ())),
            tuple(d["xs"]) if d.get("xs") is not None else None,
            d.get("declared_bound"),
        )
    if kind == "sum":
        return Combination(tuple((t["coef"], fn_from_dict(t["fn"])) for t in d["terms"]))
    if kind == "compose":
        return Composed(fn_from_dict(d["fn"]), map_from_dict(d["map"]))
    raise DomainError(f"unknown function kind in {d!r}")


# ----------------------------------------------------------------------------
# Grids and boundary data

@dataclass(frozen=True)
class EndpointPair:
    a: float
    b: float

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b)):
            raise DomainError("endpoint values must be finite")


@dataclass(frozen=True)
class Grid:
    """Uniform sample of [x_min, x_max] plus extra points; 0 and 1 are always included."""

    M: int = 1024
    x_min: float = 0.0
    x_max: float = 1.0
    extra_points: tuple[float, ...] = ()

    def __post_init__(self):
        if self.M < 1 or not 0.0 <= self.x_min < self.x_max <= 1.0:
            raise DomainError("grid needs M >= 1 and 0 <= x_min < x_max <= 1")
        object.__setattr__(self, "extra_points", tuple(float(p) for p in self.extra_points))

    def uniform(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.M + 1)

    def points(self, special: Sequence[float] = ()) -> np.ndarray:
        pts = np.concatenate([self.uniform(), self.extra_points, special, [0.0, 1.0]])
        pts = pts[(pts >= 0.0) & (pts <= 1.0)]
        return np.unique(pts)


# ----------------------------------------------------------------------------
# Jordan decomposition

def jordan_decompose(h: FunctionRep, xs=None) -> tuple[GridFunction, GridFunction]:
    """Upper and lower variation of ``h`` sampled at ``xs``.

    Both parts are nondecreasing, vanish at the first node, and satisfy
    ``plus - minus == h - h(xs[0])`` on the nodes.  When ``xs`` is omitted
    and ``h`` is a grid function, its nodes and override points are used.
    """
    if xs is None:
        if not isinstance(h, GridFunction):
            raise DomainError("xs required unless h is a GridFunction")
        xs = np.concatenate([h.nodes(), h.special_points()])
    xs = np.unique(np.asarray(xs, dtype=float))
    vals = np.asarray(h(xs), dtype=float)
    d = np.diff(vals)
    plus = np.concatenate([[0.0], np.cumsum(np.maximum(d, 0.0))])
    minus = np.concatenate([[0.0], np.cumsum(np.maximum(-d, 0.0))])
    if len(xs) == 1:
        return GridFunction((0.0,), xs=tuple(xs)), GridFunction((0.0,), xs=tuple(xs))
    return GridFunction(tuple(plus), xs=tuple(xs)), GridFunction(tuple(minus), xs=tuple(xs))
