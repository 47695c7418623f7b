"""The transfer operator Th(x) = sum_n p_n h(f_n(x)) and its iterates.

Four ways to evaluate T^m h(x) are provided:

* exact enumeration of all words (``exact_tree``), with coinciding branch
  points merged so systems with small orbits stay cheap;
* the alpha-table fast path for periodic systems ``{f^0, ..., f^N}``;
* Monte Carlo over i.i.d. letter streams;
* a Markov-chain discretisation on a node set (``grid_chain``), i.e. T
  followed by linear interpolation.  It is not exact, but it preserves
  endpoint values, monotonicity, Lipschitz constants and constants.

Every evaluator returns a convex combination of h-values, and results are
clipped to the range of the values combined so endpoint preservation and
sup-norm non-expansion survive floating-point rounding.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import partial
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from ._parallel import chunked, ordered_map
from .errors import BudgetExceeded, DomainError, NotPeriodicError, OutOfRangeError
from .funcspace import (
    FunctionRep, Identity, UnitMap, _as_unit_array, compose_map_power,
)

__all__ = [
    "WeightedSystem", "IterateEstimate", "AlphaTable", "IterateTable",
    "TransferImage", "GridChain", "apply_T", "iterate_exact", "iterate_mc",
    "build_alpha_table", "iterate_periodic", "mean_map", "iterate_table",
    "DEFAULT_BRANCH_BUDGET",
]

DEFAULT_BRANCH_BUDGET = 10_000_000
AUTO_FRONTIER_PER_POINT = 4096
CI_Z = 1.96
_TAG_ITERATES = 0x17E2


def _test_grid(special=()):
    return np.unique(np.concatenate([np.linspace(0.0, 1.0, 257), special]))


@dataclass(frozen=True)
class WeightedSystem:
    """Maps f_n with probabilities p_n; the countable version of (Omega, P).

    ``periodic_order = N + 1`` declares ``maps[n] == f^n`` for a single map
    ``f = maps[1]`` with ``f^(N+1) = id``.  ``truncation_error`` is the
    sup-norm error bound introduced by :meth:`from_countable`.
    """

    maps: tuple[UnitMap, ...]
    weights: tuple[float, ...]
    periodic_order: int | None = None
    truncation_error: float = 0.0

    def __post_init__(self):
        maps = tuple(self.maps)
        weights = tuple(float(p) for p in self.weights)
        object.__setattr__(self, "maps", maps)
        object.__setattr__(self, "weights", weights)
        if not maps or len(maps) != len(weights):
            raise DomainError("need one weight per map and at least one map")
        if min(weights) < 0.0:
            raise DomainError("weights must be nonnegative")
        total = sum(weights)
        if abs(total - 1.0) > 1e-12:
            raise DomainError(f"weights sum {total:g}, expected 1")
        ends = np.array([0.0, 1.0])
        for f in maps:
            if not np.array_equal(f(ends), ends):
                raise DomainError(f"{f!r} does not fix 0 and 1")
        if self.periodic_order is not None:
            self._check_periodic()

    def _check_periodic(self):
        order = self.periodic_order
        if order != len(self.maps) or order < 1:
            raise DomainError("periodic_order must equal the number of maps")
        pts = _test_grid(self.special_points())
        if not np.array_equal(self.maps[0](pts), pts):
            raise DomainError("periodic systems need maps[0] == identity")
        if order == 1:
            return
        f = self.maps[1]
        for n, fn in enumerate(self.maps):
            if not np.allclose(fn(pts), compose_map_power(f, n)(pts), rtol=0, atol=1e-14):
                raise DomainError(f"maps[{n}] is not f^{n}")
        if not np.allclose(compose_map_power(f, order)(pts), pts, rtol=0, atol=1e-14):
            raise DomainError(f"f^{order} is not the identity on the test grid")

    @classmethod
    def periodic(cls, f: UnitMap, weights: Sequence[float]) -> "WeightedSystem":
        """The system {f^0, ..., f^N} for an f with f^(N+1) = id."""
        maps = tuple(compose_map_power(f, n) for n in range(len(weights)))
        return cls(maps, tuple(weights), periodic_order=len(weights))

    @classmethod
    def from_countable(cls, maps, weights, tau: float = 1e-12, bound: float = 1.0):
        """Drop the tail of a long family once its weight is <= tau and renormalise.

        The sup-norm error on functions bounded by ``bound`` is at most
        ``2 * bound * tail``.
        """
        maps = list(maps)
        w = np.asarray(list(weights), dtype=float)
        if len(maps) != len(w):
            raise DomainError("need one weight per map")
        tails = np.concatenate([np.cumsum(w[::-1])[::-1], [0.0]])
        keep = int(np.argmax(tails <= tau)) if np.any(tails <= tau) else len(w)
        keep = max(keep, 1)
        tail = float(tails[keep])
        kept = w[:keep] / w[:keep].sum()
        return cls(tuple(maps[:keep]), tuple(kept), truncation_error=2.0 * bound * tail)

    @property
    def N(self) -> int:
        return len(self.maps) - 1

    def active(self) -> list[tuple[UnitMap, float]]:
        return [(f, p) for f, p in zip(self.maps, self.weights) if p > 0.0]

    def special_points(self) -> tuple[float, ...]:
        pts = []
        for f in self.maps:
            pts.extend(f.special_points())
        return tuple(dict.fromkeys(pts))

    def to_dict(self) -> dict:
        d = {"maps": [f.to_dict() for f in self.maps], "weights": list(self.weights)}
        if self.periodic_order is not None:
            d["periodic_order"] = self.periodic_order
        return d


@dataclass(frozen=True)
class IterateEstimate:
    value: float
    half_width: float
    method: str
    m: int

    def __post_init__(self):
        if (self.half_width != 0.0) and self.method != "monte_carlo":
            raise DomainError("only Monte Carlo estimates carry a half-width")


@dataclass(frozen=True)
class AlphaTable:
    """Row ``m`` (1-based) holds alpha_{m, n}, n = 0..N."""

    entries: np.ndarray

    @property
    def m_max(self) -> int:
        return self.entries.shape[0]

    def row(self, m: int) -> np.ndarray:
        if m < 0 or m > self.m_max:
            raise OutOfRangeError(f"m={m} outside table range 0..{self.m_max}")
        if m == 0:
            e = np.zeros(self.entries.shape[1])
            e[0] = 1.0
            return e
        return self.entries[m - 1]


@dataclass(frozen=True)
class TransferImage(FunctionRep):
    """The function Th, evaluated lazily."""

    system: WeightedSystem
    fn: FunctionRep
    kind = "transfer_image"

    @property
    def declared_bound(self):
        return self.fn.declared_bound

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        active = self.system.active()
        vals = np.stack([self.fn(f(x)) for f, _ in active])
        p = np.array([q for _, q in active])
        out = np.tensordot(p, vals, axes=1) / p.sum()
        return np.clip(out, vals.min(axis=0), vals.max(axis=0))

    def special_points(self):
        return tuple(dict.fromkeys(self.fn.special_points() + self.system.special_points()))

    def to_dict(self):
        return {"kind": self.kind, "system": self.system.to_dict(), "fn": self.fn.to_dict()}


def apply_T(sys: WeightedSystem, h: FunctionRep) -> FunctionRep:
    return TransferImage(sys, h)


def mean_map(sys: WeightedSystem, x):
    """m(x) = sum_n p_n f_n(x)."""
    arr = _as_unit_array(x)
    out = sum(p * f(arr) for f, p in sys.active())
    out = np.clip(out, 0.0, 1.0)
    return float(out) if np.ndim(x) == 0 else out


# ----------------------------------------------------------------------------
# Exact enumeration

def _merge(pid, y, w):
    keep = w > 0.0
    pid, y, w = pid[keep], y[keep], w[keep]
    order = np.lexsort((y, pid))
    pid, y, w = pid[order], y[order], w[order]
    new = np.ones(len(y), dtype=bool)
    new[1:] = (pid[1:] != pid[:-1]) | (y[1:] != y[:-1])
    starts = np.flatnonzero(new)
    return pid[starts], y[starts], np.add.reduceat(w, starts)


def _frontier_value(pid, vals, w, npts):
    starts = np.flatnonzero(np.concatenate([[True], pid[1:] != pid[:-1]]))
    if len(starts) != npts:
        raise DomainError("every point must keep a nonempty frontier")
    total = np.add.reduceat(w * vals, starts) / np.add.reduceat(w, starts)
    lo = np.minimum.reduceat(vals, starts)
    hi = np.maximum.reduceat(vals, starts)
    return np.clip(total, lo, hi)


def _exact_rows(sys, h, xs, m_max, budget):
    xs = np.asarray(xs, dtype=float)
    npts = len(xs)
    out = np.empty((npts, m_max + 1))
    out[:, 0] = h(xs)
    active = sys.active()
    maps = [f for f, _ in active]
    probs = [p for _, p in active]
    pid, y, w = np.arange(npts), xs.copy(), np.ones(npts)
    for m in range(1, m_max + 1):
        images = [f(y) for f in maps]
        if all(np.array_equal(img, y) for img in images):
            # every branch point is a common fixed point: the sequence is constant from here
            out[:, m:] = out[:, m - 1:m]
            break
        pid2 = np.tile(pid, len(maps))
        y2 = np.concatenate(images)
        w2 = np.concatenate([w * p for p in probs])
        pid, y, w = _merge(pid2, y2, w2)
        if len(y) > budget:
            raise BudgetExceeded(
                f"branch frontier of {len(y)} points at m={m} exceeds budget {budget}")
        out[:, m] = _frontier_value(pid, h(y), w, npts)
    return out


def iterate_exact(sys: WeightedSystem, h: FunctionRep, m: int, x: float,
                  budget: int = DEFAULT_BRANCH_BUDGET) -> IterateEstimate:
    """T^m h(x) as the weighted sum over all length-m words.

    Words are composed innermost-last, f_{n_1}(...f_{n_m}(x)...).  Branches
    landing on the same point are merged, so ``budget`` bounds the number of
    distinct branch points rather than (N+1)^m.
    """
    if m < 0:
        raise DomainError("m must be nonnegative")
    _as_unit_array(x)
    rows = _exact_rows(sys, h, [x], m, budget)
    return IterateEstimate(float(rows[0, m]), 0.0, "exact_tree", m)


# ----------------------------------------------------------------------------
# Periodic fast path

def build_alpha_table(sys: WeightedSystem, m_max: int) -> AlphaTable:
    """alpha_{1,n} = p_n, alpha_{m+1,n} = sum_k alpha_{m,k} p_{(n-k) mod (N+1)}."""
    if sys.periodic_order is None:
        raise NotPeriodicError("system has no periodic_order")
    if m_max < 1:
        raise DomainError("m_max must be >= 1")
    p = np.array(sys.weights)
    size = len(p)
    # step[k, n] = p_{(n - k) mod size}, so row_{m+1} = row_m @ step
    idx = (np.arange(size)[None, :] - np.arange(size)[:, None]) % size
    step = p[idx]
    rows = np.empty((m_max, size))
    rows[0] = p
    filled, power = 1, step
    while filled < m_max:
        take = min(filled, m_max - filled)
        rows[filled:filled + take] = rows[:take] @ power
        filled += take
        power = power @ power if filled < m_max else power
    return AlphaTable(rows)


def _orbit_values(sys, h, xs):
    f = sys.maps[1] if len(sys.maps) > 1 else Identity()
    cols, y = [], np.asarray(xs, dtype=float)
    for _ in range(len(sys.maps)):
        cols.append(h(y))
        y = f(y)
    return np.stack(cols, axis=1)


def iterate_periodic(sys: WeightedSystem, h: FunctionRep, m: int, x: float,
                     table: AlphaTable) -> IterateEstimate:
    """T^m h(x) = sum_n alpha_{m,n} h(f^n(x))."""
    _as_unit_array(x)
    alpha = table.row(m)
    hv = _orbit_values(sys, h, [x])[0]
    value = float(np.clip(alpha @ hv, hv.min(), hv.max()))
    return IterateEstimate(value, 0.0, "alpha_table", m)


def _periodic_rows(sys, h, xs, m_max, table=None):
    if table is None or table.m_max < m_max:
        table = build_alpha_table(sys, max(m_max, 1))
    hv = _orbit_values(sys, h, xs)
    out = np.empty((len(hv), m_max + 1))
    out[:, 0] = hv[:, 0]
    out[:, 1:] = hv @ table.entries[:m_max].T
    return np.clip(out, hv.min(axis=1, keepdims=True), hv.max(axis=1, keepdims=True))


# ----------------------------------------------------------------------------
# Monte Carlo

def _point_rng(seed: int, x: float, tag: int, block: int = 0) -> np.random.Generator:
    """Counter-based stream keyed on (seed, bits of x, tag, block)."""
    xbits = int(np.float64(x).view(np.uint64))
    key = np.random.SeedSequence([int(seed) % 2**64, xbits, tag, block])
    return np.random.Generator(np.random.Philox(key))


def _mean_hw(v):
    if v[0] == v[-1] and np.all(v == v[0]):
        return float(v[0]), 0.0
    return float(v.mean()), float(CI_Z * v.std(ddof=1) / np.sqrt(len(v)))


def _mc_rows(sys, h, x, m_max, samples, seed):
    """Mean/half-width of h(X_m) and of sum_{l<=m} h(X_l) along sampled paths."""
    active = sys.active()
    maps = [f for f, _ in active]
    cdf = np.cumsum([p for _, p in active])
    cdf[-1] = np.inf
    rng = _point_rng(seed, x, _TAG_ITERATES)
    out = np.zeros((4, m_max + 1))
    y = np.full(samples, float(x))
    v = h(y)
    cum = v.copy()
    out[0, 0], out[1, 0] = _mean_hw(v)
    out[2, 0], out[3, 0] = out[0, 0], out[1, 0]
    for m in range(1, m_max + 1):
        if len(maps) == 1:
            y = maps[0](y)
        else:
            letters = np.searchsorted(cdf, rng.random(samples), side="right")
            nxt = np.empty_like(y)
            for n, f in enumerate(maps):
                sel = letters == n
                nxt[sel] = f(y[sel])
            y = nxt
        v = h(y)
        cum += v
        out[0, m], out[1, m] = _mean_hw(v)
        out[2, m], out[3, m] = _mean_hw(cum)
    return out


def iterate_mc(sys: WeightedSystem, h: FunctionRep, m: int, x: float,
               samples: int, seed: int) -> IterateEstimate:
    """Sample mean of h(f^m(x, .)) with a 95% normal half-width.

    Letters are drawn in trajectory order (outermost last); since letters are
    i.i.d. this has the law of the innermost-last word.
    """
    if samples < 2:
        raise DomainError("need at least 2 samples")
    if m < 0:
        raise DomainError("m must be nonnegative")
    _as_unit_array(x)
    if m == 0:
        return IterateEstimate(float(h(np.array([float(x)]))[0]), 0.0, "monte_carlo", 0)
    rows = _mc_rows(sys, h, x, m, samples, seed)
    return IterateEstimate(float(rows[0, m]), float(rows[1, m]), "monte_carlo", m)


# ----------------------------------------------------------------------------
# Grid chain

@dataclass(frozen=True)
class GridChain:
    """T followed by linear interpolation on ``nodes`` (a stochastic matrix)."""

    nodes: np.ndarray
    matrix: sp.csr_matrix

    @classmethod
    def build(cls, sys: WeightedSystem, nodes) -> "GridChain":
        nodes = np.unique(np.concatenate([np.asarray(nodes, dtype=float), [0.0, 1.0]]))
        n = len(nodes)
        rows, cols, vals = [], [], []
        ar = np.arange(n)
        for f, p in sys.active():
            y = np.clip(f(nodes), 0.0, 1.0)
            idx = np.clip(np.searchsorted(nodes, y, side="right") - 1, 0, n - 2)
            t = (y - nodes[idx]) / (nodes[idx + 1] - nodes[idx])
            rows += [ar, ar]
            cols += [idx, idx + 1]
            vals += [p * (1.0 - t), p * t]
        mat = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                            shape=(n, n))
        mat.sum_duplicates()
        mat.eliminate_zeros()
        mat = sp.diags(1.0 / np.asarray(mat.sum(axis=1)).ravel()) @ mat
        return cls(nodes, sp.csr_matrix(mat))

    def apply(self, v: np.ndarray) -> np.ndarray:
        mat = self.matrix
        out = mat @ v
        gathered = v[mat.indices]
        lo = np.minimum.reduceat(gathered, mat.indptr[:-1])
        hi = np.maximum.reduceat(gathered, mat.indptr[:-1])
        return np.clip(out, lo, hi)

    def rows(self, h_vals: np.ndarray, m_max: int) -> np.ndarray:
        out = np.empty((len(self.nodes), m_max + 1))
        v = np.asarray(h_vals, dtype=float)
        out[:, 0] = v
        for m in range(1, m_max + 1):
            v = self.apply(v)
            out[:, m] = v
        return out


# ----------------------------------------------------------------------------
# Batched iterate tables

@dataclass(frozen=True)
class IterateTable:
    """T^m h(x) for m = 0..m_max at every x, plus running sums.

    ``partial[:, j]`` is sum_{l<=j} T^l h(x), i.e. the partial sum with j+1 terms.
    """

    xs: np.ndarray
    values: np.ndarray
    half_width: np.ndarray
    partial: np.ndarray
    partial_hw: np.ndarray
    methods: tuple[str, ...] = field(default=())

    def row_index(self, x) -> np.ndarray:
        idx = np.searchsorted(self.xs, x)
        idx = np.clip(idx, 0, len(self.xs) - 1)
        if not np.all(self.xs[idx] == x):
            raise DomainError("requested point not in table")
        return idx


def _exact_like(rows, method):
    zeros = np.zeros_like(rows)
    return rows, zeros, np.cumsum(rows, axis=1), zeros.copy(), method


def _chunk_rows(xs, sys, h, m_max, method, budget, samples, seed):
    xs = np.asarray(xs, dtype=float)
    if method in ("auto", "periodic") and sys.periodic_order is not None:
        return _exact_like(_periodic_rows(sys, h, xs, m_max), "alpha_table")
    if method == "periodic":
        raise NotPeriodicError("system has no periodic_order")
    if method in ("auto", "exact"):
        # auto only tries enumeration while orbits stay small per point
        cap = budget if method == "exact" else min(budget, AUTO_FRONTIER_PER_POINT * len(xs))
        try:
            return _exact_like(_exact_rows(sys, h, xs, m_max, cap), "exact_tree")
        except BudgetExceeded:
            if method == "exact":
                raise
    stats = [_mc_rows(sys, h, x, m_max, samples, seed) for x in xs]
    vals = np.stack([s[0] for s in stats])
    hw = np.stack([s[1] for s in stats])
    part = np.stack([s[2] for s in stats])
    phw = np.stack([s[3] for s in stats])
    return vals, hw, part, phw, "monte_carlo"


def iterate_table(sys: WeightedSystem, h: FunctionRep, xs, m_max: int,
                  method: str = "auto", *, budget: int = DEFAULT_BRANCH_BUDGET,
                  samples: int = 10_000, seed: int = 0, workers: int = 1,
                  chunk: int = 128) -> IterateTable:
    """Iterate sequences at many points.

    ``method`` is ``auto`` (alpha table if periodic, else exact enumeration,
    falling back to Monte Carlo per chunk when the budget is exceeded),
    ``exact``, ``periodic``, ``monte_carlo`` or ``grid``.  Chunks have a
    fixed size, so the output does not depend on ``workers``.
    """
    xs = np.unique(_as_unit_array(np.atleast_1d(xs)))
    c = h.constant_value()
    if c is not None and method != "monte_carlo":
        # T fixes constants exactly
        vals, hw, part, phw, label = _exact_like(np.full((len(xs), m_max + 1), c),
                                                 "grid_chain" if method == "grid" else "exact_tree")
        return IterateTable(xs, vals, hw, part, phw, (label,) * len(xs))
    if method == "grid":
        chain = GridChain.build(sys, xs)
        rows = chain.rows(h(chain.nodes), m_max)[np.searchsorted(chain.nodes, xs)]
        vals, hw, part, phw, _ = _exact_like(rows, "grid_chain")
        return IterateTable(xs, vals, hw, part, phw, ("grid_chain",) * len(xs))
    if method not in ("auto", "exact", "periodic", "monte_carlo"):
        raise DomainError(f"unknown iterate method {method!r}")
    job = partial(_chunk_rows, sys=sys, h=h, m_max=m_max, method=method,
                  budget=budget, samples=samples, seed=seed)
    parts = ordered_map(job, chunked(xs, chunk), workers)
    methods = []
    for part_, block in zip(parts, chunked(xs, chunk)):
        methods.extend([part_[4]] * len(block))
    return IterateTable(
        xs,
        np.concatenate([p[0] for p in parts]),
        np.concatenate([p[1] for p in parts]),
        np.concatenate([p[2] for p in parts]),
        np.concatenate([p[3] for p in parts]),
        tuple(methods),
    )
