"""Bounded solutions of phi = T phi + g with phi(0) = a, phi(1) = b.

Homogeneous part: B_h(x) is the surrogate Banach limit of (T^m h(x))_m.
Particular part: B_*(x) is the surrogate Banach limit of the partial sums
g_k(x) = sum_{l<k} T^l g(x), obtained by the first strategy that applies:

1. finite Neumann sum, when T^m g vanishes on the grid;
2. truncated Neumann series, when its terms decay geometrically;
3. almost-limit of (g_k(x))_k.

All quantities are computed on a point set and, for residuals, at the images
f_n(x) of those points, so a reported residual is |phi - T phi - g| with
phi evaluated by the same procedure everywhere it is needed.  With
``method="grid"`` the operator is the grid chain (T followed by linear
interpolation) and residuals are those of the discretised equation.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .almostlim import CERTIFIED, AlmostLimitParams, almost_limit_rows
from .errors import (
    BoundaryViolation, DomainError, GUnboundedError, NoUniformConvergence,
    NotPeriodicError, NotSolvableError, NotUniformWeights,
)
from .funcspace import (
    Combination, Composed, EndpointPair, FunctionRep, Grid, GridFunction,
    affine, compose_map_power,
)
from .transfer import (
    DEFAULT_BRANCH_BUDGET, GridChain, IterateTable, WeightedSystem, iterate_table,
)

__all__ = [
    "SolveParams", "GBoundReport", "BgReport", "E0Solution",
    "ParticularSolutionReport", "SolveReport", "AdmissibilityVerdict",
    "partial_sum_gk", "check_G_bounded", "check_Bg_zero", "solve_E0",
    "solve_particular", "neumann_uniform", "neumann_finite", "solve_E",
    "periodic_closed_form", "admissibility_report", "solution_points",
]


@dataclass(frozen=True)
class SolveParams:
    """Knobs shared by every solver entry point.

    ``k_max``/``g_cap`` drive the g_k growth test, ``m_cap``/``finite_zero``
    the finite Neumann detection and ``l_max`` the truncated series.
    """

    almost: AlmostLimitParams = AlmostLimitParams()
    method: str = "auto"
    branch_budget: int = DEFAULT_BRANCH_BUDGET
    mc_samples: int = 10_000
    seed: int = 0
    workers: int = 1
    k_max: int = 100
    g_cap: float = 1e9
    m_cap: int = 64
    finite_zero: float = 1e-12
    l_max: int = 2048

    def __post_init__(self):
        if self.k_max < 2:
            raise DomainError("k_max must be >= 2")
        if max(self.k_max, self.m_cap) > self.almost.m_max:
            raise DomainError("k_max and m_cap must not exceed m_max")

    @property
    def tol(self) -> float:
        return self.almost.tol


def solution_points(grid, *special_sources) -> np.ndarray:
    """Grid points plus the special points (swap points, overrides) of the inputs."""
    special = []
    for src in special_sources:
        if src is not None:
            special.extend(src.special_points())
    if isinstance(grid, Grid):
        return grid.points(special)
    pts = np.concatenate([np.asarray(grid, dtype=float), special, [0.0, 1.0]])
    pts = pts[(pts >= 0.0) & (pts <= 1.0)]
    return np.unique(pts)


class _Stencil:
    """Point set, its T-images, and a matching iterate-table builder."""

    def __init__(self, sys: WeightedSystem, pts: np.ndarray, params: SolveParams):
        self.sys, self.params = sys, params
        self.pts = pts
        active = sys.active()
        self.p = np.array([q for _, q in active])
        if params.method == "grid":
            self.chain = GridChain.build(sys, pts)
            self.xs = self.chain.nodes
        else:
            self.chain = None
            images = [f(pts) for f, _ in active]
            self.xs = np.unique(np.concatenate([pts, *images]))
            self.img_idx = [np.searchsorted(self.xs, img) for img in images]
        self.pt_idx = np.searchsorted(self.xs, pts)

    def table(self, h: FunctionRep, m_max: int) -> IterateTable:
        prm = self.params
        return iterate_table(self.sys, h, self.xs, m_max, prm.method,
                             budget=prm.branch_budget, samples=prm.mc_samples,
                             seed=prm.seed, workers=prm.workers)

    def T(self, vals: np.ndarray) -> np.ndarray:
        """(T v) at the solution points, from values v on ``xs``."""
        if self.chain is not None:
            return self.chain.apply(vals)[self.pt_idx]
        stacked = np.stack([vals[i] for i in self.img_idx])
        return self.p @ stacked / self.p.sum()

    def images_ok(self, ok: np.ndarray) -> np.ndarray:
        """True at points whose own value and every T-image value are usable."""
        if self.chain is not None:
            mat = self.chain.matrix
            bad = np.add.reduceat((~ok[mat.indices]).astype(int), mat.indptr[:-1]) > 0
            return ok[self.pt_idx] & ~bad[self.pt_idx]
        res = ok[self.pt_idx].copy()
        for idx in self.img_idx:
            res &= ok[idx]
        return res


def _limits(rows, hw, params: AlmostLimitParams):
    results = almost_limit_rows(rows, params, hw)
    vals = np.array([r.value for r in results])
    status = np.array([r.status for r in results], dtype=object)
    return results, vals, status


def _residual(stencil, vals, g_pts, ok):
    """|phi - T phi - g| on certified points, NaN elsewhere."""
    vals_safe = np.where(np.isfinite(vals), vals, 0.0)
    res = np.abs(vals_safe[stencil.pt_idx] - stencil.T(vals_safe) - g_pts)
    usable = stencil.images_ok(ok)
    return np.where(usable, res, np.nan)


def _sup(arr) -> float:
    arr = np.asarray(arr, dtype=float)
    arr = arr[np.isfinite(arr)]
    return float(arr.max()) if arr.size else 0.0


def _grid_fn(pts, vals, ok) -> GridFunction | None:
    keep = ok & np.isfinite(vals)
    if not keep.any():
        return None
    return GridFunction(tuple(vals[keep]), xs=tuple(pts[keep]))


def _check_boundary_zero(g: FunctionRep):
    ends = g(np.array([0.0, 1.0]))
    if ends[0] != 0.0 or ends[1] != 0.0:
        raise BoundaryViolation(
            f"g(0)={ends[0]:g}, g(1)={ends[1]:g}: T preserves endpoint values, so "
            "a bounded solution can only exist when g vanishes at 0 and 1")


# ----------------------------------------------------------------------------
# g_k and the family G

def partial_sum_gk(sys: WeightedSystem, g: FunctionRep, k: int, x: float,
                   params: SolveParams = SolveParams()) -> float:
    """g_k(x) = sum_{l<k} T^l g(x)."""
    if k < 1:
        raise DomainError("k must be >= 1")
    _check_boundary_zero(g)
    table = iterate_table(sys, g, [x], k - 1, params.method,
                          budget=params.branch_budget, samples=params.mc_samples,
                          seed=params.seed)
    return float(table.partial[0, k - 1])


@dataclass(frozen=True)
class GBoundReport:
    """Running sup of |g_k| over the grid and k; ``slope`` is fitted over the last half of k."""

    bound: float
    unbounded: bool
    slope: float
    k_range: tuple[int, int]
    running_max: np.ndarray
    worst_point: float
    worst_sequence: np.ndarray

    def to_dict(self):
        return {
            "bound": self.bound if np.isfinite(self.bound) else "UNBOUNDED",
            "unbounded": self.unbounded, "slope": self.slope,
            "k_range": list(self.k_range), "worst_point": self.worst_point,
            "running_max_tail": self.running_max[-5:].tolist(),
        }


def _g_bound_from_partials(pts, partial, k_max, cap) -> GBoundReport:
    gk = np.abs(partial[:, :k_max])            # column j is g_{j+1}
    per_k = gk.max(axis=0)
    running = np.maximum.accumulate(per_k)
    k0 = k_max // 2
    ks = np.arange(k0, k_max + 1)
    R = running[ks - 1]
    slope = float(np.polyfit(ks, R, 1)[0]) if len(ks) > 1 else 0.0
    growth = slope * (ks[-1] - ks[0])
    end = float(R[-1])
    linear = slope > 1e-9 * max(1.0, end) and growth >= 0.25 * end
    unbounded = bool(end > cap or linear or not np.isfinite(end))
    worst = int(np.argmax(gk[:, -1]))
    return GBoundReport(
        float("inf") if unbounded else end, unbounded, slope, (int(ks[0]), int(ks[-1])),
        running, float(pts[worst]), partial[worst, :k_max].copy())


def check_G_bounded(sys: WeightedSystem, g: FunctionRep, grid, k_max: int = 100,
                    cap: float = 1e9, params: SolveParams = SolveParams()) -> GBoundReport:
    """Estimate sup_{x, k<=k_max} |g_k(x)| and flag sustained linear growth."""
    if k_max < 2:
        raise DomainError("k_max must be >= 2")
    _check_boundary_zero(g)
    pts = solution_points(grid, sys, g)
    table = iterate_table(sys, g, pts, k_max, params.method, budget=params.branch_budget,
                          samples=params.mc_samples, seed=params.seed, workers=params.workers)
    return _g_bound_from_partials(pts, table.partial, k_max, cap)


@dataclass(frozen=True)
class BgReport:
    sup_abs: float
    points: np.ndarray
    values: np.ndarray
    status: tuple[str, ...]
    k_values: dict = field(default_factory=dict)


def _bgk_rows(table: IterateTable, k: int, m_max: int):
    """Rows of (T^m g_k(x))_m = partial[m+k-1] - partial[m-1]."""
    part = np.concatenate([np.zeros((len(table.xs), 1)), table.partial], axis=1)
    m = np.arange(m_max + 1)
    rows = part[:, m + k] - part[:, m]
    hw = np.zeros_like(rows) if not table.half_width.any() else \
        np.repeat(table.partial_hw.max(axis=1, keepdims=True) * 2, m_max + 1, axis=1)
    return rows, hw


def check_Bg_zero(sys: WeightedSystem, g: FunctionRep, grid,
                  params: SolveParams = SolveParams(), ks: Sequence[int] = ()) -> BgReport:
    """sup over the grid of |surrogate limit of (T^m g(x))_m|; optionally B_{g_k} too."""
    pts = solution_points(grid, sys, g)
    m_max = params.almost.m_max
    extra = max(ks, default=1)
    table = iterate_table(sys, g, pts, m_max + extra, params.method,
                          budget=params.branch_budget, samples=params.mc_samples,
                          seed=params.seed, workers=params.workers)
    _, vals, status = _limits(table.values[:, :m_max + 1], table.half_width[:, :m_max + 1],
                              params.almost)
    ok = np.isin(status, CERTIFIED)
    k_values = {}
    for k in ks:
        rows, hw = _bgk_rows(table, k, m_max)
        _, kv, _ = _limits(rows, hw, params.almost)
        k_values[k] = kv
    return BgReport(_sup(np.abs(vals[ok])), pts, vals, tuple(status), k_values)


# ----------------------------------------------------------------------------
# Homogeneous equation

@dataclass(frozen=True)
class E0Solution:
    """B_h on the solution points; ``phi`` interpolates the certified ones."""

    points: np.ndarray
    values: np.ndarray
    status: tuple[str, ...]
    residual: np.ndarray
    residual_sup: float
    methods: tuple[str, ...]
    phi: GridFunction | None

    @property
    def certified(self) -> np.ndarray:
        return np.isin(np.array(self.status, dtype=object), CERTIFIED)


def _solve_e0_on(stencil: _Stencil, h: FunctionRep):
    prm = stencil.params
    table = stencil.table(h, prm.almost.m_max)
    _, vals, status = _limits(table.values, table.half_width, prm.almost)
    return table, vals, status


def solve_E0(sys: WeightedSystem, h: FunctionRep, grid,
             params: SolveParams = SolveParams()) -> E0Solution:
    """Surrogate B_h at every grid point; undecided points stay NaN."""
    pts = solution_points(grid, sys, h)
    st = _Stencil(sys, pts, params)
    table, vals, status = _solve_e0_on(st, h)
    ok = np.isin(status, CERTIFIED)
    res = _residual(st, vals, np.zeros(len(pts)), ok)
    pv = vals[st.pt_idx]
    pok = ok[st.pt_idx]
    methods = tuple(table.methods[i] for i in st.pt_idx)
    return E0Solution(pts, pv, tuple(status[st.pt_idx]), res, _sup(res), methods,
                      _grid_fn(pts, pv, pok))


# ----------------------------------------------------------------------------
# Particular solution

def _finite_terms(term_sup, m_cap, zero):
    """Least m <= m_cap with sup |T^m g| <= zero, or None."""
    hits = np.flatnonzero(term_sup[:m_cap + 1] <= zero)
    return int(hits[0]) if hits.size else None


def _uniform_terms(term_sup, tol, l_max):
    """Least L whose geometric tail bound t_L r / (1 - r) is <= tol, or None."""
    t = term_sup[:l_max + 1]
    for L in range(len(t)):
        if t[L] == 0.0:
            return L
        if L < 2:
            continue
        r = max(t[L] / t[L - 1] if t[L - 1] else 0.0, t[L - 1] / t[L - 2] if t[L - 2] else 0.0)
        if r < 1.0 and t[L] * r / (1.0 - r) <= tol:
            return L
    return None


@dataclass(frozen=True)
class ParticularSolutionReport:
    """B_* on the solution points with its provenance.

    ``method`` is ``neumann_finite``, ``neumann_uniform`` or ``almost_limit``;
    ``terms`` is the number of Neumann terms summed (None for almost_limit).
    """

    b_star: GridFunction | None
    points: np.ndarray
    values: np.ndarray
    status: tuple[str, ...]
    g_report: GBoundReport
    bg_residual: float
    method: str
    terms: int | None
    residual: np.ndarray
    residual_sup: float

    @property
    def g_family_bound(self) -> float:
        return self.g_report.bound

    def to_dict(self):
        return {
            "method": self.method, "terms": self.terms,
            "g_family": self.g_report.to_dict(), "bg_residual": self.bg_residual,
            "residual_sup": self.residual_sup,
            "undecided": int(sum(s not in CERTIFIED for s in self.status)),
        }


def _solve_particular_on(stencil: _Stencil, g: FunctionRep):
    prm = stencil.params
    _check_boundary_zero(g)
    m_max = prm.almost.m_max
    table = stencil.table(g, m_max)
    pts_rows = stencil.pt_idx
    g_report = _g_bound_from_partials(stencil.pts, table.partial[pts_rows], prm.k_max, prm.g_cap)
    if g_report.unbounded:
        raise GUnboundedError(
            f"g_k grows without bound (slope {g_report.slope:.6g} over k in "
            f"{g_report.k_range}, worst point x={g_report.worst_point:.6g})", g_report)

    _, bg_vals, bg_status = _limits(table.values[pts_rows], table.half_width[pts_rows], prm.almost)
    bg_residual = _sup(np.abs(bg_vals[np.isin(bg_status, CERTIFIED)]))

    exact = not table.half_width.any()
    term_sup = np.abs(table.values[pts_rows]).max(axis=0)
    method, terms = "almost_limit", None
    if exact:
        m = _finite_terms(term_sup, prm.m_cap, prm.finite_zero)
        if m is not None:
            method, terms = "neumann_finite", m
        else:
            L = _uniform_terms(term_sup, prm.tol, min(prm.l_max, m_max))
            if L is not None:
                method, terms = "neumann_uniform", L + 1
    if method == "almost_limit":
        _, vals, status = _limits(table.partial, table.partial_hw, prm.almost)
    else:
        vals = table.partial[:, terms - 1] if terms else np.zeros(len(stencil.xs))
        status = np.full(len(stencil.xs), "convergent", dtype=object)
    return table, vals, status, g_report, bg_residual, method, terms


def solve_particular(sys: WeightedSystem, g: FunctionRep, grid,
                     params: SolveParams = SolveParams()) -> ParticularSolutionReport:
    """Canonical particular solution B_* of phi = T phi + g."""
    pts = solution_points(grid, sys, g)
    st = _Stencil(sys, pts, params)
    return _particular_report(st, g, *_solve_particular_on(st, g))


def _particular_report(st, g, table, vals, status, g_report, bg_residual, method, terms):
    ok = np.isin(status, CERTIFIED)
    res = _residual(st, vals, g(st.pts), ok)
    pv = vals[st.pt_idx]
    return ParticularSolutionReport(
        _grid_fn(st.pts, pv, ok[st.pt_idx]), st.pts, pv, tuple(status[st.pt_idx]),
        g_report, bg_residual, method, terms, res, _sup(res))


def _exact_params(params: SolveParams, m_max: int) -> SolveParams:
    method = params.method if params.method in ("grid", "periodic") else "exact"
    return SolveParams(
        AlmostLimitParams(params.almost.n_values, params.almost.shift_max, params.almost.tol,
                          max(m_max, params.almost.m_max)),
        method, params.branch_budget, params.mc_samples, params.seed, params.workers,
        params.k_max, params.g_cap, params.m_cap, params.finite_zero, params.l_max)


def neumann_finite(sys: WeightedSystem, g: FunctionRep, grid, m_cap: int = 64,
                   params: SolveParams = SolveParams()) -> GridFunction | None:
    """sum_{l<m} T^l g for the least m <= m_cap with T^m g = 0 on the grid, else None."""
    _check_boundary_zero(g)
    pts = solution_points(grid, sys, g)
    prm = _exact_params(params, m_cap)
    table = iterate_table(sys, g, pts, m_cap, prm.method, budget=prm.branch_budget)
    m = _finite_terms(np.abs(table.values).max(axis=0), m_cap, prm.finite_zero)
    if m is None:
        return None
    vals = table.partial[:, m - 1] if m else np.zeros(len(pts))
    return GridFunction(tuple(vals), xs=tuple(pts))


def neumann_uniform(sys: WeightedSystem, g: FunctionRep, grid, tol: float = 1e-6,
                    l_max: int = 2048, params: SolveParams = SolveParams()) -> GridFunction:
    """Truncated sum_{l<=L} T^l g once a geometric tail bound certifies error <= tol."""
    _check_boundary_zero(g)
    pts = solution_points(grid, sys, g)
    prm = _exact_params(params, l_max)
    table = iterate_table(sys, g, pts, l_max, prm.method, budget=prm.branch_budget)
    L = _uniform_terms(np.abs(table.values).max(axis=0), tol, l_max)
    if L is None:
        raise NoUniformConvergence(f"no geometric tail bound <= {tol:g} within {l_max} terms")
    return GridFunction(tuple(table.partial[:, L]), xs=tuple(pts))


# ----------------------------------------------------------------------------
# Full equation

@dataclass(frozen=True)
class AdmissibilityVerdict:
    verdict: str            # admissible | not_admissible | undecided
    reason: str = ""
    class_selector: str = "bounded"

    def to_dict(self):
        return {"verdict": self.verdict, "reason": self.reason, "class": self.class_selector}


@dataclass(frozen=True)
class SolveReport:
    """phi = B_h + B_* on the solution points with residuals and diagnostics."""

    phi: GridFunction | None
    e0_part: GridFunction | None
    particular: ParticularSolutionReport
    points: np.ndarray
    values: np.ndarray
    status: tuple[str, ...]
    residual: np.ndarray
    residual_sup: float
    boundary: EndpointPair
    admissibility_verdict: AdmissibilityVerdict
    e0_values: np.ndarray = None
    warnings: tuple[str, ...] = ()
    e0_half_width: np.ndarray | None = None

    def to_dict(self):
        return {
            "residual_sup": self.residual_sup,
            "boundary": {"a": self.boundary.a, "b": self.boundary.b},
            "admissibility": self.admissibility_verdict.to_dict(),
            "particular": self.particular.to_dict(),
            "points": len(self.points),
            "undecided": int(sum(s not in CERTIFIED for s in self.status)),
            "warnings": list(self.warnings),
            "e0_half_width_max": (None if self.e0_half_width is None
                                  else float(np.max(self.e0_half_width))),
        }


def _combine_status(s1, s2):
    out = []
    for a, b in zip(s1, s2):
        if a not in CERTIFIED:
            out.append(a)
        elif b not in CERTIFIED:
            out.append(b)
        else:
            out.append("convergent" if a == b == "convergent" else "almost_convergent")
    return np.array(out, dtype=object)


def _class_verdict(b_star, pts, class_selector, tol):
    from .verify import class_report, class_member

    if class_selector == "bounded":
        return True, ""
    if b_star is None:
        return None, "B_* not certified anywhere"
    rep = class_report(b_star, pts)
    ok, why = class_member(rep, class_selector, tol)
    return ok, why


def solve_E(sys: WeightedSystem, g: FunctionRep, h: FunctionRep | None,
            endpoints: EndpointPair, grid, params: SolveParams = SolveParams(),
            class_selector: str = "bounded") -> SolveReport:
    """phi = B_h + B_*; h defaults to the affine interpolant of the endpoints."""
    if h is None:
        h = affine(endpoints.a, endpoints.b)
    hv = h(np.array([0.0, 1.0]))
    if hv[0] != endpoints.a or hv[1] != endpoints.b:
        raise DomainError(f"h(0)={hv[0]:g}, h(1)={hv[1]:g} do not match a={endpoints.a:g}, b={endpoints.b:g}")
    _check_boundary_zero(g)
    pts = solution_points(grid, sys, g, h)
    st = _Stencil(sys, pts, params)
    _, e0_vals, e0_status = _solve_e0_on(st, h)
    part = _solve_particular_on(st, g)
    _, b_vals, b_status = part[:3]
    particular = _particular_report(st, g, *part)

    vals = e0_vals + b_vals
    status = _combine_status(e0_status, b_status)
    ok = np.isin(status, CERTIFIED)
    res = _residual(st, vals, g(pts), ok)
    pv, pok = vals[st.pt_idx], ok[st.pt_idx]
    phi = _grid_fn(pts, pv, pok)

    b_ok = np.isin(b_status, CERTIFIED)[st.pt_idx]
    if not b_ok.all():
        verdict = AdmissibilityVerdict("undecided", "B_* undecided at some points", class_selector)
    else:
        member, why = _class_verdict(particular.b_star, pts, class_selector, params.tol)
        if member is None:
            verdict = AdmissibilityVerdict("undecided", why, class_selector)
        elif member:
            verdict = AdmissibilityVerdict("admissible", "family G bounded and B_* certified",
                                           class_selector)
        else:
            verdict = AdmissibilityVerdict("not_admissible", why, class_selector)
    ends = np.searchsorted(pts, [0.0, 1.0])
    return SolveReport(
        phi, _grid_fn(pts, e0_vals[st.pt_idx], np.isin(e0_status, CERTIFIED)[st.pt_idx]),
        particular, pts, pv, tuple(status[st.pt_idx]), res, _sup(res),
        EndpointPair(float(pv[ends[0]]), float(pv[ends[1]])), verdict,
        e0_vals[st.pt_idx])


def admissibility_report(sys: WeightedSystem, g: FunctionRep, class_selector: str = "bounded",
                         grid=Grid(), params: SolveParams = SolveParams()) -> AdmissibilityVerdict:
    """Is g admissible: G bounded, B_* certified, and B_* in the selected class?"""
    try:
        rep = solve_particular(sys, g, grid, params)
    except GUnboundedError as exc:
        return AdmissibilityVerdict("not_admissible", f"G unbounded: {exc}", class_selector)
    if any(s not in CERTIFIED for s in rep.status):
        return AdmissibilityVerdict("undecided", "B_* undecided at some points", class_selector)
    member, why = _class_verdict(rep.b_star, rep.points, class_selector, params.tol)
    if member is None:
        return AdmissibilityVerdict("undecided", why, class_selector)
    if not member:
        return AdmissibilityVerdict("not_admissible", why, class_selector)
    return AdmissibilityVerdict("admissible", "family G bounded and B_* certified", class_selector)


def periodic_closed_form(sys: WeightedSystem, g: FunctionRep, h: FunctionRep,
                         grid) -> FunctionRep:
    """phi = (1/(N+1)) sum_n h o f^n + g, valid iff sum_n g(f^n(x)) = 0 everywhere.

    Raises :class:`NotSolvableError` listing grid points where the orbit sum of
    g is nonzero.
    """
    if sys.periodic_order is None:
        raise NotPeriodicError("system has no periodic_order")
    w = np.array(sys.weights)
    if not np.all(w == w[0]):
        raise NotUniformWeights("closed form needs p_0 = ... = p_N")
    pts = solution_points(grid, sys, g, h)
    f = sys.maps[1] if len(sys.maps) > 1 else sys.maps[0]
    size = len(sys.maps)
    orbit_sum = sum(g(compose_map_power(f, n)(pts)) for n in range(size))
    bad = np.abs(orbit_sum) > 1e-12
    if bad.any():
        raise NotSolvableError(
            "orbit sums of g do not vanish", list(zip(pts[bad].tolist(), orbit_sum[bad].tolist())))
    terms = [(1.0 / size, Composed(h, compose_map_power(f, n))) for n in range(size)]
    return Combination(tuple(terms) + ((1.0, g),))
