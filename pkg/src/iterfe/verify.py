"""Hypothesis checks on weighted systems and grid estimates of function classes.

Every answer here is a finite-grid estimate: a failing witness is a concrete
point (or pair) where an inequality is violated, while a pass only means no
violation was found at the sampled resolution.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, HypothesisNotMet
from .funcspace import FunctionRep, Grid, GridFunction, jordan_decompose
from .transfer import GridChain, WeightedSystem, mean_map

__all__ = [
    "HypothesisReport", "SlopeCheck", "ClassReport", "IncreasingCheck",
    "check_hypotheses", "residual_E", "class_report", "class_member",
    "jordan_parts_solve_E0", "increasing_solution_check", "ETA_SCHEDULE",
    "CLASS_SELECTORS",
]

ETA_SCHEDULE = tuple(2.0 ** -j for j in range(1, 11))
CLASS_SELECTORS = ("bounded", "continuous_at_0", "continuous_at_1", "lipschitz", "bv", "monotone")
_SLACK = 1e-12
_JUMP = 0.05


def _points(grid, *sources) -> np.ndarray:
    from .solver import solution_points

    return solution_points(grid, *sources)


@dataclass(frozen=True)
class SlopeCheck:
    """Endpoint difference-quotient bound at ``x0``; ``eta`` is the widest passing window."""

    x0: float
    passed: bool
    eta: float | None
    witness: float | None

    def to_dict(self):
        return vars(self).copy()


@dataclass(frozen=True)
class HypothesisReport:
    h1_monotone: bool
    h1_witness: float | None
    h2_mean_lipschitz: bool
    h2_witness: tuple[float, float] | None
    h2_excess: float
    h3: tuple[SlopeCheck, SlopeCheck]
    mean_identity: float
    grid_size: int

    def h3_at(self, x0: float) -> SlopeCheck:
        return self.h3[0] if x0 == 0.0 else self.h3[1]

    def to_dict(self):
        return {
            "h1_monotone": {"pass": self.h1_monotone, "witness": self.h1_witness},
            "h2_mean_lipschitz": {"pass": self.h2_mean_lipschitz,
                                  "witness": list(self.h2_witness) if self.h2_witness else None,
                                  "excess": self.h2_excess},
            "h3_endpoint_slope": [c.to_dict() for c in self.h3],
            "mean_identity": self.mean_identity,
            "grid_size": self.grid_size,
        }


def _h1(sys, pts):
    for f, _ in sys.active():
        drops = np.flatnonzero(np.diff(f(pts)) < -_SLACK)
        if drops.size:
            return False, float(pts[drops[0]])
    return True, None


def _h2(sys, pts, block=256):
    active = sys.active()
    imgs = [(f(pts), p) for f, p in active]
    worst, witness = -np.inf, None
    for start in range(0, len(pts), block):
        xs = pts[start:start + block, None]
        lhs = sum(p * np.abs(fx[start:start + block, None] - fx[None, :]) for fx, p in imgs)
        excess = lhs - np.abs(xs - pts[None, :])
        i, j = np.unravel_index(np.argmax(excess), excess.shape)
        if excess[i, j] > worst:
            worst = float(excess[i, j])
            witness = (float(pts[start + i]), float(pts[j]))
    ok = worst <= _SLACK
    return ok, (None if ok else witness), max(worst, 0.0)


def _h3(sys, pts, x0):
    near = pts[pts != x0]
    dist = np.abs(near - x0)
    worst_q = np.full(len(near), -np.inf)
    for f, _ in sys.active():
        q = (f(near) - f(np.array([x0]))[0]) / (near - x0)
        worst_q = np.maximum(worst_q, q)
    witness = None
    for eta in ETA_SCHEDULE:
        inside = dist <= eta
        if not inside.any():
            break
        bad = inside & (worst_q > 1.0 + _SLACK)
        if not bad.any():
            return SlopeCheck(x0, True, eta, None)
        witness = float(near[bad][np.argmin(dist[bad])])
    return SlopeCheck(x0, False, None, witness)


def check_hypotheses(sys: WeightedSystem, grid=Grid()) -> HypothesisReport:
    """Monotonicity of every map, mean Lipschitz bound, endpoint slopes and mean identity."""
    pts = _points(grid, sys)
    h1, w1 = _h1(sys, pts)
    h2, w2, ex2 = _h2(sys, pts)
    h3 = (_h3(sys, pts, 0.0), _h3(sys, pts, 1.0))
    mid = float(np.max(np.abs(mean_map(sys, pts) - pts)))
    return HypothesisReport(h1, w1, h2, w2, ex2, h3, mid, len(pts))


def residual_E(phi: FunctionRep, sys: WeightedSystem, g: FunctionRep | None, grid) -> float:
    """sup over the grid of |phi - T phi - g|; ``g=None`` means g = 0."""
    pts = _points(grid, sys, phi, g)
    t_phi = sum(p * phi(f(pts)) for f, p in sys.active())
    res = phi(pts) - t_phi
    if g is not None:
        res = res - g(pts)
    return float(np.max(np.abs(res)))


@dataclass(frozen=True)
class ClassReport:
    """Grid estimates of the class-defining quantities of a function.

    ``endpoint_modulus_0``/``_1`` are max |h(x) - h(x0)| over the narrowest
    window of ``ETA_SCHEDULE`` containing grid points; ``modulus_profile``
    keeps all windows as (width, modulus) pairs.
    """

    sup_norm: float
    lipschitz_estimate: float
    max_jump: float
    total_variation: float
    monotone: bool
    endpoint_modulus_0: float
    endpoint_modulus_1: float
    modulus_profile_0: tuple[tuple[float, float], ...]
    modulus_profile_1: tuple[tuple[float, float], ...]
    boundary: tuple[float, float]
    grid_size: int

    def to_dict(self):
        d = vars(self).copy()
        d["modulus_profile_0"] = [list(t) for t in self.modulus_profile_0]
        d["modulus_profile_1"] = [list(t) for t in self.modulus_profile_1]
        d["boundary"] = list(self.boundary)
        return d


def _modulus_profile(pts, vals, x0):
    v0 = vals[pts == x0][0]
    out = []
    for eta in ETA_SCHEDULE:
        inside = (np.abs(pts - x0) <= eta) & (pts != x0)
        if inside.any():
            out.append((eta, float(np.max(np.abs(vals[inside] - v0)))))
    return tuple(out)


def class_report(h: FunctionRep, grid=Grid()) -> ClassReport:
    """Sup norm, Lipschitz quotient, variation, monotonicity and endpoint moduli."""
    pts = _points(grid, h)
    if isinstance(h, GridFunction):
        pts = np.unique(np.concatenate([pts, h.nodes()]))
    vals = np.asarray(h(pts), dtype=float)
    dv = np.diff(vals)
    dx = np.diff(pts)
    prof0 = _modulus_profile(pts, vals, 0.0)
    prof1 = _modulus_profile(pts, vals, 1.0)
    return ClassReport(
        sup_norm=float(np.max(np.abs(vals))),
        lipschitz_estimate=float(np.max(np.abs(dv) / dx)) if dx.size else 0.0,
        max_jump=float(np.max(np.abs(dv))) if dv.size else 0.0,
        total_variation=float(np.sum(np.abs(dv))),
        monotone=bool(np.all(dv >= -_SLACK)),
        endpoint_modulus_0=prof0[-1][1] if prof0 else float("nan"),
        endpoint_modulus_1=prof1[-1][1] if prof1 else float("nan"),
        modulus_profile_0=prof0, modulus_profile_1=prof1,
        boundary=(float(vals[0]), float(vals[-1])),
        grid_size=len(pts),
    )


def _continuous(profile, tol):
    if not profile:
        return None, "no grid points near the endpoint"
    narrow = profile[-1][1]
    if narrow <= 10 * tol:
        return True, ""
    if len(profile) > 1 and narrow <= 0.75 * profile[-2][1]:
        return True, ""
    return False, f"endpoint modulus {narrow:.3g} does not shrink with the window"


def class_member(rep: ClassReport, selector: str, tol: float = 1e-6):
    """(member, reason) for one class selector; member is None when undecidable on this grid."""
    if selector == "bounded":
        return bool(np.isfinite(rep.sup_norm)), ""
    if selector == "continuous_at_0":
        return _continuous(rep.modulus_profile_0, tol)
    if selector == "continuous_at_1":
        return _continuous(rep.modulus_profile_1, tol)
    if selector == "lipschitz":
        if rep.max_jump > _JUMP:
            return False, f"jump of {rep.max_jump:.3g} between adjacent grid points"
        return True, ""
    if selector == "bv":
        return bool(np.isfinite(rep.total_variation)), ""
    if selector == "monotone":
        return (True, "") if rep.monotone else (False, "decreasing step found")
    raise DomainError(f"unknown class selector {selector!r}; expected one of {CLASS_SELECTORS}")


def _require_h1(sys, grid):
    rep = check_hypotheses(sys, grid)
    if not rep.h1_monotone:
        raise HypothesisNotMet(f"some map decreases near x={rep.h1_witness:g}")
    return rep


def jordan_parts_solve_E0(phi: FunctionRep, sys: WeightedSystem, grid=Grid(),
                          chain: bool = False) -> tuple[float, float]:
    """Homogeneous residuals of the upper and lower variation parts of ``phi``.

    With ``chain=True`` the residual uses the grid chain on the nodes (T
    followed by linear interpolation), matching solutions produced by the
    ``grid`` method.
    """
    _require_h1(sys, grid)
    pts = _points(grid, sys, phi)
    if isinstance(phi, GridFunction):
        pts = np.unique(np.concatenate([pts, phi.nodes()]))
    plus, minus = jordan_decompose(phi, pts)
    if chain:
        gc = GridChain.build(sys, pts)
        res = []
        for part in (plus, minus):
            v = part(gc.nodes)
            res.append(float(np.max(np.abs(v - gc.apply(v)))))
        return res[0], res[1]
    return residual_E(plus, sys, None, pts), residual_E(minus, sys, None, pts)


@dataclass(frozen=True)
class IncreasingCheck:
    passed: bool
    monotone: bool
    residual: float
    undecided: int


def increasing_solution_check(sys: WeightedSystem, h: FunctionRep, grid=Grid(),
                              params=None) -> IncreasingCheck:
    """Solve the homogeneous equation for nondecreasing h and check the output is nondecreasing."""
    from .solver import SolveParams, solve_E0

    params = params or SolveParams()
    _require_h1(sys, grid)
    pts = _points(grid, sys, h)
    if np.any(np.diff(h(pts)) < -_SLACK):
        raise DomainError("h must be nondecreasing on the grid")
    sol = solve_E0(sys, h, grid, params)
    ok = sol.certified
    vals = sol.values[ok]
    monotone = bool(np.all(np.diff(vals) >= -10 * params.tol))
    tol_ok = sol.residual_sup <= 10 * params.tol
    return IncreasingCheck(monotone and tol_ok, monotone, sol.residual_sup, int((~ok).sum()))
