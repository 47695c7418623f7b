"""Random iteration x <- f_n(x) with i.i.d. letters n ~ p, and absorption at 1.

For boundary values 0 and 1, the probability that the random iterates
converge to 1 solves the homogeneous equation.  A finite trajectory cannot
witness a limit, so absorption is declared once the state stays within
``absorb_eps`` of one endpoint for ``confirm_steps`` consecutive steps;
trajectories that never settle within ``max_steps`` are counted as
unresolved and reported.

Trajectories are simulated in fixed blocks, each with its own counter-based
stream keyed on (seed, x, block), so results do not depend on how blocks are
spread over workers.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import partial

import numpy as np

from ._parallel import ordered_map
from .almostlim import CERTIFIED
from .errors import DomainError, TooManyUnresolved
from .funcspace import EndpointPair, FunctionRep, Grid
from .solver import (
    AdmissibilityVerdict, SolveParams, SolveReport, _grid_fn,
    _particular_report, _residual, _Stencil, _solve_particular_on, _sup,
    solution_points,
)
from .transfer import CI_Z, WeightedSystem, _point_rng, mean_map

__all__ = [
    "TrajectoryConfig", "AbsorptionEstimate", "sample_trajectory",
    "absorption_probability", "solve_E_probabilistic", "wilson_interval",
    "ABSORBED_ONE", "ABSORBED_ZERO", "UNRESOLVED",
]

ABSORBED_ONE = "absorbed_at_one"
ABSORBED_ZERO = "absorbed_at_zero"
UNRESOLVED = "unresolved"
_OUTCOMES = (ABSORBED_ZERO, ABSORBED_ONE, UNRESOLVED)
_TAG_SINGLE = 0x5A1
_TAG_BLOCK = 0xAB5
BLOCK = 4096
MAX_UNRESOLVED = 0.05


@dataclass(frozen=True)
class TrajectoryConfig:
    max_steps: int = 10_000
    absorb_eps: float = 1e-9
    confirm_steps: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.max_steps < 1 or self.confirm_steps < 1:
            raise DomainError("max_steps and confirm_steps must be positive")
        if not 0.0 < self.absorb_eps < 0.5:
            raise DomainError("absorb_eps must lie in (0, 1/2)")


@dataclass(frozen=True)
class AbsorptionEstimate:
    """Fraction of resolved trajectories absorbed at 1, with a Wilson 95% interval.

    Started exactly at 0 or 1 the outcome is deterministic and the interval
    collapses to the point.
    """

    x: float
    p_hat: float
    ci_low: float
    ci_high: float
    n_samples: int
    n_unresolved: int
    n_one: int

    @property
    def half_width(self) -> float:
        return max(self.p_hat - self.ci_low, self.ci_high - self.p_hat)

    def to_dict(self):
        return vars(self).copy()


def wilson_interval(successes: int, n: int, z: float = CI_Z) -> tuple[float, float]:
    if n <= 0:
        return 0.0, 1.0
    p = successes / n
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return float(max(0.0, centre - half)), float(min(1.0, centre + half))


def _simulate(sys: WeightedSystem, x: float, n: int, cfg: TrajectoryConfig,
              rng: np.random.Generator) -> np.ndarray:
    """Outcome codes (index into _OUTCOMES) of n independent trajectories from x."""
    active = sys.active()
    maps = [f for f, _ in active]
    cdf = np.cumsum([p for _, p in active])
    cdf /= cdf[-1]
    out = np.full(n, 2, dtype=np.int8)
    if x == 0.0 or x == 1.0:
        out[:] = int(x == 1.0)
        return out
    state = np.full(n, float(x))
    streak = np.zeros(n, dtype=np.int64)
    side = np.full(n, -1, dtype=np.int8)
    idx = np.arange(n)
    eps, need = cfg.absorb_eps, cfg.confirm_steps
    for _ in range(cfg.max_steps):
        if idx.size == 0:
            break
        letters = np.searchsorted(cdf, rng.random(idx.size), side="right")
        letters = np.minimum(letters, len(maps) - 1)
        for k, f in enumerate(maps):
            sel = letters == k
            if sel.any():
                state[sel] = f(state[sel])
        near0 = state <= eps
        near1 = state >= 1.0 - eps
        now = np.where(near1, 1, np.where(near0, 0, -1)).astype(np.int8)
        streak = np.where((now >= 0) & (now == side), streak + 1, np.where(now >= 0, 1, 0))
        side = now
        exact = (state == 0.0) | (state == 1.0)
        done = exact | (streak >= need)
        if done.any():
            out[idx[done]] = np.where(state[done] >= 0.5, 1, 0)
            keep = ~done
            idx, state, streak, side = idx[keep], state[keep], streak[keep], side[keep]
    return out


def sample_trajectory(sys: WeightedSystem, x: float, cfg: TrajectoryConfig = TrajectoryConfig()) -> str:
    """Outcome of one random trajectory started at x."""
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"x={x} outside [0, 1]")
    rng = _point_rng(cfg.seed, x, _TAG_SINGLE)
    return _OUTCOMES[_simulate(sys, x, 1, cfg, rng)[0]]


def _block_counts(task, sys, x, cfg):
    block, size = task
    codes = _simulate(sys, x, size, cfg, _point_rng(cfg.seed, x, _TAG_BLOCK, block))
    return np.bincount(codes, minlength=3)


def absorption_probability(sys: WeightedSystem, x: float, n_samples: int = 100_000,
                           cfg: TrajectoryConfig = TrajectoryConfig(), workers: int = 1,
                           max_unresolved: float = MAX_UNRESOLVED) -> AbsorptionEstimate:
    """Estimate P(iterates from x converge to 1).

    Raises :class:`TooManyUnresolved` (carrying the estimate) when more than
    ``max_unresolved`` of the trajectories never settle.
    """
    if n_samples < 100:
        raise DomainError("n_samples must be >= 100")
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"x={x} outside [0, 1]")
    x = float(x)
    if x in (0.0, 1.0):
        p = float(x)
        return AbsorptionEstimate(x, p, p, p, n_samples, 0, int(p) * n_samples)
    tasks = [(b, min(BLOCK, n_samples - b * BLOCK)) for b in range(-(-n_samples // BLOCK))]
    counts = sum(ordered_map(partial(_block_counts, sys=sys, x=x, cfg=cfg), tasks, workers))
    n_zero, n_one, n_unres = (int(c) for c in counts)
    resolved = n_zero + n_one
    p_hat = n_one / resolved if resolved else float("nan")
    lo, hi = wilson_interval(n_one, resolved)
    est = AbsorptionEstimate(x, p_hat, lo, hi, n_samples, n_unres, n_one)
    if n_unres > max_unresolved * n_samples:
        raise TooManyUnresolved(
            f"{n_unres} of {n_samples} trajectories from x={x:g} unresolved", est)
    return est


def _mean_map_warnings(sys, pts):
    out = []
    inner = pts[(pts > 0.0) & (pts < 1.0)]
    if inner.size:
        gap = np.abs(mean_map(sys, inner) - inner)
        if np.any(gap <= 1e-12):
            where = float(inner[np.argmin(gap)])
            out.append(f"mean map fixes x={where:g} inside (0, 1); the absorption "
                       "solution need not be the only one with these boundary values")
        # continuity probe: compare m just left and right of each point
        mid = mean_map(sys, inner)
        lo = mean_map(sys, np.clip(inner - 1e-9, 0.0, 1.0))
        hi = mean_map(sys, np.clip(inner + 1e-9, 0.0, 1.0))
        jump = np.maximum(np.abs(hi - mid), np.abs(mid - lo))
        if jump.max() > 1e-6:
            where = float(inner[np.argmax(jump)])
            out.append(f"mean map looks discontinuous near x={where:g}")
    return out


def solve_E_probabilistic(sys: WeightedSystem, g: FunctionRep, grid=Grid(),
                          cfg: TrajectoryConfig = TrajectoryConfig(),
                          params: SolveParams = SolveParams(), n_samples: int | None = None,
                          max_unresolved: float = MAX_UNRESOLVED) -> SolveReport:
    """phi = P(iterates converge to 1) + B_* for boundary values a = 0, b = 1."""
    n_samples = n_samples or params.mc_samples
    pts = solution_points(grid, sys, g)
    notes = _mean_map_warnings(sys, pts)
    for msg in notes:
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    st = _Stencil(sys, pts, params)
    part = _solve_particular_on(st, g)
    _, b_vals, b_status = part[:3]
    particular = _particular_report(st, g, *part)

    ests = [absorption_probability(sys, x, n_samples, cfg, params.workers, max_unresolved)
            for x in st.xs]
    p_vals = np.array([e.p_hat for e in ests])
    p_hw = np.array([e.half_width for e in ests])
    vals = p_vals + b_vals
    ok = np.isin(b_status, CERTIFIED)
    res = _residual(st, vals, g(pts), ok)
    pv, pok = vals[st.pt_idx], ok[st.pt_idx]
    if pok.all():
        verdict = AdmissibilityVerdict("admissible", "family G bounded and B_* certified")
    else:
        verdict = AdmissibilityVerdict("undecided", "B_* undecided at some points")
    ends = np.searchsorted(pts, [0.0, 1.0])
    return SolveReport(
        _grid_fn(pts, pv, pok), _grid_fn(pts, p_vals[st.pt_idx], np.ones(len(pts), bool)),
        particular, pts, pv, tuple(b_status[st.pt_idx]), res, _sup(res),
        EndpointPair(float(pv[ends[0]]), float(pv[ends[1]])), verdict,
        p_vals[st.pt_idx], tuple(notes), p_hw[st.pt_idx])
