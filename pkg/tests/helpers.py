"""Random instance generators shared by the property and acceptance suites."""
import numpy as np

from conftest import THIRD, TWO_THIRDS, swap_fn  # noqa: F401
from iterfe import (
    ClosedForm, Combination, Composed, GridFunction, Identity, PiecewiseLinear, PointCycle,
    PointSwap, Power, WeightedSystem,
)


def normalised(w):
    w = np.asarray(w, dtype=float)
    w = w / w.sum()
    w[-1] = 1.0 - w[:-1].sum()
    return tuple(float(v) for v in w)


def lazy_system(alpha, p):
    return WeightedSystem((Power(alpha), Identity()), (p, 1.0 - p))


def random_lazy(rng):
    return lazy_system(float(rng.uniform(2, 4)), float(rng.uniform(0.3, 0.9)))


def random_swap(rng):
    p = float(rng.uniform(0.05, 0.95))
    return WeightedSystem.periodic(PointSwap(((THIRD, TWO_THIRDS),)), (p, 1.0 - p))


def random_increasing_map(rng, knots=4):
    xs = np.sort(rng.uniform(0.05, 0.95, knots))
    ys = np.sort(rng.uniform(0.0, 1.0, knots))
    return PiecewiseLinear(((0.0, 0.0), *zip(xs.tolist(), ys.tolist()), (1.0, 1.0)))


def random_h1_system(rng):
    k = int(rng.integers(1, 4))
    return WeightedSystem(tuple(random_increasing_map(rng) for _ in range(k)),
                          normalised(rng.dirichlet(np.ones(k))))


def random_mean_identity_system(rng, knots=5, strict=False):
    """{f, 2 id - f} with weight 1/2 each, where |f(x) - x| <= min(x, 1 - x).

    With ``strict`` f stays above the identity on (0, 1), so only 0 and 1 are fixed.
    """
    xs = np.sort(rng.uniform(0.02, 0.98, knots))
    room = np.minimum(xs, 1.0 - xs)
    ys = xs + (rng.uniform(0.3, 0.9, knots) if strict else rng.uniform(-1, 1, knots)) * room
    f = PiecewiseLinear(((0.0, 0.0), *zip(xs.tolist(), ys.tolist()), (1.0, 1.0)))
    g = PiecewiseLinear(((0.0, 0.0), *zip(xs.tolist(), (2 * xs - ys).tolist()), (1.0, 1.0)))
    return WeightedSystem((f, g), (0.5, 0.5))


def random_bump(rng):
    """Quartic with u(0) = u(1) = 0."""
    c = rng.uniform(-1, 1, 3)
    return ClosedForm((0.0, c[0], c[1], c[2], -(c.sum())))


def coboundary(sys, u):
    """g = u - T u; its partial sums u - T^k u stay bounded."""
    return Combination(((1.0, u),) + tuple((-p, Composed(u, f)) for f, p in sys.active()))


def random_grid_fn(rng, n=9, scale=1.0, monotone=False):
    v = rng.uniform(-scale, scale, n)
    return GridFunction(tuple(np.sort(v) if monotone else v))


CYCLE_POINTS = (0.1, 0.2, THIRD, 0.4, 0.6, TWO_THIRDS)


def cycle_map(order):
    """A point permutation f with f^order = id (and f^k != id for 0 < k < order)."""
    if order == 1:
        return Identity()
    if order == 2:
        return PointSwap(((THIRD, TWO_THIRDS), (0.2, 0.7)))
    if order == 3:
        return PointCycle(((THIRD, 0.1, TWO_THIRDS), (0.2, 0.6, 0.4)))
    return PointCycle(((THIRD, 0.1, TWO_THIRDS, 0.4), (0.2, 0.6)))


def random_periodic(rng, size):
    """{f^0, ..., f^N} with N + 1 = size and random weights."""
    return WeightedSystem.periodic(cycle_map(size), normalised(rng.dirichlet(np.ones(size))))


def settled_sequence(rng, n=2048):
    """(limit, sequence) whose transient dies out well inside the first quarter.

    Geometric transients with rate <= 0.96 and amplitude <= 3 are below
    1e-8 after n/4 = 512 steps; the kinds are plain, sign-alternating, a sum
    of two rates, and a noisy prefix followed by the exact limit.
    """
    limit = float(rng.uniform(-5, 5))
    m = np.arange(n)
    kind = int(rng.integers(4))
    if kind == 3:
        seq = np.full(n, limit)
        cut = int(rng.integers(1, n // 4))
        seq[:cut] += rng.uniform(-3, 3, cut)
        return limit, seq
    rate, amp = rng.uniform(0.5, 0.96), rng.uniform(-3, 3)
    seq = limit + amp * rate ** m * (-1.0 if kind == 1 else 1.0) ** m
    if kind == 2:
        seq = seq + rng.uniform(-1, 1) * rng.uniform(0.5, 0.96) ** m
    return limit, seq
