"""Bounded solutions of phi(x) = sum_n p_n phi(f_n(x)) + g(x) on [0, 1].

The maps f_n fix 0 and 1 and the weights p_n form a probability vector.
Solutions are built from a computable stand-in for Banach limits (certified
almost-convergence of Cesaro means) applied to iterates of the transfer
operator T h = sum_n p_n h o f_n and to the partial sums of its Neumann
series.
"""
from .almostlim import AlmostLimitParams, AlmostLimitResult, almost_limit, almost_limit_rows
from .errors import *  # noqa: F401,F403
from .funcspace import (
    ClosedForm, Combination, Composed, Composition, EndpointPair, FunctionRep, Grid,
    GridFunction, Identity, MirrorPower, PiecewiseLinear, PointCycle, PointSwap, Power, UnitMap,
    affine, compose_map_power, constant, jordan_decompose, polynomial,
)
from .solver import (
    SolveParams, admissibility_report, check_Bg_zero, check_G_bounded, neumann_finite,
    neumann_uniform, partial_sum_gk, periodic_closed_form, solve_E, solve_E0, solve_particular,
)
from .specfile import EquationSpec, load_spec, write_spec
from .stochastic import TrajectoryConfig, absorption_probability, sample_trajectory, solve_E_probabilistic
from .transfer import (
    WeightedSystem, apply_T, build_alpha_table, iterate_exact, iterate_mc, iterate_periodic,
    iterate_table, mean_map,
)
from .verify import check_hypotheses, class_report, jordan_parts_solve_E0, residual_E

__version__ = "0.1.0"
