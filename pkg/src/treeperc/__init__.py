"""Spectral and Monte Carlo laboratory for vacant-set level-set percolation
on the (d+1)-regular tree.

The model: an independent pair (interlacement set at level u, Gaussian free
field phi); the question is whether the base point percolates inside the
vacant set intersected with the super-level set {phi > a}. On the tree the
answer is governed by the spectral radius lambda(u, a); this package
computes that critical line numerically and stress-tests the surrounding
inequalities by exact sampling.
"""

__version__ = "0.1.0"

from .errors import (
    BracketError,
    ConvergenceError,
    ResourceLimitError,
    TreepercError,
    ValidationError,
)
from .params import (
    Level,
    TreeParams,
    VacancyConstants,
    ball_capacity,
    ball_size,
    make_params,
    mehler_kernel,
    nu_density,
    u_star,
    vacancy_probs,
)
from .spectral import (
    CriticalHeight,
    DiscreteOperator,
    QuadratureGrid,
    SpectralPair,
    build_grid,
    critical_a,
    damping_factor,
    discretize_operator,
    lambda_damped,
    lambda_h,
    lambda_ua,
    level_shift_gap,
    parabola_scan,
    second_moment_bound,
    solve_h_star,
    top_eigenpair,
    two_point_prediction,
)
from .simulate import (
    BallIndex,
    CheckReport,
    GffBall,
    InterlacementWindow,
    McEstimate,
    Seed,
    VacancyMarks,
    ball_index,
    check_arc_monotonicity,
    check_domination,
    check_tau_level_shift,
    estimate_tau_n,
    estimate_tau_profile,
    estimate_two_point,
    sample_gff_ball,
    sample_interlacement_window,
    sample_lupu_edges,
    sample_vacancy_marks,
)
from .diagram import DiagramRow, build_diagram, classify, rows_to_csv
