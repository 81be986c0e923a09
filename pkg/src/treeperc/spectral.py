"""Nystrom discretization of the truncated ray-chain operator.

The object of study is the self-adjoint operator L_h on L^2(nu): the chain
operator L (d times one Mehler step) multiplied on both sides by the
indicator of [h, infinity). Its top (Perron) eigenvalue lambda_h decreases
from d to 0 as h runs over the reals; the height where it crosses 1 is the
critical level h_star of field level-set percolation, and

    lambda(u, a) = lambda_a * exp(-u (d-1)^2 / d)

is the combined spectral radius whose unit level set is the critical line
of the two-parameter model.

Discretization: composite Gauss-Legendre panels on [max(h, -M sigma),
M sigma] with the nu density folded into the weights, and the similarity-
symmetrized matrix A_ij = d k(x_i, x_j) sqrt(w_i w_j), whose spectrum
matches L_h restricted to [h, infinity) up to quadrature error. The domain
cut sits exactly at h, so the kernel is smooth on every panel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr

from .errors import BracketError, ConvergenceError, ValidationError
from .params import Level, TreeParams, mehler_kernel, u_star, vacancy_probs

DEFAULT_NODE_COUNT = 400
DEFAULT_M = 8.0
_POINTS_PER_PANEL = 8
_MAX_REFINE_DOUBLINGS = 5
_EIG_TOL = 1e-12
_RESIDUAL_TARGET = 1e-11
_REFINE_TOL = 1e-8


@dataclass(frozen=True)
class QuadratureGrid:
    """Nodes and weights approximating integration against nu on [lower, upper]."""

    lower: float
    upper: float
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def node_count(self) -> int:
        return self.nodes.size

    @property
    def mass(self) -> float:
        """Total weight, approximately nu([lower, upper])."""
        return float(self.weights.sum())


@dataclass(frozen=True)
class DiscreteOperator:
    """Symmetric Nystrom matrix of the truncated operator at height h."""

    grid: QuadratureGrid
    matrix: np.ndarray
    h: float


@dataclass(frozen=True)
class SpectralPair:
    """Top eigenvalue and nonnegative eigenfunction values at the grid nodes.

    chi has unit L^2(nu) norm under the grid weights; residual is the
    2-norm of A v - lam v for the symmetrized eigenvector v.
    """

    lam: float
    chi: np.ndarray
    residual: float
    grid_meta: dict

    def record(self) -> dict:
        """JSON-ready diagnostic record (no arrays)."""
        return {"lambda": self.lam, "residual": self.residual, **self.grid_meta}


@dataclass(frozen=True)
class CriticalHeight:
    """Root of lambda_h = 1 with the final bisection bracket and residual."""

    h_star: float
    bracket: tuple
    residual: float


def build_grid(
    h: float,
    params: TreeParams,
    node_count: int = DEFAULT_NODE_COUNT,
    M: float = DEFAULT_M,
) -> QuadratureGrid:
    """Composite Gauss-Legendre grid for L^2(nu) on [max(h, -M sigma), M sigma].

    The nu density is folded into the weights, so sum(w_i f(x_i)) approximates
    the nu-integral of f over the interval. The lower edge sits exactly at h
    when h > -M sigma, so no node straddles the truncation cut.
    """
    if node_count < 16:
        raise ValidationError(f"node_count must be >= 16, got {node_count}")
    if M < 6.0:
        raise ValidationError(f"M must be >= 6, got {M}")
    sigma = params.sigma
    upper = M * sigma
    lower = max(h, -upper)
    if h >= upper:
        raise ValidationError(
            f"truncation height {h} >= upper grid bound {upper}: empty operator"
        )
    n_panels = max(2, -(-node_count // _POINTS_PER_PANEL))
    edges = np.linspace(lower, upper, n_panels + 1)
    ref_x, ref_w = np.polynomial.legendre.leggauss(_POINTS_PER_PANEL)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * ref_x[None, :]).ravel()
    gl_w = (half[:, None] * ref_w[None, :]).ravel()
    dens = np.exp(-nodes * nodes / (2.0 * params.sigma2)) / math.sqrt(
        2.0 * math.pi * params.sigma2
    )
    weights = gl_w * dens
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureGrid(lower=float(lower), upper=float(upper), nodes=nodes, weights=weights)


def discretize_operator(h: float, grid: QuadratureGrid, params: TreeParams) -> DiscreteOperator:
    """Symmetric Nystrom matrix A_ij = d k(x_i,x_j) sqrt(w_i w_j) of the operator at h."""
    expected_lower = max(h, -grid.upper)
    if abs(grid.lower - expected_lower) > 1e-12:
        raise ValidationError(
            f"grid lower bound {grid.lower} does not match truncation height {h}"
        )
    x = grid.nodes
    sw = np.sqrt(grid.weights)
    k = mehler_kernel(x[:, None], x[None, :], params)
    matrix = params.d * k * sw[:, None] * sw[None, :]
    matrix.setflags(write=False)
    return DiscreteOperator(grid=grid, matrix=matrix, h=float(h))


def top_eigenpair(
    op: DiscreteOperator,
    tol: float = _EIG_TOL,
    residual_target: float = _RESIDUAL_TARGET,
    max_iter: int = 100_000,
    start: Optional[np.ndarray] = None,
) -> SpectralPair:
    """Perron eigenpair of the Nystrom matrix by power iteration.

    Stops when the Rayleigh quotient moves by at most tol AND the
    eigen-residual ||Av - lam v|| is below residual_target. The eigenvector
    is mapped back to eigenfunction values chi = v / sqrt(w), which carry
    unit L^2(nu) norm under the grid weights.
    """
    if tol <= 0.0:
        raise ValidationError(f"tol must be > 0, got {tol}")
    A = op.matrix
    if start is None:
        v = np.sqrt(op.grid.weights)
    else:
        v = np.asarray(start, dtype=float)
        if v.shape != (op.grid.node_count,) or np.any(v < 0.0) or not np.any(v > 0.0):
            raise ValidationError("start vector must be nonnegative, nonzero, grid-sized")
    v = v / np.linalg.norm(v)
    lam_prev = math.inf
    for _ in range(max_iter):
        z = A @ v
        lam = float(v @ z)
        residual = float(np.linalg.norm(z - lam * v))
        if residual <= residual_target and abs(lam - lam_prev) <= tol:
            chi = v / np.sqrt(op.grid.weights)
            chi.setflags(write=False)
            return SpectralPair(
                lam=lam,
                chi=chi,
                residual=residual,
                grid_meta={
                    "node_count": op.grid.node_count,
                    "lower": op.grid.lower,
                    "upper": op.grid.upper,
                },
            )
        lam_prev = lam
        norm = np.linalg.norm(z)
        if norm == 0.0:
            raise ConvergenceError("power iteration collapsed to the zero vector", lam)
        v = z / norm
    raise ConvergenceError(
        f"power iteration did not converge in {max_iter} iterations "
        f"(last lambda {lam_prev})",
        lam_prev,
    )


@lru_cache(maxsize=65536)
def _lambda_single(h: float, params: TreeParams, node_count: int, M: float) -> float:
    grid = build_grid(h, params, node_count=node_count, M=M)
    return top_eigenpair(discretize_operator(h, grid, params)).lam


@lru_cache(maxsize=65536)
def lambda_h(
    h: float,
    params: TreeParams,
    node_count: int = DEFAULT_NODE_COUNT,
    M: float = DEFAULT_M,
    refine_tol: float = _REFINE_TOL,
) -> float:
    """Top eigenvalue of the operator truncated at h, grid-refined.

    Doubles the node count until successive values differ by less than
    refine_tol, then returns the finest value.
    """
    lam = _lambda_single(h, params, node_count, M)
    for _ in range(_MAX_REFINE_DOUBLINGS):
        node_count *= 2
        lam_fine = _lambda_single(h, params, node_count, M)
        if abs(lam_fine - lam) < refine_tol:
            return lam_fine
        lam = lam_fine
    raise ConvergenceError(
        f"grid refinement stalled at {node_count} nodes for h={h}", lam
    )


def lambda_ua(
    u: Level,
    a: float,
    params: TreeParams,
    node_count: int = DEFAULT_NODE_COUNT,
    M: float = DEFAULT_M,
) -> float:
    """lambda(u, a) = lambda_a * exp(-u (d-1)^2 / d), the combined spectral radius."""
    if not (u >= 0.0):
        raise ValidationError(f"level u must be >= 0, got {u}")
    return lambda_h(a, params, node_count=node_count, M=M) * math.exp(
        -u * params.decay_exponent
    )


def solve_h_star(
    params: TreeParams,
    tol: float = 1e-9,
    node_count: int = DEFAULT_NODE_COUNT,
    M: float = DEFAULT_M,
) -> CriticalHeight:
    """Bisection root of lambda_h = 1, starting from the bracket [0, sqrt(2 u_star)].

    lambda_h is strictly decreasing, so bisection on the sign of lambda_h - 1
    is robust; iteration stops when |lambda_{h} - 1| <= tol at the midpoint.
    """
    if tol <= 0.0:
        raise ValidationError(f"tol must be > 0, got {tol}")

    def f(h: float) -> float:
        return lambda_h(h, params, node_count=node_count, M=M) - 1.0

    lo, hi = 0.0, math.sqrt(2.0 * u_star(params))
    flo, fhi = f(lo), f(hi)
    for _ in range(8):
        if flo > 0.0:
            break
        lo -= 1.0
        flo = f(lo)
    for _ in range(8):
        if fhi < 0.0:
            break
        hi += 1.0
        fhi = f(hi)
    if not (flo > 0.0 > fhi):
        raise BracketError(
            "no sign change of lambda_h - 1 on the bracket: "
            f"lambda({lo}) - 1 = {flo}, lambda({hi}) - 1 = {fhi}"
        )
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fmid = f(mid)
        if abs(fmid) <= tol:
            root = CriticalHeight(h_star=mid, bracket=(lo, hi), residual=abs(fmid))
            if not (0.0 < mid < math.sqrt(2.0 * u_star(params))):
                raise ConvergenceError(
                    f"h_star {mid} fell outside (0, sqrt(2 u_star))", mid
                )
            return root
        if fmid > 0.0:
            lo = mid
        else:
            hi = mid
    raise ConvergenceError(
        f"bisection for h_star did not reach |lambda - 1| <= {tol}; "
        f"bracket [{lo}, {hi}]",
        0.5 * (lo + hi),
    )


def critical_a(
    u: Level,
    params: TreeParams,
    tol: float = 1e-8,
    node_count: int = DEFAULT_NODE_COUNT,
    M: float = DEFAULT_M,
) -> Optional[float]:
    """Height a at which lambda(u, a) = 1, or None when no solution exists.

    lambda(u, a) = 1 requires lambda_a = exp(u (d-1)^2/d), which is
    attainable only below d (so u < u_star) and only while the root stays
    inside the quadrature window; both failure modes return None.
    """
    if not (u >= 0.0):
        raise ValidationError(f"level u must be >= 0, got {u}")
    target = math.exp(u * params.decay_exponent)
    if target >= params.d:
        return None
    sigma = params.sigma
    lo = -M * sigma + 0.5 * sigma
    hi = M * sigma - 0.5 * sigma

    def g(a: float) -> float:
        return lambda_h(a, params, node_count=node_count, M=M) - target

    glo, ghi = g(lo), g(hi)
    if not (glo > 0.0 > ghi):
        return None
    root = float(brentq(g, lo, hi, xtol=1e-13, rtol=8.9e-16))
    residual = abs(lambda_ua(u, root, params, node_count=node_count, M=M) - 1.0)
    if residual > tol:
        raise ConvergenceError(
            f"critical height solve left residual {residual} > {tol} at u={u}", root
        )
    return root


def two_point_prediction(
    a: float,
    n: int,
    params: TreeParams,
    node_count: int = DEFAULT_NODE_COUNT,
    M: float = DEFAULT_M,
) -> float:
    """Probability that the field exceeds a along an entire geodesic of length n.

    Computed as the quadratic form <1, (L_a/d)^n 1> over the truncated grid:
    n applications of the symmetrized matrix to sqrt(w), then the inner
    product with sqrt(w). n = 0 returns the single-vertex mass nu([a, inf)).
    """
    if n < 0:
        raise ValidationError(f"path length must be >= 0, got {n}")
    grid = build_grid(a, params, node_count=node_count, M=M)
    op = discretize_operator(a, grid, params)
    sw = np.sqrt(grid.weights)
    vec = sw.copy()
    scaled = op.matrix / params.d
    for _ in range(n):
        vec = scaled @ vec
    return float(sw @ vec)


def level_shift_gap(
    a: float,
    rho: float,
    params: TreeParams,
    node_count: int = DEFAULT_NODE_COUNT,
    M: float = DEFAULT_M,
) -> float:
    """Margin of the strict eigenvalue drop under a level shift.

    Returns lambda_a * exp(-(a rho + rho^2/2)(d-1)^2/d) - lambda_{a+rho},
    which the verification suites require to be strictly positive for
    a >= 0, rho > 0.
    """
    if not (a >= 0.0):
        raise ValidationError(f"height a must be >= 0, got {a}")
    if not (rho > 0.0):
        raise ValidationError(f"shift rho must be > 0, got {rho}")
    level = a * rho + 0.5 * rho * rho
    lam_a = lambda_h(a, params, node_count=node_count, M=M)
    lam_shift = lambda_h(a + rho, params, node_count=node_count, M=M)
    return lam_a * math.exp(-level * params.decay_exponent) - lam_shift


def damping_factor(b, a: float, rho: float, params: TreeParams):
    """Per-vertex damping V(b) from closed edges toward occupied neighbors.

    V(b) = p + (1-p) E_Z[exp(-2 (b/d + s Z - a)_+ (b-a)_+)] with
    s the child noise std and p the non-base vacancy constant at level
    a rho + rho^2/2. Equals 1 for b <= a and lies in (p, 1] always.
    The expectation over the Gaussian Z is evaluated by Gauss-Legendre
    panels on the region where the exponent is active (below it the
    integrand is exactly 1, contributing the Gaussian CDF of the cut).
    """
    if not (a >= 0.0):
        raise ValidationError(f"height a must be >= 0, got {a}")
    if not (rho > 0.0):
        raise ValidationError(f"shift rho must be > 0, got {rho}")
    b_arr = np.atleast_1d(np.asarray(b, dtype=float))
    p = vacancy_probs(a * rho + 0.5 * rho * rho, params).p
    s = params.child_noise_std
    d = params.d

    out = np.ones_like(b_arr)
    active = b_arr > a
    if np.any(active):
        bb = b_arr[active]
        beta = 2.0 * (bb - a)
        m = bb / d - a
        z_cut = -m / s
        # below z_cut the positive part vanishes and the integrand is 1
        cdf_below = ndtr(z_cut)
        ref_x, ref_w = np.polynomial.legendre.leggauss(10)
        edges = np.linspace(0.0, 12.0, 41)
        half = 0.5 * (edges[1:] - edges[:-1])
        mid = 0.5 * (edges[1:] + edges[:-1])
        offs = (mid[:, None] + half[:, None] * ref_x[None, :]).ravel()
        gl_w = (half[:, None] * ref_w[None, :]).ravel()
        z = z_cut[:, None] + offs[None, :]
        integrand = np.exp(
            -beta[:, None] * (m[:, None] + s * z) - 0.5 * z * z
        ) / math.sqrt(2.0 * math.pi)
        expectation = cdf_below + integrand @ gl_w
        out[active] = p + (1.0 - p) * expectation
    return out if np.ndim(b) else float(out[0])


@lru_cache(maxsize=4096)
def _lambda_damped_single(
    a: float, rho: float, params: TreeParams, node_count: int, M: float
) -> float:
    grid = build_grid(a, params, node_count=node_count, M=M)
    op = discretize_operator(a, grid, params)
    sqrt_v = np.sqrt(damping_factor(grid.nodes, a, rho, params))
    damped = DiscreteOperator(
        grid=grid, matrix=sqrt_v[:, None] * op.matrix * sqrt_v[None, :], h=a
    )
    return top_eigenpair(damped).lam


@lru_cache(maxsize=4096)
def lambda_damped(
    a: float,
    rho: float,
    params: TreeParams,
    node_count: int = DEFAULT_NODE_COUNT,
    M: float = DEFAULT_M,
    refine_tol: float = _REFINE_TOL,
) -> float:
    """Top eigenvalue of sqrt(V) L_a sqrt(V), the damped truncated operator.

    Squeezing the operator by the damping factor strictly lowers the top
    eigenvalue; combined with the vacancy constant p it dominates
    lambda_{a+rho}. Grid-refined like lambda_h.
    """
    lam = _lambda_damped_single(a, rho, params, node_count, M)
    for _ in range(_MAX_REFINE_DOUBLINGS):
        node_count *= 2
        lam_fine = _lambda_damped_single(a, rho, params, node_count, M)
        if abs(lam_fine - lam) < refine_tol:
            return lam_fine
        lam = lam_fine
    raise ConvergenceError(
        f"grid refinement stalled for damped operator at a={a}, rho={rho}", lam
    )


def parabola_scan(
    h: float,
    K: int,
    params: TreeParams,
    node_count: int = DEFAULT_NODE_COUNT,
    M: float = DEFAULT_M,
) -> list:
    """Sample lambda(u, a) along the arc u + a^2/2 = h^2/2 in the upper quadrant.

    Returns K+1 triples (u_k, a_k, lambda(u_k, a_k)) for u_k = k h^2 / (2K),
    a_k = sqrt(h^2 - 2 u_k). Along such arcs lambda is strictly increasing
    in u; callers assert that with their own margins.
    """
    if not (h > 0.0):
        raise ValidationError(f"arc parameter h must be > 0, got {h}")
    if K < 2:
        raise ValidationError(f"sample count K must be >= 2, got {K}")
    rows = []
    for k in range(K + 1):
        u = h * h * k / (2.0 * K)
        a = math.sqrt(max(h * h - 2.0 * u, 0.0))
        rows.append((u, a, lambda_ua(u, a, params, node_count=node_count, M=M)))
    return rows


def second_moment_bound(
    u: Level,
    a: float,
    params: TreeParams,
    node_count: int = DEFAULT_NODE_COUNT,
    M: float = DEFAULT_M,
) -> tuple:
    """Second-moment lower bound (A, B, A^2/B) on the one-arm probability.

    A is the constant first moment of the weighted sphere count, B the
    geometric-series bound on its second moment; both need lambda(u,a) > 1,
    otherwise the series diverges and the call is rejected.
    """
    if not (u >= 0.0):
        raise ValidationError(f"level u must be >= 0, got {u}")
    lam_ua = lambda_ua(u, a, params, node_count=node_count, M=M)
    if lam_ua <= 1.0:
        raise ValidationError(
            f"second-moment bound needs lambda(u,a) > 1 (the geometric series "
            f"diverges otherwise); got lambda = {lam_ua} at (u={u}, a={a})"
        )
    grid = build_grid(a, params, node_count=node_count, M=M)
    pair = top_eigenpair(discretize_operator(a, grid, params))
    w = grid.weights
    chi = pair.chi
    p0 = vacancy_probs(u, params).p0
    deg_ratio = (params.d + 1.0) / params.d
    A = deg_ratio * p0 * float(w @ chi)
    chi_sq_norm = math.sqrt(float(w @ chi**4))
    B = deg_ratio * p0 * chi_sq_norm * lam_ua / (lam_ua - 1.0)
    return A, B, A * A / B
