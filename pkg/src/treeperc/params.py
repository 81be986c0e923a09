"""Closed-form constants of the (d+1)-regular tree with unit weights.

Everything here is exact arithmetic on the branching number d: the
stationary Gaussian measure nu, the one-step transition (Mehler) kernel of
the field chain along a ray, vacancy probabilities of the interlacement
set, ball capacities, and the critical interlacement level.

Conventions. The tree has a base point x_0 of degree d+1; every vertex has
degree d+1, so each non-root vertex has one parent and d children. The
simple random walk jumps uniformly over the d+1 neighbors. The Gaussian
free field on the tree restricted to any ray is a stationary AR(1) chain:
child = parent / d + noise, with stationary variance sigma2 = d/(d^2-1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

# Levels (interlacement intensities) are plain non-negative floats.
Level = float


@dataclass(frozen=True)
class TreeParams:
    """Branching number d and all constants derived from it."""

    d: int
    sigma2: float        # stationary field variance d/(d^2-1)
    contraction: float   # one-step ray correlation 1/d
    decay_exponent: float  # (d-1)^2/d, vacancy decay rate per vertex
    point_capacity: float  # 1/sigma2 = (d^2-1)/d

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)

    @property
    def child_noise_std(self) -> float:
        """Conditional std of a child given its parent: sqrt(sigma2(1-1/d^2))."""
        return math.sqrt(self.sigma2 * (1.0 - self.contraction**2))


@dataclass(frozen=True)
class VacancyConstants:
    """Per-vertex vacancy probabilities of the interlacement set at one level.

    p0 applies to the base point, p to every other vertex (probability that
    no trajectory has that vertex as its closest point to the base).
    """

    p0: float
    p: float


def make_params(d: int) -> TreeParams:
    """Build TreeParams for branching number d (tree degree d+1)."""
    if not isinstance(d, (int, np.integer)) or isinstance(d, bool):
        raise ValidationError(f"branching number must be an integer, got {d!r}")
    if d < 2:
        raise ValidationError(f"branching number must be >= 2, got {d}")
    d = int(d)
    return TreeParams(
        d=d,
        sigma2=d / (d * d - 1.0),
        contraction=1.0 / d,
        decay_exponent=(d - 1.0) ** 2 / d,
        point_capacity=(d * d - 1.0) / d,
    )


def nu_density(x, params: TreeParams):
    """Density of nu, the centered Gaussian with variance sigma2, at x."""
    x = np.asarray(x, dtype=float)
    out = np.exp(-x * x / (2.0 * params.sigma2)) / math.sqrt(2.0 * math.pi * params.sigma2)
    return out if out.ndim else float(out)


def mehler_kernel(x, y, params: TreeParams):
    """One-step transition kernel k(x, y) of the ray chain, wrt nu(dy).

    With contraction c = 1/d the chain step is y | x ~ N(x/d, sigma2(1-c^2));
    dividing that density by the nu density gives the symmetric kernel

        k(x,y) = (1-c^2)^{-1/2} exp( (2cxy - c^2(x^2+y^2)) / (2 sigma2 (1-c^2)) ).

    k is the kernel of the chain's Markov operator Q on L^2(nu); the tree
    operator applies d of these: (L f)(x) = d * integral k(x,y) f(y) nu(dy).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    c = params.contraction
    denom = 2.0 * params.sigma2 * (1.0 - c * c)
    out = np.exp((2.0 * c * x * y - c * c * (x * x + y * y)) / denom) / math.sqrt(1.0 - c * c)
    return out if out.ndim else float(out)


def vacancy_probs(v: Level, params: TreeParams) -> VacancyConstants:
    """Vacancy constants (p0, p) at interlacement level v >= 0.

    p0 = exp(-v (d^2-1)/d) is the probability the base point is vacant;
    p = exp(-v (d-1)^2/d) is, for any other vertex, the probability that no
    trajectory has it as its point of minimum distance to the base.
    """
    if not (v >= 0.0):
        raise ValidationError(f"level must be >= 0, got {v}")
    return VacancyConstants(
        p0=math.exp(-v * params.point_capacity),
        p=math.exp(-v * params.decay_exponent),
    )


def u_star(params: TreeParams) -> float:
    """Critical interlacement level: the root of d * exp(-u (d-1)^2/d) = 1."""
    return params.d * math.log(params.d) / (params.d - 1.0) ** 2


def ball_capacity(n: int, params: TreeParams) -> float:
    """Capacity of the ball of radius n around the base point.

    cap(B_0) = (d^2-1)/d (a single vertex); for n >= 1 the equilibrium
    measure sits uniformly on the sphere, with mass d-1 at each of the
    (d+1) d^{n-1} sphere vertices. Governs the Poisson number of
    interlacement trajectories hitting B_n.
    """
    if n < 0:
        raise ValidationError(f"radius must be >= 0, got {n}")
    d = params.d
    if n == 0:
        return params.point_capacity
    return (d + 1.0) * float(d) ** (n - 1) * (d - 1.0)


def ball_size(n: int, params: TreeParams) -> int:
    """Number of vertices of B_n: 1 + (d+1)(d^n - 1)/(d-1)."""
    if n < 0:
        raise ValidationError(f"radius must be >= 0, got {n}")
    d = params.d
    return 1 + (d + 1) * (d**n - 1) // (d - 1)
