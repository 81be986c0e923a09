"""Exact Monte Carlo samplers and estimators on balls of the regular tree.

Samplers: the Gaussian field as a branching AR(1) chain, interlacement
vacancy marks (independent per-vertex closest-point indicators), the
interlacement trace on a ball (Poisson number of walk trajectories entering
through the sphere), and conditional edge percolation driven by the field.

Estimators explore lazily and are vectorized across trials in fixed-size
blocks. Each block owns an independent RNG substream derived from
(seed, stream, operation tag, block index), so results are bit-for-bit
reproducible and independent of how blocks are partitioned across workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache, partial
from typing import Optional

import numpy as np

from .errors import ResourceLimitError, ValidationError
from .params import (
    Level,
    TreeParams,
    ball_capacity,
    ball_size,
    vacancy_probs,
)

_BLOCK = 1024          # trials per RNG substream for light estimators
_BLOCK_BALL = 256      # trials per substream when full balls are materialized
_OUTSIDE = -1          # neighbor-table sentinel for vertices beyond the ball

# operation tags keep the substreams of different samplers disjoint
_TAG_GFF = 1
_TAG_MARKS = 2
_TAG_WINDOW = 3
_TAG_LUPU = 4
_TAG_TAU = 5
_TAG_TWOPOINT = 6
_TAG_DOM = 7

DEFAULT_MAX_VERTICES = 5_000_000
DEFAULT_MAX_EXPLORED = 50_000_000


@dataclass(frozen=True)
class Seed:
    """Root entropy plus a sub-stream id; equal seeds reproduce samples exactly."""

    seed: int
    stream: int = 0

    def __post_init__(self):
        if not (0 <= self.seed < 2**64):
            raise ValidationError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if not (0 <= self.stream < 2**32):
            raise ValidationError(f"stream must fit in 32 bits, got {self.stream}")


def _norm_seed(seed) -> Seed:
    if isinstance(seed, Seed):
        return seed
    return Seed(int(seed))


def _rng(seed: Seed, *path: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed.seed, spawn_key=(seed.stream, *path))
    return np.random.default_rng(ss)


# ---------------------------------------------------------------------------
# ball indexing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BallIndex:
    """BFS layout of the ball B_depth: level blocks, parents and neighbors.

    Vertex 0 is the base point with d+1 children; every other non-boundary
    vertex has its parent plus d children. neighbor_table rows list the d+1
    tree neighbors, with _OUTSIDE marking neighbors beyond the ball.
    """

    d: int
    depth: int
    size: int
    level_offsets: np.ndarray   # length depth+2
    parent: np.ndarray          # parent[0] == -1
    neighbor_table: np.ndarray  # (size, d+1)

    def level_slice(self, k: int) -> slice:
        return slice(int(self.level_offsets[k]), int(self.level_offsets[k + 1]))


@lru_cache(maxsize=64)
def ball_index(d: int, depth: int) -> BallIndex:
    """Build (and cache) the BFS index of B_depth on the (d+1)-regular tree."""
    if d < 2:
        raise ValidationError(f"branching number must be >= 2, got {d}")
    if depth < 0:
        raise ValidationError(f"depth must be >= 0, got {depth}")
    offsets = [0, 1]
    for k in range(1, depth + 1):
        offsets.append(offsets[-1] + (d + 1) * d ** (k - 1))
    offsets = np.asarray(offsets, dtype=np.int64)
    V = int(offsets[-1])
    parent = np.full(V, -1, dtype=np.int64)
    for k in range(1, depth + 1):
        lo, hi = int(offsets[k]), int(offsets[k + 1])
        if k == 1:
            parent[lo:hi] = 0
        else:
            parent[lo:hi] = offsets[k - 1] + np.arange(hi - lo, dtype=np.int64) // d

    nbr = np.full((V, d + 1), _OUTSIDE, dtype=np.int64)
    if depth >= 1:
        nbr[0, :] = 1 + np.arange(d + 1)
    for k in range(1, depth + 1):
        lo, hi = int(offsets[k]), int(offsets[k + 1])
        nbr[lo:hi, 0] = parent[lo:hi]
        if k < depth:
            first_child = offsets[k + 1] + np.arange(hi - lo, dtype=np.int64) * d
            for j in range(d):
                nbr[lo:hi, 1 + j] = first_child + j
    for arr in (offsets, parent, nbr):
        arr.setflags(write=False)
    return BallIndex(
        d=d, depth=depth, size=V, level_offsets=offsets, parent=parent, neighbor_table=nbr
    )


# ---------------------------------------------------------------------------
# sample containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GffBall:
    """One field sample on B_depth in BFS vertex order."""

    d: int
    depth: int
    values: np.ndarray
    layout: str = "bfs"


@dataclass(frozen=True)
class VacancyMarks:
    """Independent per-vertex blocking indicators at one interlacement level.

    blocked[x] means some trajectory has x as its point of minimum distance
    to the base; a geodesic from the base is inside the vacant set exactly
    when none of its vertices is blocked.
    """

    d: int
    depth: int
    level: float
    blocked: np.ndarray


@dataclass(frozen=True)
class InterlacementWindow:
    """Trace of the interlacement set on B_depth.

    occupied is a boolean mask over the BFS layout; trajectory_count is the
    Poisson number of trajectories that entered the ball.
    """

    d: int
    depth: int
    level: float
    occupied: np.ndarray
    trajectory_count: int


@dataclass(frozen=True)
class McEstimate:
    """Bernoulli estimator summary with Wald stderr and Wilson 95% interval."""

    trials: int
    successes: int
    estimate: float
    stderr: float
    ci95: tuple

    @classmethod
    def from_counts(cls, successes: int, trials: int) -> "McEstimate":
        if trials < 1:
            raise ValidationError(f"trials must be >= 1, got {trials}")
        if not (0 <= successes <= trials):
            raise ValidationError(f"successes {successes} outside [0, {trials}]")
        e = successes / trials
        stderr = math.sqrt(e * (1.0 - e) / trials)
        z = 1.959963984540054
        denom = 1.0 + z * z / trials
        center = (e + z * z / (2.0 * trials)) / denom
        half = z * math.sqrt(e * (1.0 - e) / trials + z * z / (4.0 * trials * trials)) / denom
        lo = min(max(0.0, center - half), e)
        hi = max(min(1.0, center + half), e)
        return cls(
            trials=int(trials),
            successes=int(successes),
            estimate=e,
            stderr=stderr,
            ci95=(lo, hi),
        )


@dataclass(frozen=True)
class CheckReport:
    """Outcome of one statistical verification run."""

    name: str
    passed: bool
    details: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# block cores (module-level so worker processes can pickle them)
# ---------------------------------------------------------------------------


def _sample_gff_values(idx: BallIndex, count: int, params: TreeParams, rng) -> np.ndarray:
    """(count, V) field values: root N(0, sigma2), child = parent/d + noise."""
    vals = np.empty((count, idx.size))
    vals[:, 0] = params.sigma * rng.standard_normal(count)
    s = params.child_noise_std
    for k in range(1, idx.depth + 1):
        sl = idx.level_slice(k)
        par = idx.parent[sl]
        vals[:, sl] = vals[:, par] / params.d + s * rng.standard_normal((count, sl.stop - sl.start))
    return vals


def _sample_window_masks(
    idx: BallIndex, v: float, count: int, params: TreeParams, rng
) -> tuple:
    """(count, V) occupancy masks of the interlacement trace, plus trajectory counts.

    Each trajectory enters uniformly on the sphere and performs a simple
    random walk; stepping beyond the ball collapses the outside excursion:
    the walk returns to the sphere vertex it left with probability 1/d and
    escapes for good otherwise. Backward trajectory halves never re-enter
    the ball, so recording forward visits is exact.
    """
    d = params.d
    n_traj = rng.poisson(v * ball_capacity(idx.depth, params), size=count)
    occupied = np.zeros((count, idx.size), dtype=bool)
    total = int(n_traj.sum())
    if total == 0:
        return occupied, n_traj
    walk_trial = np.repeat(np.arange(count), n_traj)
    sphere_lo = int(idx.level_offsets[idx.depth])
    cur = rng.integers(sphere_lo, idx.size, size=total)
    occupied[walk_trial, cur] = True
    active_ids = np.arange(total)
    while active_ids.size:
        c = cur[active_ids]
        slots = rng.integers(0, d + 1, size=active_ids.size)
        nxt = idx.neighbor_table[c, slots]
        out = nxt == _OUTSIDE
        survive = np.ones(active_ids.size, dtype=bool)
        if out.any():
            returns = rng.random(int(out.sum())) < 1.0 / d
            survive[out] = returns
            nxt[out] = c[out]
        cur[active_ids] = nxt
        active_ids = active_ids[survive]
        occupied[walk_trial[active_ids], cur[active_ids]] = True
    return occupied, n_traj


def _lupu_open_masks(idx: BallIndex, values: np.ndarray, a: float, rng) -> np.ndarray:
    """(count, V-1) conditional edge openings, edge i joining vertex i+1 to its parent.

    Given the field, each edge opens independently with probability
    1 - exp(-2 (phi_x - a)_+ (phi_y - a)_+); edges with either endpoint at
    or below a never open.
    """
    par = idx.parent[1:]
    px = np.maximum(values[:, par] - a, 0.0)
    py = np.maximum(values[:, 1:] - a, 0.0)
    p_open = -np.expm1(-2.0 * px * py)
    return rng.random(p_open.shape) < p_open


def _reach_mask(idx: BallIndex, in_set: np.ndarray, n: int) -> np.ndarray:
    """Which trials connect the base to sphere level n inside the vertex set.

    On a tree a vertex is in the base's cluster exactly when its whole
    geodesic lies in the set, so one root-to-level-n sweep suffices.
    """
    alive = in_set[:, 0].copy()
    if n == 0:
        return alive
    prev = alive[:, None]
    prev_lo = 0
    for k in range(1, n + 1):
        sl = idx.level_slice(k)
        par_local = idx.parent[sl] - prev_lo
        prev = in_set[:, sl] & prev[:, par_local]
        prev_lo = sl.start
    return prev.any(axis=1)


def _open_components(idx: BallIndex, open_edges: np.ndarray) -> np.ndarray:
    """(count, V) component labels of the open-edge percolation (label = top vertex)."""
    count = open_edges.shape[0]
    comp = np.broadcast_to(np.arange(idx.size, dtype=np.int64), (count, idx.size)).copy()
    for k in range(1, idx.depth + 1):
        sl = idx.level_slice(k)
        par = idx.parent[sl]
        own = np.arange(sl.start, sl.stop, dtype=np.int64)
        comp[:, sl] = np.where(open_edges[:, sl.start - 1 : sl.stop - 1], comp[:, par], own)
    return comp


def _blocks(trials: int, block: int):
    full, rem = divmod(trials, block)
    sizes = [block] * full + ([rem] if rem else [])
    return list(enumerate(sizes))


def _run_blocks(worker, trials: int, block: int, workers: int) -> np.ndarray:
    """Sum the per-block count vectors, optionally across worker processes."""
    plan = _blocks(trials, block)
    if workers <= 1 or len(plan) <= 1:
        parts = [worker(b, size) for b, size in plan]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_call_block, [(worker, b, size) for b, size in plan]))
    return np.sum(parts, axis=0)


def _call_block(job):
    worker, b, size = job
    return worker(b, size)


def _tau_reach_block(
    u: float,
    a: float,
    n: int,
    params: TreeParams,
    seed: Seed,
    path: tuple,
    max_explored: int,
    block_index: int,
    block_size: int,
) -> np.ndarray:
    """Counts of trials whose vacant-and-high cluster reaches each radius 0..n.

    Lazy frontier exploration: the base's cluster restricted to B_n is a
    branching process (a vertex joins iff its parent joined, its mark is
    clear and its field value exceeds a), so only the live frontier is kept.
    """
    rng = _rng(seed, *path, _TAG_TAU, block_index)
    d = params.d
    s = params.child_noise_std
    vac = vacancy_probs(u, params)
    counts = np.zeros(n + 1, dtype=np.int64)

    phi0 = params.sigma * rng.standard_normal(block_size)
    alive = (phi0 > a) & (rng.random(block_size) < vac.p0)
    counts[0] = int(alive.sum())
    trial = np.nonzero(alive)[0]
    phi = phi0[trial]
    explored = np.ones(block_size, dtype=np.int64)
    for level in range(1, n + 1):
        if trial.size == 0:
            break
        branch = d + 1 if level == 1 else d
        explored += branch * np.bincount(trial, minlength=block_size)
        peak = int(explored.max())
        if peak > max_explored:
            raise ResourceLimitError(
                f"cluster exploration exceeded {max_explored} generated vertices "
                f"in one trial (reached {peak} at radius {level})"
            )
        t = np.repeat(trial, branch)
        ph = np.repeat(phi, branch) / d + s * rng.standard_normal(t.size)
        ok = (ph > a) & (rng.random(t.size) < vac.p)
        trial, phi = t[ok], ph[ok]
        if trial.size == 0:
            break
        counts[level] = np.unique(trial).size
    return counts


def _two_point_block(
    u: float,
    a: float,
    n: int,
    params: TreeParams,
    seed: Seed,
    path: tuple,
    block_index: int,
    block_size: int,
) -> np.ndarray:
    """Count of trials where one fixed geodesic of length n stays vacant and high."""
    rng = _rng(seed, *path, _TAG_TWOPOINT, block_index)
    d = params.d
    s = params.child_noise_std
    vac = vacancy_probs(u, params)
    phi = params.sigma * rng.standard_normal(block_size)
    ok = (phi > a) & (rng.random(block_size) < vac.p0)
    for _ in range(n):
        phi = phi / d + s * rng.standard_normal(block_size)
        ok &= (phi > a) & (rng.random(block_size) < vac.p)
    return np.array([int(ok.sum())], dtype=np.int64)


def _domination_block(
    a: float,
    rho: float,
    n: int,
    buffer: int,
    params: TreeParams,
    seed: Seed,
    path: tuple,
    block_index: int,
    block_size: int,
) -> np.ndarray:
    """(left successes, right successes) on one block.

    LEFT: base reaches sphere n inside {phi > a + rho}. RIGHT, with fresh
    randomness: base reaches sphere n inside {phi' > a} minus every
    open-edge component (conditional edge percolation at height a) that
    contains an interlacement-occupied vertex. Components and trajectories
    are truncated to B_{n+buffer}.
    """
    rng = _rng(seed, *path, _TAG_DOM, block_index)
    idx_n = ball_index(params.d, n)
    idx_big = ball_index(params.d, n + buffer)

    phi_left = _sample_gff_values(idx_n, block_size, params, rng)
    left = _reach_mask(idx_n, phi_left > a + rho, n)
    del phi_left

    phi = _sample_gff_values(idx_big, block_size, params, rng)
    occupied, _ = _sample_window_masks(
        idx_big, a * rho + 0.5 * rho * rho, block_size, params, rng
    )
    open_edges = _lupu_open_masks(idx_big, phi, a, rng)
    comp = _open_components(idx_big, open_edges)
    tainted = np.zeros((block_size, idx_big.size), dtype=bool)
    rows, cols = np.nonzero(occupied)
    tainted[rows, comp[rows, cols]] = True
    removed = np.take_along_axis(tainted, comp, axis=1)
    right = _reach_mask(idx_big, (phi > a) & ~removed, n)
    return np.array([int(left.sum()), int(right.sum())], dtype=np.int64)


# ---------------------------------------------------------------------------
# public samplers
# ---------------------------------------------------------------------------


def sample_gff_ball(
    n: int,
    params: TreeParams,
    seed,
    max_vertices: int = DEFAULT_MAX_VERTICES,
) -> GffBall:
    """Sample the field on B_n: root N(0, sigma2), child = parent/d + noise."""
    if n < 0:
        raise ValidationError(f"depth must be >= 0, got {n}")
    size = ball_size(n, params)
    if size > max_vertices:
        raise ResourceLimitError(
            f"ball of depth {n} has {size} vertices, above the cap {max_vertices}"
        )
    seed = _norm_seed(seed)
    idx = ball_index(params.d, n)
    values = _sample_gff_values(idx, 1, params, _rng(seed, _TAG_GFF))[0]
    values.setflags(write=False)
    return GffBall(d=params.d, depth=n, values=values)


def sample_vacancy_marks(
    v: Level,
    n: int,
    params: TreeParams,
    seed,
    max_vertices: int = DEFAULT_MAX_VERTICES,
) -> VacancyMarks:
    """Independent blocking marks on B_n: clear with probability p0 at the base, p elsewhere."""
    if not (v >= 0.0):
        raise ValidationError(f"level must be >= 0, got {v}")
    if n < 0:
        raise ValidationError(f"depth must be >= 0, got {n}")
    size = ball_size(n, params)
    if size > max_vertices:
        raise ResourceLimitError(
            f"ball of depth {n} has {size} vertices, above the cap {max_vertices}"
        )
    seed = _norm_seed(seed)
    vac = vacancy_probs(v, params)
    clear_prob = np.full(size, vac.p)
    clear_prob[0] = vac.p0
    blocked = _rng(seed, _TAG_MARKS).random(size) >= clear_prob
    blocked.setflags(write=False)
    return VacancyMarks(d=params.d, depth=n, level=float(v), blocked=blocked)


def sample_interlacement_window(
    v: Level,
    n: int,
    params: TreeParams,
    seed,
    max_vertices: int = DEFAULT_MAX_VERTICES,
) -> InterlacementWindow:
    """Sample the interlacement trace on B_n (n >= 1) at level v."""
    if not (v >= 0.0):
        raise ValidationError(f"level must be >= 0, got {v}")
    if n < 1:
        raise ValidationError(f"window depth must be >= 1, got {n}")
    size = ball_size(n, params)
    if size > max_vertices:
        raise ResourceLimitError(
            f"ball of depth {n} has {size} vertices, above the cap {max_vertices}"
        )
    seed = _norm_seed(seed)
    idx = ball_index(params.d, n)
    occupied, n_traj = _sample_window_masks(idx, float(v), 1, params, _rng(seed, _TAG_WINDOW))
    mask = occupied[0]
    mask.setflags(write=False)
    return InterlacementWindow(
        d=params.d,
        depth=n,
        level=float(v),
        occupied=mask,
        trajectory_count=int(n_traj[0]),
    )


def sample_lupu_edges(phi: GffBall, a: float, seed) -> np.ndarray:
    """Conditional edge percolation on the ball of a field sample.

    Returns a boolean array over non-root vertices in BFS order; entry i is
    the state of the edge joining vertex i+1 to its parent, open with
    probability 1 - exp(-2 (phi_parent - a)_+ (phi_child - a)_+).
    """
    seed = _norm_seed(seed)
    idx = ball_index(phi.d, phi.depth)
    out = _lupu_open_masks(idx, phi.values[None, :], a, _rng(seed, _TAG_LUPU))[0]
    out.setflags(write=False)
    return out


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------


def _tau_counts(
    u: float,
    a: float,
    n: int,
    trials: int,
    params: TreeParams,
    seed,
    workers: int,
    max_explored: int,
    path: tuple = (),
) -> np.ndarray:
    if not (u >= 0.0):
        raise ValidationError(f"level u must be >= 0, got {u}")
    if n < 1:
        raise ValidationError(f"radius must be >= 1, got {n}")
    if trials < 1:
        raise ValidationError(f"trials must be >= 1, got {trials}")
    seed = _norm_seed(seed)
    worker = partial(_tau_reach_block, float(u), float(a), int(n), params, seed, path, max_explored)
    return _run_blocks(worker, trials, _BLOCK, workers)


def estimate_tau_profile(
    u: Level,
    a: float,
    n: int,
    trials: int,
    params: TreeParams,
    seed,
    workers: int = 1,
    max_explored: int = DEFAULT_MAX_EXPLORED,
    _path: tuple = (),
) -> list:
    """McEstimate of the sphere-reaching probability for every radius 0..n.

    All radii come from the same trials (the per-trial reached radius is
    recorded once), so the estimates are pathwise nested: counts can only
    drop as the radius grows.
    """
    counts = _tau_counts(u, a, n, trials, params, seed, workers, max_explored, _path)
    return [McEstimate.from_counts(int(c), trials) for c in counts]


def estimate_tau_n(
    u: Level,
    a: float,
    n: int,
    trials: int,
    params: TreeParams,
    seed,
    workers: int = 1,
    max_explored: int = DEFAULT_MAX_EXPLORED,
    _path: tuple = (),
) -> McEstimate:
    """Probability that the base's cluster in the vacant-and-high set reaches sphere n."""
    return estimate_tau_profile(
        u, a, n, trials, params, seed, workers=workers, max_explored=max_explored, _path=_path
    )[n]


def estimate_two_point(
    u: Level,
    a: float,
    n: int,
    trials: int,
    params: TreeParams,
    seed,
    workers: int = 1,
    _path: tuple = (),
) -> McEstimate:
    """Probability that one fixed geodesic of length n is vacant with field above a."""
    if not (u >= 0.0):
        raise ValidationError(f"level u must be >= 0, got {u}")
    if n < 0:
        raise ValidationError(f"path length must be >= 0, got {n}")
    if trials < 1:
        raise ValidationError(f"trials must be >= 1, got {trials}")
    seed = _norm_seed(seed)
    worker = partial(_two_point_block, float(u), float(a), int(n), params, seed, _path)
    counts = _run_blocks(worker, trials, _BLOCK, workers)
    return McEstimate.from_counts(int(counts[0]), trials)


# ---------------------------------------------------------------------------
# statistical checks
# ---------------------------------------------------------------------------


def _combined_sigma(*ests: McEstimate) -> float:
    return math.sqrt(sum(e.stderr**2 for e in ests))


def check_tau_level_shift(
    u: Level,
    a: float,
    rho: float,
    n: int,
    trials: int,
    params: TreeParams,
    seed,
    workers: int = 1,
) -> CheckReport:
    """One-sided check that raising the height by rho hurts at least as much
    as raising the interlacement level by a rho + rho^2/2.

    Estimates tau_n(u, a+rho) and tau_n(u + a rho + rho^2/2, a) on
    independent substreams; PASS when the first does not exceed the second
    by more than 3 combined standard errors.
    """
    if not (a >= 0.0):
        raise ValidationError(f"height a must be >= 0, got {a}")
    if not (rho > 0.0):
        raise ValidationError(f"shift rho must be > 0, got {rho}")
    seed = _norm_seed(seed)
    left = estimate_tau_n(u, a + rho, n, trials, params, seed, workers=workers, _path=(10,))
    right = estimate_tau_n(
        u + a * rho + 0.5 * rho * rho, a, n, trials, params, seed, workers=workers, _path=(11,)
    )
    sigma = _combined_sigma(left, right)
    margin = right.estimate - left.estimate
    return CheckReport(
        name="tau_level_shift",
        passed=margin >= -3.0 * sigma,
        details={
            "u": u,
            "a": a,
            "rho": rho,
            "n": n,
            "trials": trials,
            "left": left.estimate,
            "left_stderr": left.stderr,
            "right": right.estimate,
            "right_stderr": right.stderr,
            "margin": margin,
            "combined_sigma": sigma,
        },
    )


def check_arc_monotonicity(
    h: float,
    n: int,
    K: int,
    trials: int,
    params: TreeParams,
    seed,
    workers: int = 1,
) -> CheckReport:
    """Check that tau_n does not decrease along the arc u + a^2/2 = h^2/2.

    Samples K+1 arc points on independent substreams; PASS when no
    consecutive pair drops by more than 3 combined standard errors.
    """
    if not (h > 0.0):
        raise ValidationError(f"arc parameter h must be > 0, got {h}")
    if K < 2:
        raise ValidationError(f"sample count K must be >= 2, got {K}")
    seed = _norm_seed(seed)
    points = []
    for k in range(K + 1):
        u = h * h * k / (2.0 * K)
        a = math.sqrt(max(h * h - 2.0 * u, 0.0))
        est = estimate_tau_n(u, a, n, trials, params, seed, workers=workers, _path=(20, k))
        points.append((u, a, est))
    worst = math.inf
    passed = True
    for (u0, a0, e0), (u1, a1, e1) in zip(points, points[1:]):
        slack = e1.estimate - e0.estimate + 3.0 * _combined_sigma(e0, e1)
        worst = min(worst, slack)
        if slack < 0.0:
            passed = False
    return CheckReport(
        name="arc_monotonicity",
        passed=passed,
        details={
            "h": h,
            "n": n,
            "K": K,
            "trials": trials,
            "worst_slack": worst,
            "points": [
                {"u": u, "a": a, "estimate": e.estimate, "stderr": e.stderr}
                for u, a, e in points
            ],
        },
    )


def check_domination(
    a: float,
    rho: float,
    n: int,
    buffer: int,
    trials: int,
    params: TreeParams,
    seed,
    workers: int = 1,
    compare_buffer: Optional[int] = None,
) -> CheckReport:
    """Domination check: reaching sphere n above height a+rho is no more
    likely than reaching it above height a after deleting open-edge
    components touching an independent interlacement trace.

    Truncation caveat: trajectories and open components live in B_{n+buffer}
    only, which can only enlarge the right side. When compare_buffer is
    given, the right side is re-estimated at that buffer and the shift is
    reported along with a 2-sigma stability flag.
    """
    if not (a >= 0.0):
        raise ValidationError(f"height a must be >= 0, got {a}")
    if not (rho > 0.0):
        raise ValidationError(f"shift rho must be > 0, got {rho}")
    if n < 1:
        raise ValidationError(f"radius must be >= 1, got {n}")
    if buffer < 0:
        raise ValidationError(f"buffer must be >= 0, got {buffer}")
    if trials < 1:
        raise ValidationError(f"trials must be >= 1, got {trials}")
    seed = _norm_seed(seed)

    def run(buf: int, tag: int):
        worker = partial(
            _domination_block, float(a), float(rho), int(n), int(buf), params, seed, (30, tag)
        )
        counts = _run_blocks(worker, trials, _BLOCK_BALL, workers)
        return (
            McEstimate.from_counts(int(counts[0]), trials),
            McEstimate.from_counts(int(counts[1]), trials),
        )

    left, right = run(buffer, 0)
    sigma = _combined_sigma(left, right)
    margin = right.estimate - left.estimate
    details = {
        "a": a,
        "rho": rho,
        "n": n,
        "buffer": buffer,
        "trials": trials,
        "left": left.estimate,
        "left_stderr": left.stderr,
        "right": right.estimate,
        "right_stderr": right.stderr,
        "margin": margin,
        "combined_sigma": sigma,
        "truncation_note": (
            f"open components and trajectories truncated to the ball of radius {n}+{buffer}"
        ),
    }
    passed = margin >= -3.0 * sigma
    if compare_buffer is not None:
        _, right_alt = run(int(compare_buffer), 1)
        shift = right_alt.estimate - right.estimate
        shift_sigma = _combined_sigma(right, right_alt)
        details.update(
            {
                "compare_buffer": int(compare_buffer),
                "right_alt": right_alt.estimate,
                "right_alt_stderr": right_alt.stderr,
                "buffer_shift": shift,
                "buffer_shift_sigma": shift_sigma,
                "buffer_stable": abs(shift) < 2.0 * shift_sigma,
            }
        )
    return CheckReport(name="domination", passed=passed, details=details)
