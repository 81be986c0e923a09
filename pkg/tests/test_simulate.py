"""Samplers and estimators: exactness, determinism, and cross-validation."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import treeperc as tp
from treeperc import ResourceLimitError, ValidationError
from treeperc import simulate as sim
from treeperc import spectral as sp

from oracles import exact_tau_profile, fit_log_slope, ray_vertices


# ---------------------------------------------------------------------------
# seeds / ball index
# ---------------------------------------------------------------------------


def test_seed_validation():
    with pytest.raises(ValidationError):
        sim.Seed(-1)
    with pytest.raises(ValidationError):
        sim.Seed(0, stream=2**32)
    assert sim.Seed(5).stream == 0


def test_ball_index_structure():
    idx = sim.ball_index(2, 3)
    assert idx.size == tp.ball_size(3, tp.make_params(2)) == 22
    assert list(idx.level_offsets) == [0, 1, 4, 10, 22]
    assert idx.parent[0] == -1
    for v in range(1, idx.size):
        par = idx.parent[v]
        assert v in idx.neighbor_table[par] or par == 0 and v in idx.neighbor_table[0]
        assert idx.neighbor_table[v][0] == par
    sphere = idx.level_slice(3)
    assert np.all(idx.neighbor_table[sphere.start :, 1:] == -1)


# ---------------------------------------------------------------------------
# field sampler
# ---------------------------------------------------------------------------


def test_gff_ball_deterministic(params2):
    b1 = tp.sample_gff_ball(6, params2, tp.Seed(42))
    b2 = tp.sample_gff_ball(6, params2, tp.Seed(42))
    assert np.array_equal(b1.values, b2.values)
    b3 = tp.sample_gff_ball(6, params2, tp.Seed(42, stream=1))
    assert not np.array_equal(b1.values, b3.values)


def test_gff_child_conditional_variance(params2):
    assert params2.child_noise_std**2 == pytest.approx(0.5, abs=1e-15)


def test_gff_ball_moments(params2):
    """Vertex variance sigma2 and neighbor covariance sigma2/d over 1e6 edges.

    Values within one ball are correlated, so standard errors come from the
    spread of per-ball means across the 200 independent balls.
    """
    idx = sim.ball_index(2, 11)
    rng = sim._rng(sim.Seed(77), 99)
    vals = sim._sample_gff_values(idx, 200, params2, rng)
    per_ball_var = (vals**2).mean(axis=1)
    var_se = per_ball_var.std(ddof=1) / math.sqrt(per_ball_var.size)
    assert abs(per_ball_var.mean() - params2.sigma2) <= 4 * var_se
    par = idx.parent[1:]
    prods = vals[:, 1:] * vals[:, par]
    assert prods.size >= 1_000_000
    per_ball_cov = prods.mean(axis=1)
    cov_se = per_ball_cov.std(ddof=1) / math.sqrt(per_ball_cov.size)
    assert abs(per_ball_cov.mean() - params2.sigma2 / params2.d) <= 4 * cov_se


def test_gff_ray_vs_spectral_prediction(params2):
    """Sampled ray survival matches the quadrature two-point value (height 0.3)."""
    est = sim.estimate_two_point(0.0, 0.3, 8, 400_000, params2, sim.Seed(12))
    pred = sp.two_point_prediction(0.3, 8, params2)
    assert abs(est.estimate - pred) <= 3 * est.stderr


def test_gff_ball_resource_cap(params2):
    with pytest.raises(ResourceLimitError):
        tp.sample_gff_ball(10, params2, tp.Seed(0), max_vertices=100)


# ---------------------------------------------------------------------------
# vacancy marks
# ---------------------------------------------------------------------------


def test_marks_zero_level(params2):
    marks = tp.sample_vacancy_marks(0.0, 5, params2, tp.Seed(1))
    assert not marks.blocked.any()


def test_marks_geodesic_product(params2):
    """Unblocked-geodesic frequency matches p0 * p^n (d=2, v=1, n=3)."""
    vac = tp.vacancy_probs(1.0, params2)
    target = vac.p0 * vac.p**3
    ray = ray_vertices(2, 3)
    trials = 40_000
    clear = sum(
        not tp.sample_vacancy_marks(1.0, 3, params2, tp.Seed(9, i)).blocked[ray].any()
        for i in range(trials)
    )
    se = math.sqrt(target * (1 - target) / trials)
    assert abs(clear / trials - target) <= 3 * se


def test_marks_vs_window_cross_sampler(params2):
    """Marks-based and window-based ray-vacancy frequencies agree.

    The two samplers realize the same vacancy law through entirely different
    constructions (independent per-vertex marks vs Poisson walk trajectories).
    """
    v, n, trials = 0.4, 3, 30_000
    ray = ray_vertices(2, n)
    clear_marks = 0
    clear_window = 0
    for i in range(trials):
        marks = tp.sample_vacancy_marks(v, n, params2, tp.Seed(100, i))
        clear_marks += not marks.blocked[ray].any()
        window = tp.sample_interlacement_window(v, n, params2, tp.Seed(200, i))
        clear_window += not window.occupied[ray].any()
    e1, e2 = clear_marks / trials, clear_window / trials
    se = math.sqrt(e1 * (1 - e1) / trials + e2 * (1 - e2) / trials)
    assert abs(e1 - e2) <= 4 * se


# ---------------------------------------------------------------------------
# interlacement window
# ---------------------------------------------------------------------------


def test_window_requires_positive_depth(params2):
    with pytest.raises(ValidationError):
        tp.sample_interlacement_window(0.5, 0, params2, tp.Seed(0))


def test_window_empty_probability(params2):
    """Poisson-void oracle: P[window empty] = exp(-v cap(B_n)) = p0 p^{|B|-1}."""
    v, n, trials = 0.2, 1, 40_000
    target = math.exp(-v * tp.ball_capacity(n, params2))
    vac = tp.vacancy_probs(v, params2)
    assert target == pytest.approx(vac.p0 * vac.p ** (tp.ball_size(n, params2) - 1), rel=1e-12)
    empty = sum(
        not tp.sample_interlacement_window(v, n, params2, tp.Seed(31, i)).occupied.any()
        for i in range(trials)
    )
    se = math.sqrt(target * (1 - target) / trials)
    assert abs(empty / trials - target) <= 3 * se


def test_window_components_touch_sphere(params2):
    """Every occupied component contains a sphere vertex (trajectories enter there)."""
    idx = sim.ball_index(2, 3)
    sphere_lo = int(idx.level_offsets[3])
    for i in range(300):
        w = tp.sample_interlacement_window(1.0, 3, params2, tp.Seed(55, i))
        occ = w.occupied
        if not occ.any():
            continue
        # top vertex of each occupied component
        top = np.arange(idx.size)
        for vtx in range(1, idx.size):
            if occ[vtx] and occ[idx.parent[vtx]]:
                top[vtx] = top[idx.parent[vtx]]
        comp_hits_sphere = {}
        for vtx in np.nonzero(occ)[0]:
            comp_hits_sphere.setdefault(int(top[vtx]), False)
            if vtx >= sphere_lo:
                comp_hits_sphere[int(top[vtx])] = True
        assert all(comp_hits_sphere.values())


def test_window_deterministic(params2):
    w1 = tp.sample_interlacement_window(0.7, 3, params2, tp.Seed(8))
    w2 = tp.sample_interlacement_window(0.7, 3, params2, tp.Seed(8))
    assert np.array_equal(w1.occupied, w2.occupied)
    assert w1.trajectory_count == w2.trajectory_count


# ---------------------------------------------------------------------------
# edge percolation
# ---------------------------------------------------------------------------


def test_lupu_edges_closed_below_height(params2):
    values = np.full(tp.ball_size(3, params2), -1.0)
    phi = sim.GffBall(d=2, depth=3, values=values)
    assert not tp.sample_lupu_edges(phi, 0.0, tp.Seed(0)).any()


def test_lupu_edges_constant_field_frequency(params2):
    """phi = a + 1 everywhere opens each edge with probability 1 - e^{-2}."""
    a = 0.3
    values = np.full(tp.ball_size(4, params2), a + 1.0)
    phi = sim.GffBall(d=2, depth=4, values=values)
    total, open_count = 0, 0
    for i in range(400):
        open_edges = tp.sample_lupu_edges(phi, a, tp.Seed(60, i))
        open_count += int(open_edges.sum())
        total += open_edges.size
    target = 1.0 - math.exp(-2.0)
    se = math.sqrt(target * (1 - target) / total)
    assert abs(open_count / total - target) <= 4 * se


def test_lupu_edges_binned_frequency(params2):
    """Open frequency binned by (phi_x - a)_+ (phi_y - a)_+ matches the formula."""
    a = 0.0
    idx = sim.ball_index(2, 9)
    rng = sim._rng(sim.Seed(61), 98)
    vals = sim._sample_gff_values(idx, 60, params2, rng)
    opens = sim._lupu_open_masks(idx, vals, a, rng)
    par = idx.parent[1:]
    prod = (
        np.maximum(vals[:, par] - a, 0.0) * np.maximum(vals[:, 1:] - a, 0.0)
    ).ravel()
    is_open = opens.ravel()
    edges_bins = np.digitize(prod, [0.05, 0.2, 0.5, 1.0, 2.0])
    for b in range(6):
        mask = edges_bins == b
        if mask.sum() < 2_000:
            continue
        expected = float(np.mean(-np.expm1(-2.0 * prod[mask])))
        freq = float(is_open[mask].mean())
        se = math.sqrt(max(expected * (1 - expected), 1e-12) / mask.sum())
        assert abs(freq - expected) <= 4 * se + 1e-9


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------


def test_mc_estimate_consistency():
    est = sim.McEstimate.from_counts(137, 1000)
    assert est.estimate == pytest.approx(0.137)
    assert est.stderr == pytest.approx(math.sqrt(0.137 * 0.863 / 1000))
    assert est.ci95[0] <= est.estimate <= est.ci95[1]


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 500), st.integers(1, 500))
def test_mc_estimate_bounds(successes, trials):
    if successes > trials:
        successes, trials = trials, successes
    est = sim.McEstimate.from_counts(successes, trials)
    assert 0.0 <= est.estimate <= 1.0
    assert est.ci95[0] <= est.estimate <= est.ci95[1]
    assert est.stderr == pytest.approx(
        math.sqrt(est.estimate * (1 - est.estimate) / trials)
    )


def test_tau_unconstrained_is_one(params2):
    est = sim.estimate_tau_n(0.0, -8.0 * params2.sigma, 6, 5_000, params2, tp.Seed(1))
    assert est.estimate == 1.0


def test_tau_profile_nested(params2):
    profile = sim.estimate_tau_profile(0.1, 0.2, 9, 20_000, params2, tp.Seed(2))
    counts = [e.successes for e in profile]
    assert all(a >= b for a, b in zip(counts, counts[1:]))
    assert all(e.trials == 20_000 for e in profile)


def test_tau_deterministic_and_worker_independent(params2):
    base = sim.estimate_tau_n(0.2, 0.3, 8, 4_096, params2, tp.Seed(3))
    again = sim.estimate_tau_n(0.2, 0.3, 8, 4_096, params2, tp.Seed(3))
    assert base.successes == again.successes
    parallel = sim.estimate_tau_n(0.2, 0.3, 8, 4_096, params2, tp.Seed(3), workers=3)
    assert parallel.successes == base.successes


def test_tau_block_prefix_stability(params2):
    """Adding trials extends the sample; earlier blocks are unchanged."""
    small = sim.estimate_tau_n(0.2, 0.3, 6, 2_048, params2, tp.Seed(4))
    large = sim.estimate_tau_profile(0.2, 0.3, 6, 4_096, params2, tp.Seed(4))[6]
    # the first 2048 trials of the larger run are the smaller run
    assert large.successes >= small.successes


def test_tau_matches_exact_recursion(params2):
    """MC tau_n against the deterministic branching recursion (both regimes)."""
    for u, a in ((0.05, 0.2), (0.5, 0.4)):
        est = sim.estimate_tau_n(u, a, 8, 60_000, params2, tp.Seed(5))
        exact = exact_tau_profile(u, a, 8, params2)[-1]
        assert abs(est.estimate - exact) <= 4 * max(est.stderr, 1e-4)


def test_tau_resource_cap(params2):
    with pytest.raises(ResourceLimitError):
        sim.estimate_tau_n(
            0.0, -8.0 * params2.sigma, 10, 1_000, params2, tp.Seed(6), max_explored=50
        )


def test_tau_subcritical_envelope(params2, frozen):
    """tau_n stays under the geometric envelope (d+1)/d p0 lambda^n."""
    point = frozen["subcritical_point_d2"]
    u, a, lam = point["u"], point["a"], point["lambda"]
    profile = sim.estimate_tau_profile(u, a, 12, 100_000, params2, tp.Seed(7))
    p0 = tp.vacancy_probs(u, params2).p0
    prefactor = (params2.d + 1.0) / params2.d * p0
    for n in range(4, 13):
        est = profile[n]
        assert est.estimate <= prefactor * lam**n + 3 * est.stderr


def test_tau_supercritical_floor(params2, frozen):
    point = frozen["supercritical_point_d2"]
    _, _, bound = sp.second_moment_bound(point["u"], point["a"], params2)
    est = sim.estimate_tau_n(point["u"], point["a"], 10, 60_000, params2, tp.Seed(8))
    assert est.estimate >= bound - 3 * est.stderr


def test_two_point_unconstrained(params2):
    est = sim.estimate_two_point(0.0, -8.0 * params2.sigma, 8, 5_000, params2, tp.Seed(9))
    assert est.estimate == 1.0


def test_two_point_vs_product_prediction(params2):
    """Sampled two-point value matches p0 p^n times the quadrature factor."""
    u, a, n = 0.3, 0.3, 8
    est = sim.estimate_two_point(u, a, n, 400_000, params2, tp.Seed(10))
    vac = tp.vacancy_probs(u, params2)
    pred = vac.p0 * vac.p**n * sp.two_point_prediction(a, n, params2)
    assert abs(est.estimate - pred) <= 3 * est.stderr


def test_two_point_decay_rate(params2):
    """Fitted log-slope of the two-point estimates approaches ln(lambda(u,a)/d).

    The subleading eigenvalue ratio is ~0.3, so the exact slope over the
    window 6..12 already matches the rate to <0.1%; the tolerance is spent
    on sampling noise at the deepest radius.
    """
    u, a = 0.3, 0.0
    lam = sp.lambda_ua(u, a, params2)
    rate = math.log(lam / params2.d)
    ests = [
        sim.estimate_two_point(u, a, n, 2_000_000, params2, tp.Seed(11)).estimate
        for n in range(6, 13)
    ]
    slope = fit_log_slope(range(6, 13), ests)
    assert abs(slope - rate) <= 0.05 * abs(rate)


def test_two_point_deterministic(params2):
    e1 = sim.estimate_two_point(0.1, 0.1, 5, 3_000, params2, tp.Seed(12))
    e2 = sim.estimate_two_point(0.1, 0.1, 5, 3_000, params2, tp.Seed(12))
    assert e1.successes == e2.successes


# ---------------------------------------------------------------------------
# statistical checks
# ---------------------------------------------------------------------------


def test_level_shift_check_degenerate_rho(params2):
    report = sim.check_tau_level_shift(0.1, 0.3, 1e-3, 8, 30_000, params2, tp.Seed(13))
    assert report.passed
    assert abs(report.details["margin"]) <= 4 * report.details["combined_sigma"]


def test_level_shift_check_example(params2):
    report = sim.check_tau_level_shift(0.1, 0.3, 0.4, 10, 50_000, params2, tp.Seed(14))
    assert report.passed


def test_level_shift_check_zero_height(params2):
    report = sim.check_tau_level_shift(0.1, 0.0, 0.5, 10, 50_000, params2, tp.Seed(15))
    assert report.passed


def test_level_shift_check_rejects_negative_height(params2):
    with pytest.raises(ValidationError):
        sim.check_tau_level_shift(0.1, -0.2, 0.5, 8, 100, params2, tp.Seed(0))


def test_arc_check_small_h(params2):
    report = sim.check_arc_monotonicity(0.2, 8, 4, 20_000, params2, tp.Seed(16))
    assert report.passed


def test_arc_check_at_h_star(params2, h_star2):
    report = sim.check_arc_monotonicity(h_star2.h_star, 8, 4, 40_000, params2, tp.Seed(17))
    assert report.passed
    assert len(report.details["points"]) == 5


def test_domination_check_light(params2):
    report = sim.check_domination(0.0, 0.5, 5, 2, 20_000, params2, tp.Seed(18))
    assert report.passed
    assert report.details["left"] <= report.details["right"] + 3 * report.details["combined_sigma"]


def test_domination_check_extreme_shift(params2):
    """A huge shift empties the left side; the check passes trivially."""
    report = sim.check_domination(0.0, 5.0, 4, 2, 2_000, params2, tp.Seed(19))
    assert report.passed
    assert report.details["left"] <= 0.001


def test_domination_deterministic(params2):
    r1 = sim.check_domination(0.0, 0.5, 4, 2, 5_000, params2, tp.Seed(20))
    r2 = sim.check_domination(0.0, 0.5, 4, 2, 5_000, params2, tp.Seed(20))
    assert r1.details["left"] == r2.details["left"]
    assert r1.details["right"] == r2.details["right"]
