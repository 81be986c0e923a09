"""Phase-diagram assembly: classification, CSV schema, structural assertions."""

import math

import numpy as np
import pytest

import treeperc as tp
from treeperc import ValidationError
from treeperc.diagram import CSV_HEADER, build_diagram, classify, rows_to_csv


@pytest.fixture(scope="module")
def small_diagram(params2):
    u_grid = np.linspace(0.0, 1.4, 8)
    a_grid = np.linspace(-0.5, 1.5, 9)
    return build_diagram(params2, u_grid, a_grid, eps=1e-3, critline_points=9)


def test_classify_pure_function():
    assert classify(1.2, 1e-3) == "supercritical"
    assert classify(0.9, 1e-3) == "subcritical"
    assert classify(1.0005, 1e-3) == "critical-band"
    assert classify(1.0, 1e-3) == "critical-band"
    with pytest.raises(ValidationError):
        classify(1.0, 0.0)


def test_region_matches_lambda(small_diagram):
    rows, _ = small_diagram
    for r in rows:
        assert r.region == classify(r.lam, 1e-3)
        assert r.source in {"grid", "critical_line", "arc_hstar", "arc_sqrt2ustar"}


def test_assertions_pass(small_diagram):
    _, summary = small_diagram
    assert summary["assertions_passed"], summary["assertions"]
    assert not summary["failed_cells"]
    assert summary["u0"] < summary["u_star"]


def test_critical_line_monotone(small_diagram):
    rows, _ = small_diagram
    line = [(r.u, r.a) for r in rows if r.source == "critical_line"]
    assert len(line) >= 5
    assert all(a1 < a0 for (_, a0), (_, a1) in zip(line, line[1:]))


def test_critical_line_starts_at_h_star(small_diagram, h_star2):
    rows, _ = small_diagram
    first = [r for r in rows if r.source == "critical_line"][0]
    assert first.u == 0.0
    assert first.a == pytest.approx(h_star2.h_star, abs=1e-8)
    assert first.region == "critical-band"


def test_inner_parabola_region_supercritical(params2, h_star2):
    """Points strictly inside the critical parabola are supercritical."""
    h2 = h_star2.h_star**2
    for frac in (0.2, 0.5, 0.8):
        u = 0.4 * h2 * frac
        a = math.sqrt(h2 * (1.0 - frac) * 0.9)
        assert u + a * a / 2.0 < h2 / 2.0
        lam = tp.lambda_ua(u, a, params2)
        assert classify(lam, 1e-3) == "supercritical"


def test_outer_parabola_region_subcritical(params2):
    """Points on u + a^2/2 = u_star with a >= 0 are subcritical."""
    ustar = tp.u_star(params2)
    for frac in (0.0, 0.3, 0.7, 1.0):
        u = ustar * frac
        a = math.sqrt(2.0 * ustar * (1.0 - frac))
        lam = tp.lambda_ua(u, a, params2)
        assert classify(lam, 1e-3) == "subcritical"


def test_csv_schema(small_diagram):
    rows, _ = small_diagram
    text = rows_to_csv(rows)
    lines = text.strip().split("\n")
    assert lines[0] == CSV_HEADER == "source,u,a,lambda,region"
    assert len(lines) == len(rows) + 1
    sample = lines[1].split(",")
    assert len(sample) == 5
    float(sample[1]), float(sample[2]), float(sample[3])
    # 12 significant digits survive the round trip
    for r, line in zip(rows, lines[1:]):
        assert float(line.split(",")[3]) == pytest.approx(r.lam, rel=1e-11)


def test_regeneration_identical(params2):
    u_grid = [0.0, 0.5, 1.0]
    a_grid = [0.0, 0.6]
    rows1, s1 = build_diagram(params2, u_grid, a_grid, critline_points=5)
    rows2, s2 = build_diagram(params2, u_grid, a_grid, critline_points=5)
    assert rows_to_csv(rows1) == rows_to_csv(rows2)
    assert s1["h_star"] == s2["h_star"]


def test_failed_cells_reported(params2):
    """Heights beyond the quadrature window are reported, not dropped."""
    rows, summary = build_diagram(
        params2, [0.0, 0.5], [0.0, 9.0 * params2.sigma], critline_points=5
    )
    assert len(summary["failed_cells"]) == 2
    assert all(c["a"] == 9.0 * params2.sigma for c in summary["failed_cells"])
    assert all(r.a != 9.0 * params2.sigma for r in rows)


def test_spot_checks(params2):
    _, summary = build_diagram(
        params2,
        [0.05, 1.2],
        [0.2, 1.2],
        critline_points=5,
        spot_checks=1,
        spot_trials=5_000,
        seed=3,
    )
    checks = summary["spot_checks"]
    assert checks and all(c["passed"] for c in checks)


def test_empty_grid_rejected(params2):
    with pytest.raises(ValidationError):
        build_diagram(params2, [], [0.0])
    with pytest.raises(ValidationError):
        build_diagram(params2, [-0.1], [0.0])
