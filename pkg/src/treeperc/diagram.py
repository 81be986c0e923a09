"""Assembly of the percolation phase diagram in the (u, a) plane.

Rows sample lambda(u, a) over a rectangular grid, along the traced critical
line lambda = 1, and along the two parabola arcs u + a^2/2 = const through
(0, h_star) and (u_star, 0). Classification into supercritical, subcritical
and critical-band regions is a pure function of lambda and the configured
band width eps; the one-arm probability is positive on the supercritical
side and vanishes on the subcritical side, so only the band itself is
undetermined.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import __version__
from .errors import TreepercError, ValidationError
from .params import TreeParams, u_star, vacancy_probs
from .simulate import estimate_tau_n
from .spectral import (
    critical_a,
    lambda_h,
    lambda_ua,
    parabola_scan,
    solve_h_star,
)

CSV_HEADER = "source,u,a,lambda,region"


@dataclass(frozen=True)
class DiagramRow:
    source: str   # critical_line | arc_hstar | arc_sqrt2ustar | grid
    u: float
    a: float
    lam: float
    region: str   # supercritical | subcritical | critical-band


def classify(lam: float, eps: float) -> str:
    """Region of a lambda value relative to the critical band |lambda - 1| <= eps."""
    if eps <= 0.0:
        raise ValidationError(f"band width eps must be > 0, got {eps}")
    if lam > 1.0 + eps:
        return "supercritical"
    if lam < 1.0 - eps:
        return "subcritical"
    return "critical-band"


def rows_to_csv(rows) -> str:
    """Render rows in the fixed CSV schema (12 significant digits)."""
    lines = [CSV_HEADER]
    for r in rows:
        lines.append(f"{r.source},{r.u:.12g},{r.a:.12g},{r.lam:.12g},{r.region}")
    return "\n".join(lines) + "\n"


def build_diagram(
    params: TreeParams,
    u_grid,
    a_grid,
    eps: float = 1e-3,
    *,
    arc_samples: int = 16,
    critline_points: int = 21,
    node_count: int = 400,
    M: float = 8.0,
    spot_checks: int = 0,
    spot_depth: int = 10,
    spot_trials: int = 20_000,
    seed: int = 0,
    workers: int = 1,
) -> tuple:
    """Rows plus a summary dict with the diagram's structural assertions.

    The summary asserts that the critical line passes through (0, h_star),
    that the arc through (0, h_star) is supercritical for u > 0, that the
    arc through (u_star, 0) is entirely subcritical, and that the traced
    critical height is strictly decreasing in u. Grid cells where the
    eigenvalue evaluation fails are collected in the summary instead of
    being silently dropped.
    """
    u_grid = [float(u) for u in u_grid]
    a_grid = [float(a) for a in a_grid]
    if not u_grid or not a_grid:
        raise ValidationError("u_grid and a_grid must be nonempty")
    if any(u < 0.0 for u in u_grid):
        raise ValidationError("u_grid values must be >= 0")

    rows = []
    failed_cells = []

    h_star = solve_h_star(params, node_count=node_count, M=M).h_star
    ustar = u_star(params)
    lam0 = lambda_h(0.0, params, node_count=node_count, M=M)
    u0 = math.log(lam0) / params.decay_exponent

    for a in a_grid:
        try:
            lam_a = lambda_h(a, params, node_count=node_count, M=M)
        except TreepercError as exc:
            failed_cells.extend({"u": u, "a": a, "error": str(exc)} for u in u_grid)
            continue
        for u in u_grid:
            lam = lam_a * math.exp(-u * params.decay_exponent)
            rows.append(DiagramRow("grid", u, a, lam, classify(lam, eps)))

    crit_points = []
    for i in range(critline_points):
        u = ustar * i / (critline_points - 1)
        ac = critical_a(u, params, node_count=node_count, M=M)
        if ac is None:
            continue
        lam = lambda_ua(u, ac, params, node_count=node_count, M=M)
        crit_points.append((u, ac))
        rows.append(DiagramRow("critical_line", u, ac, lam, classify(lam, eps)))

    arcs = {
        "arc_hstar": parabola_scan(h_star, arc_samples, params, node_count=node_count, M=M),
        "arc_sqrt2ustar": parabola_scan(
            math.sqrt(2.0 * ustar), arc_samples, params, node_count=node_count, M=M
        ),
    }
    for source, scan in arcs.items():
        for u, a, lam in scan:
            rows.append(DiagramRow(source, u, a, lam, classify(lam, eps)))

    assertions = {
        "critical_line_through_h_star": bool(
            crit_points and abs(crit_points[0][0]) < 1e-15 and abs(crit_points[0][1] - h_star) < 1e-6
        ),
        "hstar_arc_supercritical": all(
            classify(lam, eps) == "supercritical"
            for u, a, lam in arcs["arc_hstar"]
            if u > 0.0
        ),
        "sqrt2ustar_arc_subcritical": all(
            classify(lam, eps) == "subcritical" for _, _, lam in arcs["arc_sqrt2ustar"]
        ),
        "critical_height_strictly_decreasing": all(
            a1 < a0 for (_, a0), (_, a1) in zip(crit_points, crit_points[1:])
        ),
    }

    summary = {
        "params": {"d": params.d, "sigma2": params.sigma2},
        "h_star": h_star,
        "u_star": ustar,
        "u0": u0,
        "eps": eps,
        "assertions": assertions,
        "assertions_passed": all(assertions.values()),
        "failed_cells": failed_cells,
        "critical_line_points": len(crit_points),
        "tau_determined": (
            "supercritical rows have positive one-arm probability and subcritical "
            "rows have zero one-arm probability; only the critical band is undetermined"
        ),
        "tool_version": __version__,
    }

    if spot_checks > 0:
        summary["spot_checks"] = _spot_checks(
            params,
            rows,
            spot_checks,
            spot_depth,
            spot_trials,
            seed,
            workers,
            node_count=node_count,
            M=M,
        )

    return rows, summary


def _spot_checks(
    params, rows, k, depth, trials, seed, workers, *, node_count, M
):
    """Tie the analytic regions to simulation at k grid points per region.

    Supercritical points must show a positive one-arm estimate with 95%
    confidence; subcritical points must stay under the geometric decay
    envelope (d+1)/d * p0 * lambda^n plus 3 standard errors.
    """
    grid_rows = [r for r in rows if r.source == "grid"]
    supers = [r for r in grid_rows if r.region == "supercritical"][:k]
    subs = [r for r in grid_rows if r.region == "subcritical" and r.lam > 0.3][:k]
    results = []
    for i, r in enumerate(supers):
        est = estimate_tau_n(
            r.u, r.a, depth, trials, params, seed, workers=workers, _path=(40, i)
        )
        results.append(
            {
                "u": r.u,
                "a": r.a,
                "lambda": r.lam,
                "region": r.region,
                "estimate": est.estimate,
                "ci95_low": est.ci95[0],
                "passed": est.ci95[0] > 0.0,
            }
        )
    for i, r in enumerate(subs):
        est = estimate_tau_n(
            r.u, r.a, depth, trials, params, seed, workers=workers, _path=(41, i)
        )
        envelope = (
            (params.d + 1.0) / params.d * vacancy_probs(r.u, params).p0 * r.lam**depth
        )
        results.append(
            {
                "u": r.u,
                "a": r.a,
                "lambda": r.lam,
                "region": r.region,
                "estimate": est.estimate,
                "envelope": envelope,
                "passed": est.estimate <= envelope + 3.0 * est.stderr,
            }
        )
    return results
