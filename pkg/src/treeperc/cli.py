"""Command-line entry point.

Every command resolves its configuration (defaults, optional key=value
config file, flags, in that order), embeds the resolved configuration in
each artifact it writes, and prints a one-line summary. Exit codes:
0 success, 2 validation error, 3 numerical non-convergence or resource
limit, 4 a verification check failed.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from . import __version__
from .errors import (
    BracketError,
    ConvergenceError,
    ResourceLimitError,
    ValidationError,
)
from .params import (
    ball_capacity,
    make_params,
    mehler_kernel,
    nu_density,
    u_star,
    vacancy_probs,
)
from .diagram import build_diagram, rows_to_csv
from .simulate import (
    Seed,
    check_arc_monotonicity,
    check_domination,
    check_tau_level_shift,
    estimate_tau_profile,
    estimate_two_point,
    sample_interlacement_window,
)
from .spectral import (
    build_grid,
    critical_a,
    damping_factor,
    lambda_damped,
    lambda_h,
    lambda_ua,
    level_shift_gap,
    parabola_scan,
    solve_h_star,
    two_point_prediction,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3
EXIT_CHECK_FAILED = 4


def _parse_config_file(path: str) -> dict:
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, _, val = line.partition("=")
        values[key.strip().replace("-", "_")] = val.strip()
    return values


def _apply_config_file(args: argparse.Namespace, argv):
    """Overlay file values under explicit flags: flags win, file beats defaults."""
    if not getattr(args, "config", None):
        return
    file_values = _parse_config_file(args.config)
    explicit = {
        opt.lstrip("-").split("=", 1)[0].replace("-", "_")
        for opt in argv
        if opt.startswith("--")
    }
    for key, raw in file_values.items():
        if not hasattr(args, key) or key in explicit:
            continue
        current = getattr(args, key)
        if isinstance(current, bool):
            setattr(args, key, raw.lower() in ("1", "true", "yes"))
        elif isinstance(current, int):
            setattr(args, key, int(raw))
        elif isinstance(current, float):
            setattr(args, key, float(raw))
        else:
            setattr(args, key, raw)


def _resolved_config(args: argparse.Namespace) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    cfg["version"] = __version__
    return cfg


def _write_json(path: Path, payload: dict):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _artifact(args, results: dict) -> dict:
    return {"command": args.command, "config": _resolved_config(args), "results": results}


def _out(args, name: str) -> Path:
    return Path(args.out_dir) / name


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _cmd_lambda(args) -> int:
    params = make_params(args.d)
    lam = lambda_ua(args.u, args.a, params, node_count=args.node_count, M=args.M)
    _write_json(_out(args, "lambda.json"), _artifact(args, {"lambda": lam}))
    print(f"lambda(u={args.u:g}, a={args.a:g}) = {lam:.10f} (d={args.d})")
    return EXIT_OK


def _cmd_hstar(args) -> int:
    params = make_params(args.d)
    crit = solve_h_star(params, tol=args.tol, node_count=args.node_count, M=args.M)
    results = {"h_star": crit.h_star, "residual": crit.residual, "bracket": list(crit.bracket)}
    _write_json(_out(args, "hstar.json"), _artifact(args, results))
    print(f"h_star = {crit.h_star:.10f} |lambda - 1| = {crit.residual:.2e} (d={args.d})")
    return EXIT_OK


def _cmd_critline(args) -> int:
    params = make_params(args.d)
    ustar = u_star(params)
    lines = ["source,u,a,lambda,region"]
    points = []
    for i in range(args.points):
        u = ustar * i / (args.points - 1)
        ac = critical_a(u, params, node_count=args.node_count, M=args.M)
        if ac is None:
            continue
        lam = lambda_ua(u, ac, params, node_count=args.node_count, M=args.M)
        points.append({"u": u, "a": ac, "lambda": lam})
        lines.append(f"critical_line,{u:.12g},{ac:.12g},{lam:.12g},critical-band")
    csv_path = _out(args, "critline.csv")
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    csv_path.write_text("\n".join(lines) + "\n")
    _write_json(
        _out(args, "critline.json"),
        _artifact(args, {"points": points, "u_star": ustar, "csv": str(csv_path)}),
    )
    print(f"critical line: {len(points)} points for u in [0, {ustar:.6f}) -> {csv_path}")
    return EXIT_OK


def _cmd_verify_spectral(args) -> int:
    params = make_params(args.d)
    checks = {}

    gaps = []
    for a in [0.25 * i for i in range(9)]:
        for rho in [0.25 * (i + 1) for i in range(8)]:
            gaps.append(
                {
                    "a": a,
                    "rho": rho,
                    "gap": level_shift_gap(a, rho, params, node_count=args.node_count, M=args.M),
                }
            )
    checks["level_shift_gap"] = {
        "min_gap": min(g["gap"] for g in gaps),
        "passed": all(g["gap"] > 1e-6 for g in gaps),
        "grid": gaps,
    }

    chain = []
    for a, rho in ((0.0, 1.0), (0.5, 0.5), (1.0, 0.5)):
        lam_a = lambda_h(a, params, node_count=args.node_count, M=args.M)
        lam_shift = lambda_h(a + rho, params, node_count=args.node_count, M=args.M)
        lam_d = lambda_damped(a, rho, params, node_count=args.node_count, M=args.M)
        p = vacancy_probs(a * rho + 0.5 * rho * rho, params).p
        chain.append(
            {
                "a": a,
                "rho": rho,
                "damped_below_plain": lam_a - lam_d,
                "shift_below_damped_times_p": lam_d * p - lam_shift,
            }
        )
    checks["damped_chain"] = {
        "passed": all(
            c["damped_below_plain"] > 1e-6 and c["shift_below_damped_times_p"] > 1e-6
            for c in chain
        ),
        "triples": chain,
    }

    h_star = solve_h_star(params, node_count=args.node_count, M=args.M).h_star
    arcs = []
    for h in (h_star / 2.0, h_star, math.sqrt(2.0 * u_star(params))):
        scan = parabola_scan(h, 16, params, node_count=args.node_count, M=args.M)
        lams = [lam for _, _, lam in scan]
        arcs.append(
            {
                "h": h,
                "min_step": min(b - a for a, b in zip(lams, lams[1:])),
                "passed": all(b - a > 1e-9 for a, b in zip(lams, lams[1:])),
            }
        )
    checks["arc_monotone"] = {"passed": all(a["passed"] for a in arcs), "arcs": arcs}

    ok = all(c["passed"] for c in checks.values())
    _write_json(_out(args, "verify_spectral.json"), _artifact(args, {"checks": checks, "passed": ok}))
    print(
        "verify-spectral: "
        + ("PASS" if ok else "FAIL")
        + f" (min gap {checks['level_shift_gap']['min_gap']:.3e}, d={args.d})"
    )
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def _cmd_tau(args) -> int:
    params = make_params(args.d)
    seed = Seed(args.seed)
    profile = estimate_tau_profile(
        args.u,
        args.a,
        args.n,
        args.trials,
        params,
        seed,
        workers=args.workers,
        max_explored=args.max_explored,
    )
    lines = ["n,successes,trials,estimate,stderr"]
    for m in range(1, args.n + 1):
        e = profile[m]
        lines.append(f"{m},{e.successes},{e.trials},{e.estimate:.12g},{e.stderr:.12g}")
    csv_path = _out(args, "tau.csv")
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    csv_path.write_text("\n".join(lines) + "\n")
    lam = lambda_ua(args.u, args.a, params, node_count=args.node_count, M=args.M)
    results = {
        "lambda": lam,
        "p0": vacancy_probs(args.u, params).p0,
        "envelope_prefactor": (params.d + 1.0) / params.d * vacancy_probs(args.u, params).p0,
        "estimates": [
            {"n": m, "estimate": profile[m].estimate, "stderr": profile[m].stderr}
            for m in range(1, args.n + 1)
        ],
        "csv": str(csv_path),
    }
    _write_json(_out(args, "tau.json"), _artifact(args, results))
    top = profile[args.n]
    print(
        f"tau_{args.n}(u={args.u:g}, a={args.a:g}) = {top.estimate:.6f} "
        f"+/- {top.stderr:.6f} (lambda={lam:.6f}) -> {csv_path}"
    )
    return EXIT_OK


def _cmd_two_point(args) -> int:
    params = make_params(args.d)
    est = estimate_two_point(
        args.u, args.a, args.n, args.trials, params, Seed(args.seed), workers=args.workers
    )
    vac = vacancy_probs(args.u, params)
    pred = vac.p0 * vac.p**args.n * two_point_prediction(
        args.a, args.n, params, node_count=args.node_count, M=args.M
    )
    z = (est.estimate - pred) / est.stderr if est.stderr > 0 else float("nan")
    results = {
        "estimate": est.estimate,
        "stderr": est.stderr,
        "ci95": list(est.ci95),
        "successes": est.successes,
        "prediction": pred,
        "z_score": z,
    }
    _write_json(_out(args, "two_point.json"), _artifact(args, results))
    print(
        f"two-point(u={args.u:g}, a={args.a:g}, n={args.n}) = {est.estimate:.6g} "
        f"+/- {est.stderr:.2g} vs prediction {pred:.6g} (z={z:+.2f})"
    )
    return EXIT_OK


def _cmd_verify_mc(args) -> int:
    params = make_params(args.d)
    seed = Seed(args.seed)
    reports = []

    for k, (u, a, rho) in enumerate(
        [
            (0.1, 0.3, 0.4),
            (0.0, 0.0, 0.5),
            (0.0, 0.5, 0.5),
            (0.2, 0.0, 1.0),
            (0.05, 1.0, 0.25),
            (0.3, 0.2, 0.2),
        ]
    ):
        reports.append(
            check_tau_level_shift(
                u, a, rho, args.n, args.trials, params, Seed(args.seed, stream=k + 1),
                workers=args.workers,
            )
        )

    h_star = solve_h_star(params, node_count=args.node_count, M=args.M).h_star
    for k, h in enumerate((h_star, math.sqrt(2.0 * u_star(params)))):
        reports.append(
            check_arc_monotonicity(
                h, args.n, 6, args.trials, params, Seed(args.seed, stream=10 + k),
                workers=args.workers,
            )
        )

    for k, (a, rho) in enumerate(((0.0, 0.5), (0.5, 0.5))):
        reports.append(
            check_domination(
                a,
                rho,
                args.dom_n,
                3,
                args.dom_trials,
                params,
                Seed(args.seed, stream=20 + k),
                workers=args.workers,
                compare_buffer=2,
            )
        )

    payload = [
        {"name": r.name, "passed": r.passed, "details": r.details} for r in reports
    ]
    ok = all(r.passed for r in reports)
    _write_json(_out(args, "verify_mc.json"), _artifact(args, {"reports": payload, "passed": ok}))
    for r in reports:
        tag = "PASS" if r.passed else "FAIL"
        print(f"  [{tag}] {r.name} {json.dumps({k: r.details[k] for k in ('a', 'rho', 'h', 'u') if k in r.details})}")
    print(f"verify-mc: {'PASS' if ok else 'FAIL'} ({len(reports)} checks, d={args.d})")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def _cmd_diagram(args) -> int:
    params = make_params(args.d)
    ustar = u_star(params)
    u_grid = [args.u_max * i / (args.u_points - 1) for i in range(args.u_points)]
    a_grid = [
        args.a_min + (args.a_max - args.a_min) * i / (args.a_points - 1)
        for i in range(args.a_points)
    ]
    rows, summary = build_diagram(
        params,
        u_grid,
        a_grid,
        eps=args.eps,
        node_count=args.node_count,
        M=args.M,
        critline_points=args.points,
        spot_checks=args.spot_checks,
        seed=args.seed,
        workers=args.workers,
    )
    csv_path = _out(args, "diagram.csv")
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    csv_path.write_text(rows_to_csv(rows))
    _write_json(_out(args, "diagram_summary.json"), _artifact(args, summary))
    ok = summary["assertions_passed"] and not summary["failed_cells"]
    print(
        f"diagram: {len(rows)} rows, h_star={summary['h_star']:.6f}, "
        f"u_star={ustar:.6f}, assertions {'PASS' if ok else 'FAIL'} -> {csv_path}"
    )
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def _cmd_selftest(args) -> int:
    params = make_params(args.d)
    sigma = params.sigma
    failures = []

    def check(name, ok):
        print(f"  [{'ok' if ok else 'FAIL'}] {name}")
        if not ok:
            failures.append(name)

    p2 = make_params(2)
    check("sigma2(d=2) = 2/3", abs(p2.sigma2 - 2.0 / 3.0) < 1e-15)
    check("decay exponent(d=2) = 1/2", abs(p2.decay_exponent - 0.5) < 1e-15)
    check("u_star(d=2) = 2 ln 2", abs(u_star(p2) - 2.0 * math.log(2.0)) < 1e-14)
    check(
        "u_star solves its equation",
        abs(params.d * math.exp(-u_star(params) * params.decay_exponent) - 1.0) < 1e-14,
    )
    check(
        "density symmetric",
        abs(nu_density(0.7, params) - nu_density(-0.7, params)) < 1e-15,
    )
    check(
        "kernel symmetric",
        abs(mehler_kernel(0.3, -1.1, params) - mehler_kernel(-1.1, 0.3, params)) < 1e-14,
    )
    check(
        "kernel at origin",
        abs(mehler_kernel(0.0, 0.0, p2) - 2.0 / math.sqrt(3.0)) < 1e-14,
    )
    vac = vacancy_probs(0.0, params)
    check("zero level vacancy", vac.p0 == 1.0 and vac.p == 1.0)
    check(
        "capacity ladder",
        all(
            abs(ball_capacity(n + 1, params) - params.d * ball_capacity(n, params)) < 1e-9
            for n in range(1, 8)
        ),
    )
    grid = build_grid(-8.0 * sigma, params, node_count=args.node_count, M=args.M)
    check("full grid mass 1", abs(grid.mass - 1.0) < 1e-12)
    grid0 = build_grid(0.0, params, node_count=args.node_count, M=args.M)
    check("half grid mass 1/2", abs(grid0.mass - 0.5) < 1e-10)
    lam_low = lambda_h(-8.0 * sigma, params, node_count=args.node_count, M=args.M)
    check("lambda at -8 sigma = d", abs(lam_low - params.d) < 1e-6)
    lams = [lambda_h(h, params, node_count=args.node_count, M=args.M) for h in (0.0, 0.5, 1.0)]
    check("lambda decreasing", lams[0] > lams[1] > lams[2])
    check(
        "two-point with no constraint",
        abs(two_point_prediction(-8.0 * sigma, 6, params, node_count=args.node_count, M=args.M) - 1.0)
        < 1e-6,
    )
    check("damping factor is 1 below the height", damping_factor(0.2, 0.5, 0.5, params) == 1.0)
    window = sample_interlacement_window(0.0, 2, params, Seed(args.seed))
    check("zero level window empty", not window.occupied.any())
    ok = not failures
    print(f"selftest: {'PASS' if ok else 'FAIL ' + str(failures)} (d={args.d})")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_common(sub: argparse.ArgumentParser):
    sub.add_argument("--d", type=int, default=2, help="branching number (tree degree d+1)")
    sub.add_argument("--seed", type=int, default=0, help="RNG seed")
    sub.add_argument("--workers", type=int, default=1, help="worker processes for sampling")
    sub.add_argument("--node-count", type=int, default=400, help="quadrature nodes")
    sub.add_argument("--M", type=float, default=8.0, help="grid half-width in units of sigma")
    sub.add_argument("--out-dir", default=".", help="directory for artifacts")
    sub.add_argument("--config", default=None, help="key=value config file with defaults")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="treeperc",
        description="Critical-line and Monte Carlo laboratory for vacant-set "
        "level-set percolation on regular trees.",
    )
    parser.add_argument("--version", action="version", version=f"treeperc {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    sp = subs.add_parser("lambda", help="evaluate lambda(u, a)")
    _add_common(sp)
    sp.add_argument("--a", type=float, required=True, help="field height")
    sp.add_argument("--u", type=float, default=0.0, help="interlacement level")
    sp.set_defaults(func=_cmd_lambda)

    sp = subs.add_parser("hstar", help="solve lambda_h = 1")
    _add_common(sp)
    sp.add_argument("--tol", type=float, default=1e-9)
    sp.set_defaults(func=_cmd_hstar)

    sp = subs.add_parser("critline", help="trace the critical line a_c(u)")
    _add_common(sp)
    sp.add_argument("--points", type=int, default=21)
    sp.set_defaults(func=_cmd_critline)

    sp = subs.add_parser("verify-spectral", help="eigenvalue inequality suite")
    _add_common(sp)
    sp.set_defaults(func=_cmd_verify_spectral)

    sp = subs.add_parser("tau", help="estimate sphere-reaching probabilities")
    _add_common(sp)
    sp.add_argument("--u", type=float, required=True)
    sp.add_argument("--a", type=float, required=True)
    sp.add_argument("--n", type=int, default=10)
    sp.add_argument("--trials", type=int, default=100_000)
    sp.add_argument(
        "--max-explored",
        type=int,
        default=50_000_000,
        help="per-trial cap on generated cluster vertices",
    )
    sp.set_defaults(func=_cmd_tau)

    sp = subs.add_parser("two-point", help="estimate a fixed-geodesic probability")
    _add_common(sp)
    sp.add_argument("--u", type=float, required=True)
    sp.add_argument("--a", type=float, required=True)
    sp.add_argument("--n", type=int, default=8)
    sp.add_argument("--trials", type=int, default=100_000)
    sp.set_defaults(func=_cmd_two_point)

    sp = subs.add_parser("verify-mc", help="statistical inequality suites")
    _add_common(sp)
    sp.add_argument("--n", type=int, default=10, help="radius for tau estimates")
    sp.add_argument("--trials", type=int, default=100_000)
    sp.add_argument("--dom-n", type=int, default=8, help="radius for the domination check")
    sp.add_argument("--dom-trials", type=int, default=100_000)
    sp.set_defaults(func=_cmd_verify_mc)

    sp = subs.add_parser("diagram", help="build the phase diagram CSV + summary")
    _add_common(sp)
    sp.add_argument("--u-max", type=float, default=1.5)
    sp.add_argument("--u-points", type=int, default=16)
    sp.add_argument("--a-min", type=float, default=-1.0)
    sp.add_argument("--a-max", type=float, default=2.0)
    sp.add_argument("--a-points", type=int, default=16)
    sp.add_argument("--eps", type=float, default=1e-3)
    sp.add_argument("--points", type=int, default=21, help="critical line samples")
    sp.add_argument("--spot-checks", type=int, default=0, help="MC spot checks per region")
    sp.set_defaults(func=_cmd_diagram)

    sp = subs.add_parser("selftest", help="fast closed-form sanity checks")
    _add_common(sp)
    sp.set_defaults(func=_cmd_selftest)

    return parser


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config_file(args, argv)
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConvergenceError, BracketError, ResourceLimitError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def entrypoint():
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
