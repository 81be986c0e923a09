"""Phase-diagram figure from the diagram CSV.

Layout: interlacement level u on the horizontal axis, field height a on the
vertical axis; the critical line is dotted, the two parabola arcs are thick,
and the four landmark values (the two a-intercepts h*, sqrt(2u*) and the two
u-intercepts h*^2/2, u*) are annotated on the axes. The percolating and
non-percolating regions are labeled tau > 0 and tau = 0.
"""

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .schema import SchemaError, read_csv_columns

DIAGRAM_COLUMNS = ("source", "u", "a", "lambda", "region")


@dataclass(frozen=True)
class DiagramFigureSpec:
    input_csv: Path
    output_path: Path
    u_range: Optional[Tuple[float, float]] = None
    a_range: Optional[Tuple[float, float]] = None
    dpi: int = 150


def _series(cols, source):
    mask = [s == source for s in cols["source"]]
    u = np.array([float(x) for x, m in zip(cols["u"], mask) if m])
    a = np.array([float(x) for x, m in zip(cols["a"], mask) if m])
    order = np.argsort(u, kind="stable")
    return u[order], a[order]


def build_diagram_figure(cols, spec: DiagramFigureSpec):
    """Figure object for the diagram rows (kept separate for testability)."""
    crit_u, crit_a = _series(cols, "critical_line")
    arc_h_u, arc_h_a = _series(cols, "arc_hstar")
    arc_s_u, arc_s_a = _series(cols, "arc_sqrt2ustar")
    if arc_h_u.size == 0 or arc_s_u.size == 0:
        raise SchemaError(f"{spec.input_csv}: missing arc rows (arc_hstar / arc_sqrt2ustar)")

    # arcs carry a >= 0 by construction; the critical line may run below a = 0
    keep_h = arc_h_a >= 0.0
    keep_s = arc_s_a >= 0.0
    arc_h_u, arc_h_a = arc_h_u[keep_h], arc_h_a[keep_h]
    arc_s_u, arc_s_a = arc_s_u[keep_s], arc_s_a[keep_s]

    # landmarks from the arc endpoints
    h_star = float(arc_h_a[arc_h_u.argmin()])
    sqrt_2ustar = float(arc_s_a[arc_s_u.argmin()])
    h_star_sq_half = float(arc_h_u.max())
    u_star = float(arc_s_u.max())

    fig, ax = plt.subplots(figsize=(7.0, 5.6))
    if crit_u.size:
        ax.plot(crit_u, crit_a, linestyle=":", color="black", linewidth=1.6,
                label="critical line lambda = 1")
    ax.plot(arc_h_u, arc_h_a, linewidth=3.2, color="tab:blue",
            label="arc u + a^2/2 = h*^2/2")
    ax.plot(arc_s_u, arc_s_a, linewidth=3.2, color="tab:red",
            label="arc u + a^2/2 = u*")

    for x, y, text, axis in (
        (0.0, h_star, "h*", "a"),
        (0.0, sqrt_2ustar, "sqrt(2u*)", "a"),
        (h_star_sq_half, 0.0, "h*^2/2", "u"),
        (u_star, 0.0, "u*", "u"),
    ):
        ax.plot([x], [y], marker="o", color="black", markersize=4)
        offset = (6, 4) if axis == "a" else (0, -14)
        ax.annotate(text, (x, y), textcoords="offset points", xytext=offset, fontsize=10)

    ax.text(0.08 * max(u_star, 1e-9), 0.25 * h_star, "tau > 0", fontsize=12)
    ax.text(0.75 * u_star, 0.8 * sqrt_2ustar, "tau = 0", fontsize=12)

    ax.set_xlabel("interlacement level u")
    ax.set_ylabel("field height a")
    ax.set_title("Vacant-set level-set percolation on the regular tree")
    if spec.u_range:
        ax.set_xlim(*spec.u_range)
    if spec.a_range:
        ax.set_ylim(*spec.a_range)
    ax.axhline(0.0, color="gray", linewidth=0.6)
    ax.legend(loc="upper right", fontsize=9)
    fig.tight_layout()
    return fig


def render_diagram(spec: DiagramFigureSpec) -> Path:
    """Validate the CSV, build the figure, and write the image file."""
    cols = read_csv_columns(spec.input_csv, DIAGRAM_COLUMNS)
    fig = build_diagram_figure(cols, spec)
    out = Path(spec.output_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=spec.dpi)
    plt.close(fig)
    return out


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Render the phase-diagram figure.")
    parser.add_argument("input_csv", help="diagram CSV (source,u,a,lambda,region)")
    parser.add_argument("output", help="output image path")
    parser.add_argument("--u-range", type=float, nargs=2, default=None)
    parser.add_argument("--a-range", type=float, nargs=2, default=None)
    parser.add_argument("--dpi", type=int, default=150)
    args = parser.parse_args(argv)
    spec = DiagramFigureSpec(
        input_csv=Path(args.input_csv),
        output_path=Path(args.output),
        u_range=tuple(args.u_range) if args.u_range else None,
        a_range=tuple(args.a_range) if args.a_range else None,
        dpi=args.dpi,
    )
    try:
        out = render_diagram(spec)
    except (SchemaError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
