"""Log-scale decay plot of the one-arm estimates with the geometric envelope.

Input: the per-radius CSV written by `treeperc tau` plus its JSON run record
(which carries lambda(u, a) and the envelope prefactor (d+1)/d * p0).
"""

import argparse
import json
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .schema import SchemaError, read_csv_columns

TAU_COLUMNS = ("n", "successes", "trials", "estimate", "stderr")


def build_decay_figure(cols, record):
    ns = np.array([int(x) for x in cols["n"]])
    est = np.array([float(x) for x in cols["estimate"]])
    err = np.array([float(x) for x in cols["stderr"]])
    lam = float(record["results"]["lambda"])
    prefactor = float(record["results"]["envelope_prefactor"])

    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    positive = est > 0
    ax.errorbar(ns[positive], est[positive], yerr=3 * err[positive], fmt="o",
                capsize=3, label="one-arm estimate (3 se)")
    grid = np.linspace(ns.min(), ns.max(), 200)
    ax.plot(grid, prefactor * lam**grid, linestyle="--", color="tab:orange",
            label=f"envelope (d+1)/d p0 lambda^n, lambda={lam:.4f}")
    ax.set_yscale("log")
    ax.set_xlabel("radius n")
    ax.set_ylabel("P[base reaches sphere n]")
    u = record["config"].get("u")
    a = record["config"].get("a")
    ax.set_title(f"One-arm decay at (u={u:g}, a={a:g})")
    ax.legend(fontsize=9)
    fig.tight_layout()
    return fig


def render_decay(tau_csv, run_json, output, dpi=150) -> Path:
    cols = read_csv_columns(tau_csv, TAU_COLUMNS)
    record = json.loads(Path(run_json).read_text())
    if "results" not in record or "lambda" not in record.get("results", {}):
        raise SchemaError(f"{run_json}: missing results.lambda (not a tau run record?)")
    fig = build_decay_figure(cols, record)
    out = Path(output)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=dpi)
    plt.close(fig)
    return out


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Render the one-arm decay figure.")
    parser.add_argument("tau_csv", help="per-radius CSV from `treeperc tau`")
    parser.add_argument("run_json", help="JSON run record from `treeperc tau`")
    parser.add_argument("output", help="output image path")
    parser.add_argument("--dpi", type=int, default=150)
    args = parser.parse_args(argv)
    try:
        out = render_decay(args.tau_csv, args.run_json, args.output, dpi=args.dpi)
    except (SchemaError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
