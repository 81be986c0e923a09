"""Fixtures that produce real artifacts through the primary CLI."""

import subprocess
import sys
from pathlib import Path

import pytest


def run_cli(out_dir, *args):
    cmd = [sys.executable, "-m", "treeperc.cli", *args, "--out-dir", str(out_dir)]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr + proc.stdout
    return proc


@pytest.fixture(scope="session")
def artifact_dir(tmp_path_factory):
    """d=2 diagram and tau artifacts generated by the installed CLI."""
    out = tmp_path_factory.mktemp("artifacts")
    run_cli(
        out,
        "diagram",
        "--u-points", "5",
        "--a-points", "5",
        "--points", "7",
    )
    run_cli(
        out,
        "tau",
        "--u", "0.6373976853826943",
        "--a", "0.5",
        "--n", "10",
        "--trials", "40000",
        "--seed", "11",
    )
    return out


@pytest.fixture(scope="session")
def diagram_csv(artifact_dir):
    return artifact_dir / "diagram.csv"


@pytest.fixture(scope="session")
def tau_csv(artifact_dir):
    return artifact_dir / "tau.csv"


@pytest.fixture(scope="session")
def tau_json(artifact_dir):
    return artifact_dir / "tau.json"
