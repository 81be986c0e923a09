import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

import treeperc as tp

FROZEN_PATH = Path(__file__).resolve().parent / "frozen_constants.json"


@pytest.fixture(scope="session")
def params2():
    return tp.make_params(2)


@pytest.fixture(scope="session")
def params3():
    return tp.make_params(3)


@pytest.fixture(scope="session")
def frozen():
    """Regression constants frozen by scripts/freeze_constants.py."""
    return json.loads(FROZEN_PATH.read_text())


@pytest.fixture(scope="session")
def h_star2(params2):
    return tp.solve_h_star(params2)


@pytest.fixture(scope="session")
def h_star3(params3):
    return tp.solve_h_star(params3)
