import os
import sys
from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parent.parent
FIXTURES = REPO_ROOT / "fixtures"
AUTOMATA = FIXTURES / "automata"
GOLDEN = Path(__file__).resolve().parent / "golden"

sys.path.insert(0, str(REPO_ROOT / "src"))


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES


@pytest.fixture(scope="session")
def automata_dir():
    return AUTOMATA


@pytest.fixture(scope="session")
def solver_cmd():
    """Solver command template for tests: the environment override if set,
    else the in-repo LP-file MILP backend run as a subprocess."""
    from ssltl.ilp import default_solver_command

    return os.environ.get("SSLTL_SOLVER_CMD", default_solver_command())
