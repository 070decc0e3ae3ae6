from pathlib import Path

import pytest

from minewatch import runstat

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session", autouse=True)
def warm_jit():
    # trigger numba compilation once so timed tests measure the algorithm
    runstat.pmf_chain(0.5, 3)
    runstat.p_value(0.5, 10, 2)


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES
