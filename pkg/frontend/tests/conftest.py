from pathlib import Path

import pytest

DATA = Path(__file__).parent / "data"


@pytest.fixture
def golden_compare() -> Path:
    return DATA / "golden_compare"


@pytest.fixture
def golden_sweep() -> Path:
    return DATA / "golden_pc" / "sweep.csv"
