from pathlib import Path

import pytest

CORE_FIXTURES = Path(__file__).resolve().parents[2] / "tests" / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return CORE_FIXTURES
