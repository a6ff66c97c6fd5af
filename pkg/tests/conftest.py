import pytest

from sunsetwb import ibp


@pytest.fixture(scope="session")
def table() -> ibp.ReductionTable:
    """Laporta table at default seed bounds, shared across the suite."""
    return ibp.laporta(2, 1)
