import pytest

from apcones.inequality import cached_rule


@pytest.fixture(scope="session")
def rules64():
    """Fine/coarse rule pairs shared across tests, keyed by dimension."""
    return {d: (cached_rule(d, 64), cached_rule(d, 32)) for d in (1, 2, 3, 4)}
