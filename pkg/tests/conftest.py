import pytest

from briberysim import GameParams


@pytest.fixture
def p3() -> GameParams:
    """Three-node reference fixture: powers 2/5, 7/20, 1/4 with t = 1/2."""
    return GameParams.uniform(("2/5", "7/20", "1/4"), "1/2", 2, -1, 5, -3)
