import pytest

from invsq.ladder import InteriorModel, compute_ladder


@pytest.fixture(scope="session")
def model():
    return InteriorModel()


@pytest.fixture(scope="session")
def ladder25(model):
    """The sigma = 1/2 ladder up to n = 25 (about half a minute)."""
    return compute_ladder(model, n_max=25, threads=4)
