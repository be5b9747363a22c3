import pytest

from gapatch import ToyOracle, build_corpus, default_placement


@pytest.fixture(scope="session")
def corpus():
    # The default desk-scale corpus used throughout the suite.
    return build_corpus(1, 20, 4)


@pytest.fixture(scope="session")
def small_corpus():
    return build_corpus(1, 5, 3)


@pytest.fixture
def oracle():
    return ToyOracle()


@pytest.fixture(scope="session")
def placement():
    return default_placement()
