import pytest

from support import corpus


@pytest.fixture(scope="session")
def forged_corpus():
    return corpus(0)
