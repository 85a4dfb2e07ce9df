import pytest

from linkmech.cli import load_bundled_problem


@pytest.fixture(scope="session")
def counterexample_problem():
    return load_bundled_problem("counterexample")


@pytest.fixture(scope="session")
def binary_problem():
    return load_bundled_problem("binary")
