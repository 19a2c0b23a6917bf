"""Shared fixtures: the three example families are stateless apart from
cached marginal tables, so session scope is safe and saves the table builds."""

import numpy as np
import pytest

from robustgrowth.pairs import CtouFamily, StochVolFamily, TDistFamily


@pytest.fixture(scope="session")
def ctou():
    return CtouFamily()


@pytest.fixture(scope="session")
def tdist():
    return TDistFamily()


@pytest.fixture(scope="session")
def stochvol():
    return StochVolFamily()


@pytest.fixture()
def rng():
    return np.random.default_rng(20260817)
