import numpy as np
import pytest

from sitcarpet.config import preset, table1_params
from sitcarpet.solver import run


@pytest.fixture(scope="session")
def p05():
    return table1_params(0.5)


@pytest.fixture(scope="session")
def eq05(p05):
    from sitcarpet.equilibria import solve_equilibria
    return solve_equilibria(p05)


@pytest.fixture(scope="session")
def fig1_traj():
    return run(preset("fig1").scenario())


@pytest.fixture(scope="session")
def carpet_traj():
    return run(preset("carpet").scenario())


@pytest.fixture(scope="session")
def subsolution_05(p05):
    from sitcarpet.verify import build_subsolution
    return build_subsolution(p05, c=0.05, lambda_bar=1000.0, R2=32.0)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240809)
