import numpy as np
import pytest

from duffing_qdyn.model import Branch, ModelParams, solve_attractor

FIG2_LAM = 0.016
FIG2_BETA = 4.0 / 75.0


@pytest.fixture(scope="session")
def fig2_params():
    return ModelParams.from_dimensionless(FIG2_LAM, FIG2_BETA)


@pytest.fixture(scope="session")
def has_solution(fig2_params):
    return solve_attractor(fig2_params, Branch.HAS)


@pytest.fixture(scope="session")
def las_solution(fig2_params):
    return solve_attractor(fig2_params, Branch.LAS)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
