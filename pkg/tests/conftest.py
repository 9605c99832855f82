import pytest

from rvetc.config import load_config
from rvetc.synthesis import recover_gains, solve_synthesis


@pytest.fixture(scope="session")
def baseline_config():
    return load_config()


@pytest.fixture(scope="session")
def baseline_model(baseline_config):
    return baseline_config.discrete_model()


@pytest.fixture(scope="session")
def baseline_params(baseline_config, baseline_model):
    return baseline_config.synthesis_params(baseline_model)


@pytest.fixture(scope="session")
def solved_vars(baseline_params):
    return solve_synthesis(baseline_params)


@pytest.fixture(scope="session")
def baseline_gains(solved_vars, baseline_params):
    return recover_gains(solved_vars, baseline_params)


@pytest.fixture(scope="session")
def baseline_qp(baseline_config, baseline_model):
    return baseline_config.condensed_qp(baseline_model)
