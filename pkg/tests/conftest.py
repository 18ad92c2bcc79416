import numpy as np
import pytest

from hyperspde.harness import desk_config, run_study


@pytest.fixture(scope="session")
def desk_linear_result():
    """Desk-scale linear study at the default seed; shared by several suites."""
    return run_study(desk_config("linear"))


@pytest.fixture(scope="session")
def desk_conv_result():
    return run_study(desk_config("conv"))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
