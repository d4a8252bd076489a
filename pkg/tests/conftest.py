import numpy as np
import pytest

from env_settings import ENV_SETTINGS
from utils.models.presets import ThreeQubitParams
from utils.presets import build_qubit_n_qubit, build_three_qubit, default_qubit_n_qubit


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(ENV_SETTINGS.seed)


@pytest.fixture
def three_qubit_params() -> ThreeQubitParams:
    return ThreeQubitParams()


@pytest.fixture
def three_qubit(three_qubit_params):
    return build_three_qubit(three_qubit_params)


@pytest.fixture
def qubit_n_qubit_params():
    return default_qubit_n_qubit(4)


@pytest.fixture
def qubit_n_qubit(qubit_n_qubit_params):
    return build_qubit_n_qubit(qubit_n_qubit_params)

