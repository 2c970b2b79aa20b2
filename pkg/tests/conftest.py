import numpy as np
import pytest

from localtimes import SIGMA_X, SIGMA_Z, StateVector, spectral_decompose

@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20241018)

@pytest.fixture
def qubit_hamiltonian():
    """ sigma_z / 2, levels -1/2 and +1/2. """
    return spectral_decompose(SIGMA_Z / 2)

@pytest.fixture
def plus() -> StateVector:
    return StateVector.normalized(np.array([1, 1]), (2,))

@pytest.fixture
def bell() -> StateVector:
    return StateVector.normalized(np.array([1, 0, 0, 1]), (2, 2))

@pytest.fixture
def exchange() -> np.ndarray:
    return np.kron(SIGMA_X, SIGMA_X)
