# tests/conftest.py
import sys
from pathlib import Path

import numpy as np
import pytest

# Make the backend importable without installing the project
sys.path.insert(0, str(Path(__file__).parent.parent))

from backend.channels import identity_channel, kraus_to_chi, unitary_channel  # noqa: E402
from backend.experiment import CNOT, HADAMARD  # noqa: E402
from backend.mle_engine import SolverOptions  # noqa: E402
from backend.protocol_builder import cube_protocol  # noqa: E402
from backend.spam_simulator import SpamScenario  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def cube1():
    return cube_protocol(1)


@pytest.fixture(scope="session")
def cube2():
    return cube_protocol(2)


@pytest.fixture
def hadamard():
    return unitary_channel(HADAMARD)


@pytest.fixture
def cnot():
    return unitary_channel(CNOT)


@pytest.fixture
def identity_chi():
    return kraus_to_chi(identity_channel(2))


@pytest.fixture
def ideal_scenario():
    return SpamScenario.ideal()


@pytest.fixture
def spam_scenario():
    return SpamScenario.relaxation_scenario()


@pytest.fixture
def tight_solver():
    return SolverOptions(convergence_tol=1e-10, max_iterations=20000)
