"""Shared networks for the FluctNet test suite."""

import sys
from pathlib import Path

import numpy as np
import pytest

REPO_ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(REPO_ROOT))

from core.network import (  # noqa: E402
    NetworkSpec,
    QuasiMarkovCoupling,
    build_system,
    jacobi_chain,
    jacobi_chain_from_drive,
    single_oscillator,
    triangular_network,
)

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def two_chain():
    """Two-site chain with gamma = 1; no positive secular root, so kappa_c > kappa_0 = 1."""
    return build_system(jacobi_chain([2.0, 2.0], [1.0], (1.0, 1.0), (1.0, 3.0), name="two_chain"))


@pytest.fixture(scope="session")
def mild_chain():
    """Weakly driven two-site chain; exponential moments stay well sampled."""
    return build_system(jacobi_chain([2.0, 2.0], [1.0], (1.0, 1.0), (1.0, 1.2), name="mild_chain"))


@pytest.fixture(scope="session")
def equilibrium_chain():
    return build_system(
        jacobi_chain([2.0, 2.0], [1.0], (1.0, 1.0), (2.0, 2.0), name="equilibrium_chain")
    )


@pytest.fixture(scope="session")
def symmetric_two_chain():
    """Weakly damped symmetric 2-chain; kappa_c = kappa_0 = 1."""
    return build_system(
        jacobi_chain([2.0, 2.0], [1.0], (0.1, 0.1), (1.0, 3.0), name="symmetric_two_chain")
    )


@pytest.fixture(scope="session")
def four_chain():
    """Symmetric homogeneous 4-chain (b = 1, a = 1/2, gamma = 2); kappa_c = kappa_0 = 1."""
    return build_system(
        jacobi_chain([1.0] * 4, [0.5] * 3, (2.0, 2.0), (1.0, 3.0), name="four_chain")
    )


@pytest.fixture(scope="session")
def asymmetric_four_chain():
    """Same 4-chain with friction asymmetry delta = 1."""
    return build_system(jacobi_chain_from_drive(4, 1.0, 0.5, 2.0, 1.0, 2.0, 2.0))


@pytest.fixture(scope="session")
def triangular():
    return build_system(triangular_network(0.4, 0.1))


@pytest.fixture(scope="session")
def oscillator():
    return build_system(single_oscillator())


@pytest.fixture(scope="session")
def quasi_pair():
    spec = NetworkSpec(
        omega_sq=np.array([[2.0, 0.5], [0.5, 2.0]]),
        quasi_markov=QuasiMarkovCoupling(
            coupling=np.eye(2), bath_map=np.eye(2), temperatures=(1.0, 2.0)
        ),
        name="quasi_pair",
    )
    return build_system(spec)


@pytest.fixture
def fixture_path():
    return lambda name: FIXTURES / name
