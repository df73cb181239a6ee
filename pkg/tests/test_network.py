"""
Network Construction and Structural Identities
==============================================

A harmonic network with reservoirs is the linear Langevin system
dx = A x dt + Q dw. The builders must produce operators satisfying

  - A + A* = -Q vartheta^-1 Q*           (fluctuation-dissipation)
  - theta A theta = A*, theta Q = sigma Q (time reversal, sigma = -1 Markovian)
  - beta Q = Q vartheta^-1, theta beta theta = beta

up to rounding, and must reject descriptions that are not networks.
"""

import sys
from pathlib import Path

import numpy as np
import pytest

REPO_ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(REPO_ROOT))

from core.errors import AssumptionError, ModelError  # noqa: E402
from core.network import (  # noqa: E402
    BoundaryCoupling,
    NetworkSpec,
    build_markovian,
    build_quasi_markovian,
    configuration_controllable,
    default_beta,
    ep_positivity_certificate,
    jacobi_chain,
    jacobi_chain_from_drive,
    require_controllable,
    triangular_network,
    validate_structure,
)


class TestMarkovianBuilder:
    def test_shapes_and_kind(self, two_chain):
        assert two_chain.dim == 4
        assert two_chain.n_noise == 2
        assert two_chain.kind == "markovian"
        assert two_chain.sign == -1

    def test_fluctuation_dissipation(self, two_chain):
        lhs = two_chain.A + two_chain.A.T
        rhs = -two_chain.Q @ two_chain.vartheta_inv @ two_chain.Q.T
        assert np.allclose(lhs, rhs, atol=1e-12)

    def test_time_reversal(self, two_chain):
        theta = two_chain.theta
        assert np.allclose(theta @ two_chain.A @ theta, two_chain.A.T, atol=1e-12)
        assert np.allclose(theta @ two_chain.Q, -two_chain.Q, atol=1e-12)

    def test_structure_report_passes(self, two_chain, four_chain, triangular):
        for system in (two_chain, four_chain, triangular):
            report = validate_structure(system)
            assert report.passed, report.summary()
            assert report.failures() == []

    def test_default_beta_intertwines_noise(self, two_chain):
        beta = default_beta(two_chain)
        assert np.allclose(beta @ two_chain.Q, two_chain.Q @ two_chain.vartheta_inv, atol=1e-12)
        assert np.allclose(beta, beta.T)

    def test_sigma_beta_is_reversal_odd(self, two_chain):
        theta = two_chain.theta
        sigma = two_chain.sigma_beta
        assert np.allclose(theta @ sigma @ theta, -sigma, atol=1e-12)

    def test_equilibrium_flag(self, two_chain, equilibrium_chain):
        assert equilibrium_chain.at_equilibrium
        assert not two_chain.at_equilibrium

    def test_with_beta_keeps_operators(self, two_chain):
        other = two_chain.with_beta(np.eye(two_chain.dim) * 2.0)
        assert other.A is two_chain.A
        assert not validate_structure(other).passed


class TestQuasiMarkovianBuilder:
    def test_layout(self, quasi_pair):
        assert quasi_pair.kind == "quasi_markovian"
        assert quasi_pair.n_aux == 2
        assert quasi_pair.dim == 6
        assert quasi_pair.sign == 1

    def test_structure(self, quasi_pair):
        report = validate_structure(quasi_pair)
        assert report.passed, report.summary()

    def test_reservoirs_act_on_auxiliary_block(self, quasi_pair):
        assert np.allclose(quasi_pair.Q[quasi_pair.n_aux :], 0.0)

    def test_rejects_markovian_description(self):
        spec = jacobi_chain([2.0, 2.0], [1.0], (1.0, 1.0), (1.0, 2.0))
        with pytest.raises(ModelError):
            build_quasi_markovian(spec)


class TestInvalidNetworks:
    def test_indefinite_potential(self):
        spec = NetworkSpec(
            omega_sq=np.array([[1.0, 2.0], [2.0, 1.0]]),
            boundary=(BoundaryCoupling(0, 1.0, 1.0),),
        )
        with pytest.raises(ModelError, match="positive definite"):
            build_markovian(spec)

    def test_disconnected_graph(self):
        spec = NetworkSpec(
            omega_sq=np.eye(2),
            boundary=(BoundaryCoupling(0, 1.0, 1.0), BoundaryCoupling(1, 1.0, 2.0)),
        )
        with pytest.raises(ModelError, match="connected"):
            build_markovian(spec)

    def test_duplicate_boundary_sites(self):
        spec = NetworkSpec(
            omega_sq=np.array([[2.0, 1.0], [1.0, 2.0]]),
            boundary=(BoundaryCoupling(0, 1.0, 1.0), BoundaryCoupling(0, 1.0, 2.0)),
        )
        assert "boundary sites are not distinct" in spec.validate()

    def test_non_positive_temperature(self):
        spec = jacobi_chain([2.0, 2.0], [1.0], (1.0, 1.0), (1.0, -1.0))
        with pytest.raises(ModelError):
            build_markovian(spec)

    def test_triangular_couplings_checked(self):
        with pytest.raises(ModelError):
            triangular_network(0.0, 0.0, a=0.6)


class TestControllability:
    STAR = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 0.0], [1.0, 0.0, 2.0]])

    def test_chain_is_controllable(self, two_chain, four_chain):
        assert require_controllable(two_chain) == two_chain.dim
        assert require_controllable(four_chain) == four_chain.dim

    def test_symmetric_star_is_not(self):
        # (0, 1, -1) is a normal mode that never touches the driven site
        spec = NetworkSpec(omega_sq=self.STAR, boundary=(BoundaryCoupling(0, 1.0, 1.0),))
        assert not configuration_controllable(spec)
        with pytest.raises(AssumptionError, match="not controllable"):
            require_controllable(build_markovian(spec))

    def test_positivity_certificate(self):
        hot_cold = jacobi_chain([2.0, 2.0], [1.0], (1.0, 1.0), (1.0, 3.0))
        assert ep_positivity_certificate(hot_cold) == [(1.0, 3.0)]
        same = jacobi_chain([2.0, 2.0], [1.0], (1.0, 1.0), (2.0, 2.0))
        assert ep_positivity_certificate(same) == []


class TestReferenceNetworks:
    def test_drive_parametrization(self):
        spec = jacobi_chain_from_drive(4, 1.0, 0.5, 2.0, 1.0, 4.0, 2.0)
        gammas = [b.gamma for b in spec.boundary]
        thetas = [b.theta for b in spec.boundary]
        assert gammas[0] * gammas[1] == pytest.approx(4.0)
        assert np.log(gammas[0] / gammas[1]) == pytest.approx(1.0)
        assert thetas == [3.0, 5.0]
        assert spec.n_sites == 4

    def test_triangular_temperatures_average(self):
        spec = triangular_network(0.4, 0.1, theta_bar=2.0)
        assert np.mean(spec.temperatures) == pytest.approx(2.0)
        assert [b.site for b in spec.boundary] == [1, 3, 5]
