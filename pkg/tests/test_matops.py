"""
Dense Matrix Kernels
====================

Checks against closed forms:

  - e^{tJ} for J = [[0, -1], [1, 0]] is the rotation by t
  - the steady covariance M solves A M + M A* + B = 0
  - M_t = M - e^{tA} M e^{tA*} for the finite-time covariance
  - the stable subspace of a diagonal matrix is spanned by its stable axes
"""

import sys
from pathlib import Path

import numpy as np
import pytest
from scipy import linalg

REPO_ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(REPO_ROOT))

from core.errors import (  # noqa: E402
    DegenerateSubspaceError,
    DomainError,
    NumericError,
    SingularityError,
    SpectralGapError,
)
from core.matops import (  # noqa: E402
    controllability,
    expm,
    finite_time_covariance,
    kronecker_lyapunov,
    solve_lyapunov,
    stable_invariant_subspace,
    stationary_correlation,
)


class TestExpm:
    def test_rotation(self):
        t = 0.7
        J = np.array([[0.0, -1.0], [1.0, 0.0]])
        expected = np.array([[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]])
        assert np.allclose(expm(t * J), expected, atol=1e-14)

    def test_zero_is_identity(self):
        assert np.allclose(expm(np.zeros((3, 3))), np.eye(3), atol=1e-15)

    def test_non_finite_rejected(self):
        with pytest.raises(NumericError):
            expm(np.array([[np.nan]]))


class TestLyapunov:
    def test_residual(self, two_chain):
        M = solve_lyapunov(two_chain.A, two_chain.B)
        residual = two_chain.A @ M + M @ two_chain.A.T + two_chain.B
        assert np.linalg.norm(residual) < 1e-12
        assert np.allclose(M, M.T)
        assert linalg.eigvalsh(M)[0] > 0

    def test_kronecker_matches_schur_solver(self, triangular):
        M = kronecker_lyapunov(triangular.A, triangular.B)
        reference = linalg.solve_continuous_lyapunov(triangular.A, -triangular.B)
        assert np.allclose(M, reference, atol=1e-11)

    def test_equilibrium_covariance_is_temperature(self, equilibrium_chain):
        M = solve_lyapunov(equilibrium_chain.A, equilibrium_chain.B)
        assert np.allclose(M, 2.0 * np.eye(4), atol=1e-12)

    def test_unstable_drift(self):
        with pytest.raises(SingularityError):
            solve_lyapunov(np.array([[0.5]]), np.array([[1.0]]))


class TestControllability:
    def test_rank_deficient_pair(self):
        A = np.diag([-1.0, -2.0])
        Q = np.array([[1.0], [0.0]])
        assert controllability(A, Q) == (1, False)

    def test_full_rank(self, two_chain):
        assert controllability(two_chain.A, two_chain.Q) == (4, True)


class TestFiniteTimeCovariance:
    @pytest.mark.parametrize("t", [0.01, 0.5, 3.0, 40.0])
    def test_matches_stationary_identity(self, two_chain, t):
        M = solve_lyapunov(two_chain.A, two_chain.B)
        propagator = expm(t * two_chain.A)
        expected = M - propagator @ M @ propagator.T
        assert np.allclose(finite_time_covariance(two_chain.A, two_chain.B, t), expected, atol=1e-10)

    def test_zero_time(self, two_chain):
        assert np.array_equal(finite_time_covariance(two_chain.A, two_chain.B, 0.0), np.zeros((4, 4)))

    def test_negative_time(self, two_chain):
        with pytest.raises(DomainError):
            finite_time_covariance(two_chain.A, two_chain.B, -1.0)

    def test_stationary_correlation_at_zero_lag(self, two_chain):
        M = solve_lyapunov(two_chain.A, two_chain.B)
        assert np.allclose(stationary_correlation(two_chain.A, M, 0.0), M)
        forward = stationary_correlation(two_chain.A, M, 0.3)
        backward = stationary_correlation(two_chain.A, M, -0.3)
        assert np.allclose(forward, backward.T, atol=1e-12)


class TestStableInvariantSubspace:
    def test_diagonal(self):
        H = np.diag([-1.0, 2.0, -3.0, 4.0])
        subspace = stable_invariant_subspace(H)
        assert subspace.dim == 2
        basis = subspace.basis
        projector = basis @ basis.T
        assert np.allclose(projector, np.diag([1.0, 0.0, 1.0, 0.0]), atol=1e-12)
        assert sorted(subspace.eigenvalues.real) == pytest.approx([-3.0, -1.0])
        assert not subspace.reduced_confidence

    def test_eigenvalue_on_axis(self):
        with pytest.raises(SpectralGapError):
            stable_invariant_subspace(np.diag([-1.0, 0.0, 1.0, 2.0]))

    def test_wrong_count(self):
        with pytest.raises(DegenerateSubspaceError):
            stable_invariant_subspace(np.diag([-1.0, -2.0, -3.0, 1.0]))

    def test_odd_size(self):
        with pytest.raises(DomainError):
            stable_invariant_subspace(np.eye(3))

    def test_boundary_mode_splits_by_sign(self):
        eps = 1e-12
        H = np.diag([-eps, -2.0, eps, 2.0])
        subspace = stable_invariant_subspace(H, boundary=True)
        assert subspace.dim == 2
        assert subspace.reduced_confidence
