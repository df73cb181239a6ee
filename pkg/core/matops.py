"""
Dense Matrix Kernels
====================

Matrix exponentials, Lyapunov solves, controllability, finite-time covariances
and stable invariant subspaces. Phase spaces of oscillator networks are small
(tens of coordinates), so everything here is dense and exact up to rounding.

Conventions:
  - ``solve_lyapunov(A, B)`` solves A M + M A* + B = 0.
  - ``finite_time_covariance(A, B, t)`` is M_t = int_0^t e^{sA} B e^{sA*} ds.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import linalg

from config import config
from core.errors import (
    DegenerateSubspaceError,
    DomainError,
    NumericError,
    SingularityError,
    SpectralGapError,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class InvariantSubspace:
    """Orthonormal basis of a spectral subspace and the spectrum it carries."""

    basis: np.ndarray
    eigenvalues: np.ndarray
    residual: float
    reduced_confidence: bool = False

    @property
    def dim(self) -> int:
        return self.basis.shape[1]


def expm(X: np.ndarray) -> np.ndarray:
    """Matrix exponential by scaling and squaring with Pade approximants."""
    X = np.asarray(X, dtype=float)
    if not np.all(np.isfinite(X)):
        raise NumericError("expm: non-finite entries")
    result = linalg.expm(X)
    if not np.all(np.isfinite(result)):
        raise NumericError("expm: overflow")
    return result


def _symmetrize(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


def _check_stable(A: np.ndarray) -> None:
    spectrum = linalg.eigvals(A)
    scale = max(1.0, float(np.linalg.norm(A, 2)))
    if np.max(spectrum.real) >= -config.solver.imag_axis_tol * scale:
        raise SingularityError(
            f"drift is not stable: max Re spectrum = {np.max(spectrum.real):.3e}"
        )


def kronecker_lyapunov(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Solve A M + M A* + B = 0 through the n^2 x n^2 vectorized system."""
    n = A.shape[0]
    eye = np.eye(n)
    # column-major vec: vec(AM) = (I kron A) vec M, vec(MA*) = (A kron I) vec M
    operator = np.kron(eye, A) + np.kron(A, eye)
    try:
        vec = linalg.solve(operator, -B.reshape(-1, order="F"))
    except linalg.LinAlgError as exc:
        raise SingularityError(f"Lyapunov operator singular: {exc}") from exc
    return vec.reshape((n, n), order="F")


def solve_lyapunov(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Unique solution M of A M + M A* + B = 0 for stable A."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    _check_stable(A)

    if A.shape[0] <= config.solver.kronecker_max_dim:
        M = kronecker_lyapunov(A, B)
    else:
        M = linalg.solve_continuous_lyapunov(A, -B)

    M = _symmetrize(M)
    residual = np.linalg.norm(A @ M + M @ A.T + B)
    if residual > 1e-8 * max(1.0, np.linalg.norm(B)):
        logger.warning(f"Lyapunov residual {residual:.2e} above expectation")
    return M


def kalman_matrix(A: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """[Q, AQ, ..., A^{n-1}Q] with each block rescaled by ||A||^-k.

    Column scaling leaves the rank unchanged and keeps the blocks comparable.
    """
    n = A.shape[0]
    scale = max(1.0, float(np.linalg.norm(A, 2)))
    blocks = [Q]
    for _ in range(n - 1):
        blocks.append(A @ blocks[-1] / scale)
    return np.hstack(blocks)


def controllability(A: np.ndarray, Q: np.ndarray, tol: float = 1e-9) -> Tuple[int, bool]:
    """Rank of the Kalman matrix by column-pivoted QR; controllable iff rank = n."""
    A = np.asarray(A, dtype=float)
    Q = np.asarray(Q, dtype=float)
    n = A.shape[0]
    K = kalman_matrix(A, Q)
    R = linalg.qr(K, mode="r", pivoting=True)[0]
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] == 0.0:
        return 0, n == 0
    rank = int(np.sum(diag > tol * diag[0]))
    return rank, rank == n


def controllable_subspace(A: np.ndarray, Q: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Orthonormal basis of Ran[Q, AQ, ..., A^{n-1}Q]."""
    K = kalman_matrix(np.asarray(A, dtype=float), np.asarray(Q, dtype=float))
    return linalg.orth(K, rcond=tol)


def _van_loan(A: np.ndarray, B: np.ndarray, t: float) -> np.ndarray:
    n = A.shape[0]
    block = np.zeros((2 * n, 2 * n))
    block[:n, :n] = A
    block[:n, n:] = B
    block[n:, n:] = -A.T
    F = expm(t * block)
    # top-right block is int_0^t e^{(t-s)A} B e^{-sA*} ds
    return F[:n, n:] @ F[:n, :n].T


def finite_time_covariance(A: np.ndarray, B: np.ndarray, t: float) -> np.ndarray:
    """M_t by the block exponential on a short step followed by doublings.

    The augmented matrix [[A, B], [0, -A*]] is exponentiated for a step h with
    ||A|| h <= 1; M_{2h} = M_h + e^{hA} M_h e^{hA*} then reaches t.
    """
    if t < 0:
        raise DomainError(f"finite_time_covariance: negative time {t}")
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if t == 0:
        return np.zeros_like(A)

    norm = float(np.linalg.norm(A, 1))
    doublings = max(0, int(np.ceil(np.log2(max(norm * t, 1.0)))))
    h = t / 2**doublings
    M = _van_loan(A, B, h)
    propagator = expm(h * A)
    for _ in range(doublings):
        M = M + propagator @ M @ propagator.T
        propagator = propagator @ propagator
    return _symmetrize(M)


def stationary_correlation(A: np.ndarray, M: np.ndarray, tau: float) -> np.ndarray:
    """Two-time covariance E[x(t + tau) x(t)*] of the stationary process."""
    if tau >= 0:
        return expm(tau * A) @ M
    return M @ expm(-tau * A).T


def stable_invariant_subspace(
    H: np.ndarray,
    tol: Optional[float] = None,
    boundary: bool = False,
) -> InvariantSubspace:
    """Spectral subspace of H for its left-half-plane spectrum.

    H must have even size 2n and exactly n eigenvalues with negative real part.
    Without ``boundary`` an eigenvalue within ``tol`` of iR is a spectral-gap
    error. With ``boundary`` the near-imaginary cluster is split by the sign of
    the computed real parts, and the result is marked reduced-confidence.
    """
    H = np.asarray(H, dtype=float)
    size = H.shape[0]
    if size % 2:
        raise DomainError("stable_invariant_subspace: matrix size must be even")
    n = size // 2
    if tol is None:
        tol = config.solver.imag_axis_tol * max(1.0, float(np.linalg.norm(H, 2)))

    spectrum = linalg.eigvals(H)
    near_axis = np.abs(spectrum.real) <= tol
    if near_axis.any() and not boundary:
        closest = float(np.min(np.abs(spectrum.real)))
        raise SpectralGapError(
            f"{int(near_axis.sum())} eigenvalue(s) within {tol:.1e} of the imaginary axis "
            f"(closest {closest:.2e})"
        )

    cut = -tol if not boundary else 0.0
    T, Z, sdim = linalg.schur(H, output="real", sort=lambda re, im: re < cut)
    if sdim != n:
        raise DegenerateSubspaceError(
            f"expected {n} stable eigenvalues, found {sdim}"
        )

    basis = Z[:, :n]
    restriction = T[:n, :n]
    eigenvalues = linalg.eigvals(restriction)
    residual = float(np.linalg.norm(H @ basis - basis @ (basis.T @ H @ basis)))
    if residual > 1e-8 * max(1.0, float(np.linalg.norm(H, 2))):
        logger.warning(f"invariant subspace residual {residual:.2e}")

    return InvariantSubspace(
        basis=basis,
        eigenvalues=eigenvalues,
        residual=residual,
        reduced_confidence=bool(boundary and near_axis.any()),
    )
