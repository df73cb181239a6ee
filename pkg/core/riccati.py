"""
Riccati Family
==============

For each alpha the algebraic Riccati equation

    R_alpha(X) = X B X - X A_alpha - A_alpha* X - C_alpha = 0,
    A_alpha = (1 - alpha) A - alpha A*,   C_alpha = alpha (1 - alpha) Q vartheta^-2 Q*,

has a unique maximal solution X_alpha on the closed critical interval
|alpha - 1/2| <= kappa_c. It is read off the Hamiltonian matrix

    K_alpha = [[-A_alpha, B], [C_alpha, A_alpha*]]

whose invariant subspace Ran[I; X_alpha] carries the restriction
-D_alpha = -(A_alpha - B X_alpha). Since D_alpha is stable, this is the stable
subspace of -K_alpha, which is what ``maximal_solution`` extracts.

At the interval edges the relevant eigenvalues of K_alpha reach the imaginary
axis. The solver then splits the near-axis cluster by sign (boundary mode) and,
if that does not produce a graph, extrapolates from two interior points.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, Optional, Tuple

import numpy as np
from scipy import linalg

from config import config
from core.errors import (
    DegenerateSubspaceError,
    DomainError,
    SpectralGapError,
)
from core.matops import solve_lyapunov, stable_invariant_subspace
from core.network import SystemMatrices

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class RiccatiSolution:
    """Maximal solution X_alpha with its closed loop D_alpha and gap Y_alpha."""

    alpha: float
    X: np.ndarray
    D: np.ndarray
    Y: Optional[np.ndarray]
    residual: float
    extrapolated: bool = False
    reduced_confidence: bool = False

    def summary(self) -> str:
        gap = "n/a" if self.Y is None else f"{np.min(linalg.eigvalsh(self.Y)):.3e}"
        flags = []
        if self.extrapolated:
            flags.append("extrapolated")
        if self.reduced_confidence:
            flags.append("reduced-confidence")
        return (
            f"alpha={self.alpha:.6f} residual={self.residual:.2e} "
            f"min eig X={np.min(linalg.eigvalsh(self.X)):.3e} min eig Y={gap}"
            + (f" [{', '.join(flags)}]" if flags else "")
        )


def alpha_matrices(sys: SystemMatrices, alpha: float) -> Tuple[np.ndarray, np.ndarray]:
    """(A_alpha, C_alpha)."""
    A_alpha = (1.0 - alpha) * sys.A - alpha * sys.A.T
    C_alpha = alpha * (1.0 - alpha) * sys.weighted_noise
    return A_alpha, C_alpha


def hamiltonian_matrix(sys: SystemMatrices, alpha: float) -> np.ndarray:
    """K_alpha = [[-A_alpha, QQ*], [C_alpha, A_alpha*]]."""
    A_alpha, C_alpha = alpha_matrices(sys, alpha)
    return np.block([[-A_alpha, sys.B], [C_alpha, A_alpha.T]])


def riccati_residual(sys: SystemMatrices, alpha: float, X: np.ndarray) -> float:
    """Frobenius norm of X B X - X A_alpha - A_alpha* X - C_alpha."""
    A_alpha, C_alpha = alpha_matrices(sys, alpha)
    R = X @ sys.B @ X - X @ A_alpha - A_alpha.T @ X - C_alpha
    return float(np.linalg.norm(R))


def _graph_solution(sys: SystemMatrices, alpha: float, boundary: bool) -> Tuple[np.ndarray, bool]:
    n = sys.dim
    subspace = stable_invariant_subspace(-hamiltonian_matrix(sys, alpha), boundary=boundary)
    U, V = subspace.basis[:n], subspace.basis[n:]
    condition = float(np.linalg.cond(U))
    if not np.isfinite(condition) or condition > config.solver.riccati_cond_max:
        raise DegenerateSubspaceError(
            f"invariant subspace at alpha={alpha:.6g} is not a graph (cond U = {condition:.2e})",
            condition=condition,
        )
    # X U = V  <=>  U* X* = V*
    X = linalg.lu_solve(linalg.lu_factor(U.T), V.T).T
    return 0.5 * (X + X.T), subspace.reduced_confidence


def _edge_solution(sys: SystemMatrices, edge: float, inward: float) -> Tuple[np.ndarray, bool]:
    """X at an interval edge: boundary-mode subspace, else Richardson extrapolation."""
    try:
        X, _ = _graph_solution(sys, edge, boundary=True)
        return X, False
    except (DegenerateSubspaceError, SpectralGapError) as exc:
        logger.info(f"boundary subspace failed at alpha={edge:.6g} ({exc}); extrapolating")
    h = config.solver.richardson_step
    near, _ = _graph_solution(sys, edge + inward * h, boundary=False)
    far, _ = _graph_solution(sys, edge + 2 * inward * h, boundary=False)
    X = 2.0 * near - far
    return 0.5 * (X + X.T), True


def solve_x(
    sys: SystemMatrices, alpha: float, kappa_c: float = math.inf
) -> Tuple[float, np.ndarray, bool, bool]:
    """(alpha used, X_alpha, extrapolated, reduced_confidence) with domain checks."""
    if math.isfinite(kappa_c):
        margin = config.solver.boundary_margin
        excess = abs(alpha - 0.5) - kappa_c
        if excess > margin:
            raise DomainError(
                f"alpha={alpha:.6g} outside the critical interval "
                f"[{0.5 - kappa_c:.6g}, {0.5 + kappa_c:.6g}]"
            )
        if excess >= -margin:
            side = 1.0 if alpha >= 0.5 else -1.0
            edge = 0.5 + side * kappa_c
            X, extrapolated = _edge_solution(sys, edge, inward=-side)
            logger.warning(
                f"alpha={alpha:.6g} is on the critical boundary; X is reduced-confidence"
            )
            return edge, X, extrapolated, True
    X, reduced = _graph_solution(sys, alpha, boundary=False)
    return alpha, X, False, reduced


def maximal_solution(
    sys: SystemMatrices,
    alpha: float,
    kappa_c: float = math.inf,
    with_gap: bool = True,
) -> RiccatiSolution:
    """Maximal solution of R_alpha(X) = 0 with closed loop and (optionally) gap."""
    used, X, extrapolated, reduced = solve_x(sys, alpha, kappa_c)
    A_alpha, C_alpha = alpha_matrices(sys, used)
    D = A_alpha - sys.B @ X
    residual = riccati_residual(sys, used, X)
    bound = config.solver.riccati_residual * (1.0 + float(np.linalg.norm(C_alpha)))
    if residual > bound and not (extrapolated or reduced):
        logger.warning(f"Riccati residual {residual:.2e} exceeds {bound:.2e} at alpha={used:.6g}")

    Y = None
    if with_gap:
        _, X_dual, ext_dual, red_dual = solve_x(sys, 1.0 - used, kappa_c)
        Y = X + sys.theta @ X_dual @ sys.theta
        Y = 0.5 * (Y + Y.T)
        extrapolated = extrapolated or ext_dual
        reduced = reduced or red_dual

    return RiccatiSolution(
        alpha=used,
        X=X,
        D=D,
        Y=Y,
        residual=residual,
        extrapolated=extrapolated,
        reduced_confidence=reduced,
    )


def gap(sys: SystemMatrices, alpha: float, kappa_c: float = math.inf) -> np.ndarray:
    """Y_alpha = X_alpha + theta X_{1-alpha} theta."""
    solution = maximal_solution(sys, alpha, kappa_c, with_gap=True)
    assert solution.Y is not None
    return solution.Y


def minimal_solution(sys: SystemMatrices, alpha: float, kappa_c: float = math.inf) -> np.ndarray:
    """-theta X_{1-alpha} theta, the minimal solution of R_alpha(X) = 0."""
    _, X_dual, _, _ = solve_x(sys, 1.0 - alpha, kappa_c)
    return -sys.theta @ X_dual @ sys.theta


def w_matrix(sys: SystemMatrices, alpha: float, kappa_c: float = math.inf) -> np.ndarray:
    """W_alpha = alpha X_1 - X_alpha; nonpositive on [0, 1] since alpha -> X_alpha is concave."""
    _, X1, _, _ = solve_x(sys, 1.0, kappa_c)
    _, X, _, _ = solve_x(sys, alpha, kappa_c)
    return alpha * X1 - X


def maximal_solution_derivative(
    sys: SystemMatrices,
    alpha: float,
    X: Optional[np.ndarray] = None,
    kappa_c: float = math.inf,
) -> np.ndarray:
    """dX_alpha/dalpha from D* X' + X' D + (X A' + A'* X + C') = 0.

    A' = -(A + A*) and C' = (1 - 2 alpha) Q vartheta^-2 Q*; valid strictly inside
    the critical interval where D_alpha is stable.
    """
    if X is None:
        _, X, _, _ = solve_x(sys, alpha, kappa_c)
    A_alpha, _ = alpha_matrices(sys, alpha)
    D = A_alpha - sys.B @ X
    A_prime = -(sys.A + sys.A.T)
    C_prime = (1.0 - 2.0 * alpha) * sys.weighted_noise
    forcing = X @ A_prime + A_prime.T @ X + C_prime
    return solve_lyapunov(D.T, forcing)


class RiccatiFamily:
    """Maximal solutions of one system, cached by alpha.

    The large-deviation layer evaluates X at the same points repeatedly
    (alpha and 1 - alpha, bisection points); the cache keeps that cheap.
    """

    def __init__(self, sys: SystemMatrices, kappa_c: float = math.inf):
        self.sys = sys
        self.kappa_c = kappa_c
        self._cache: Dict[float, np.ndarray] = {}

    def X(self, alpha: float) -> np.ndarray:
        key = round(float(alpha), 13)
        if key not in self._cache:
            _, X, _, _ = solve_x(self.sys, alpha, self.kappa_c)
            self._cache[key] = X
        return self._cache[key]

    @cached_property
    def X1(self) -> np.ndarray:
        return self.X(1.0)

    def solution(self, alpha: float) -> RiccatiSolution:
        return maximal_solution(self.sys, alpha, self.kappa_c)

    def gap(self, alpha: float) -> np.ndarray:
        Y = self.X(alpha) + self.sys.theta @ self.X(1.0 - alpha) @ self.sys.theta
        return 0.5 * (Y + Y.T)

    def w(self, alpha: float) -> np.ndarray:
        """W_alpha = alpha X_1 - X_alpha."""
        return alpha * self.X1 - self.X(alpha)

    def condition_r(self, alpha: float) -> float:
        """Minimum eigenvalue of X_{1-alpha} + alpha X_1."""
        return float(linalg.eigvalsh(self.X(1.0 - alpha) + alpha * self.X1)[0])
