"""Deterministic finite-time cumulant generating functions of sampled functionals.

On a grid of N points (dt = t / (N - 1)) both functionals of
``accumulate_functionals`` are quadratic forms X.L X / 2 of the stacked path
X = (x_0, ..., x_{N-1}) with block-diagonal L. For the Gaussian stationary
path X = G Z, Z standard normal,

    g_t(alpha) = (1/t) log E[exp(-alpha X.L X / 2)]
               = -(1/2t) log det(I + alpha G* L G).

``path_oracle_cgf`` forms the determinant densely; ``transfer_oracle_cgf``
evaluates the same number through a backward recursion on n x n forms.
"""

from __future__ import annotations

import logging

import numpy as np
from scipy import linalg

from core.cgf import steady_state
from core.errors import DomainError
from core.network import SystemMatrices

from .simulate import CANONICAL, TDE, stationary_factor, trapezoid_weights, transition_factors

logger = logging.getLogger(__name__)

DENSE_LIMIT = 4000


def functional_blocks(
    sys: SystemMatrices, steps: int, dt: float, functional: str = CANONICAL
) -> np.ndarray:
    """Diagonal blocks L_k, shape (steps + 1, n, n), of the path quadratic form."""
    if functional not in (CANONICAL, TDE):
        raise ValueError(f"unknown functional {functional!r}")
    weights = trapezoid_weights(steps)
    blocks = -dt * weights[:, None, None] * sys.sigma_beta[None, :, :]
    blocks[0] += sys.beta
    blocks[-1] -= sys.beta
    if functional == CANONICAL:
        M_inv = linalg.inv(steady_state(sys).M)
        blocks[0] -= M_inv
        blocks[-1] += sys.theta @ M_inv @ sys.theta
    return 0.5 * (blocks + np.transpose(blocks, (0, 2, 1)))


def _path_root(sys: SystemMatrices, steps: int, dt: float) -> np.ndarray:
    """Block lower-triangular G with G G* the stationary path covariance."""
    n = sys.dim
    size = (steps + 1) * n
    factors = transition_factors(sys, dt)
    powers = np.empty((steps + 1, n, n))
    powers[0] = np.eye(n)
    for k in range(1, steps + 1):
        powers[k] = factors.propagator @ powers[k - 1]

    G = np.zeros((size, size))
    G[:, :n] = (powers @ stationary_factor(sys)).reshape(size, n)
    driven = (powers @ factors.factor).reshape(size, n)
    for j in range(1, steps + 1):
        G[j * n :, j * n : (j + 1) * n] = driven[: (steps + 1 - j) * n]
    return G


def path_oracle_cgf(
    sys: SystemMatrices,
    alpha: float,
    t: float,
    grid_points: int,
    functional: str = CANONICAL,
) -> float:
    """-(1/2t) log det(I + alpha G* L G) for the discrete functional on N grid points."""
    if alpha == 0.0 or t == 0.0:
        return 0.0
    if grid_points < 2:
        raise DomainError("at least two grid points required")
    n = sys.dim
    if grid_points * n > DENSE_LIMIT:
        raise DomainError(
            f"{grid_points} x {n} path dimension exceeds {DENSE_LIMIT}; use transfer_oracle_cgf"
        )
    steps = grid_points - 1
    dt = t / steps
    blocks = functional_blocks(sys, steps, dt, functional)
    G = _path_root(sys, steps, dt)

    size = G.shape[0]
    LG = np.einsum("kab,kbc->kac", blocks, G.reshape(steps + 1, n, size)).reshape(size, size)
    H = G.T @ LG
    H = np.eye(size) + alpha * 0.5 * (H + H.T)
    try:
        factor, _ = linalg.cho_factor(H)
    except linalg.LinAlgError as exc:
        raise DomainError(
            f"I + alpha S is not positive definite at alpha={alpha:.6g}, t={t:.6g}"
        ) from exc
    logdet = 2.0 * float(np.sum(np.log(np.diag(factor))))
    return -logdet / (2.0 * t)


def _logdet_pd(S: np.ndarray, alpha: float, t: float) -> float:
    try:
        factor, _ = linalg.cho_factor(0.5 * (S + S.T))
    except linalg.LinAlgError as exc:
        raise DomainError(
            f"exponential moment diverges at alpha={alpha:.6g}, t={t:.6g}"
        ) from exc
    return 2.0 * float(np.sum(np.log(np.diag(factor))))


def transfer_oracle_cgf(
    sys: SystemMatrices,
    alpha: float,
    t: float,
    steps: int,
    functional: str = CANONICAL,
) -> float:
    """Same value as ``path_oracle_cgf`` with steps + 1 grid points, in O(steps n^3).

    Backward recursion on V_k(x) = c_k exp(-x.P_k x / 2):
        S = I + L* P L,  P <- Phi*(P - P L S^-1 L* P) Phi + alpha L_k,
    finished by the stationary start x_0 ~ N(0, M).
    """
    if alpha == 0.0 or t == 0.0:
        return 0.0
    if steps < 1:
        raise DomainError("at least one step required")
    dt = t / steps
    n = sys.dim
    blocks = functional_blocks(sys, steps, dt, functional)
    factors = transition_factors(sys, dt)
    Phi, Lf = factors.propagator, factors.factor
    eye = np.eye(n)

    P = alpha * blocks[-1]
    log_c = 0.0
    for k in range(steps - 1, -1, -1):
        S = eye + Lf.T @ P @ Lf
        log_c -= 0.5 * _logdet_pd(S, alpha, t)
        PL = P @ Lf
        reduced = P - PL @ linalg.solve(0.5 * (S + S.T), PL.T, assume_a="pos")
        P = Phi.T @ reduced @ Phi + alpha * blocks[k]
        P = 0.5 * (P + P.T)

    root = stationary_factor(sys)
    log_c -= 0.5 * _logdet_pd(eye + root.T @ P @ root, alpha, t)
    value = log_c / t
    logger.debug(f"transfer oracle g_{t:g}({alpha:.4g}) = {value:.12g} ({steps} steps)")
    return value
