"""
Steady State and Limiting Cumulant Generating Function
======================================================

The steady state is the centred Gaussian with covariance M solving

    A M + M A* + Q Q* = 0,

and its entropy production rate is

    ep = 1/2 || M^-1/2 (M Q - Q vartheta) vartheta^-1/2 ||^2
       = -1/2 tr(Sigma_beta M)
       = 1/2 tr(vartheta^-2 Q* M Q) - 1/2 tr(vartheta^-1 Q* Q).

Fluctuations of the canonical entropic functional S^t are governed by

    e(alpha) = lim 1/t log E[exp(-alpha S^t)]
             = -int log det(I - alpha E(omega)) domega / 4 pi,
    E(omega) = Q* (A* - i omega)^-1 Sigma_beta (A + i omega)^-1 Q,

finite on the closed interval |alpha - 1/2| <= kappa_c with
kappa_c = 1/eps_+ - 1/2 and eps_+ = max_omega max sp E(omega). The same value
follows from the spectrum of K_alpha,

    e(alpha) = tr(Q vartheta^-1 Q*)/4 - sum |Re lambda| / 4,

and from the Riccati closed loop, e(alpha) = tr(D_alpha)/2 + tr(Q vartheta^-1 Q*)/4.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Tuple

import numpy as np
from scipy import linalg
from scipy.optimize import minimize_scalar
from scipy.special import roots_legendre

from config import config
from core.errors import AccuracyError, DomainError, NumericError
from core.matops import expm, finite_time_covariance, solve_lyapunov
from core.network import SystemMatrices
from core.riccati import alpha_matrices, hamiltonian_matrix, maximal_solution_derivative, solve_x

logger = logging.getLogger(__name__)

_EVAL_BLOCK = 4096


@dataclass(frozen=True, eq=False)
class SteadyState:
    """Invariant covariance and entropy production of a network."""

    M: np.ndarray
    ep: float
    lyapunov_residual: float

    def summary(self) -> str:
        eigs = linalg.eigvalsh(self.M)
        return (
            f"ep = {self.ep:.10g}\n"
            f"M spectrum in [{eigs[0]:.6g}, {eigs[-1]:.6g}]\n"
            f"Lyapunov residual = {self.lyapunov_residual:.2e}"
        )


@dataclass(frozen=True, eq=False)
class CgfProfile:
    """Critical exponents and e(alpha) sampled on the closed critical interval."""

    eps_minus: float
    eps_plus: float
    kappa_c: float
    alpha_grid: np.ndarray
    e_values: np.ndarray
    e_prime: np.ndarray
    method: str = "spectral"
    ep: float = 0.0
    e_integral: Optional[np.ndarray] = field(default=None)

    @property
    def interval(self) -> Tuple[float, float]:
        return 0.5 - self.kappa_c, 0.5 + self.kappa_c

    @property
    def finite(self) -> bool:
        return math.isfinite(self.kappa_c)

    def summary(self) -> str:
        kappa = "inf" if not self.finite else f"{self.kappa_c:.10g}"
        return (
            f"eps_- = {self.eps_minus:.10g}, eps_+ = {self.eps_plus:.10g}, kappa_c = {kappa}\n"
            f"{len(self.alpha_grid)} alpha points, method {self.method}, ep = {self.ep:.10g}"
        )


class DerivativeEstimate(NamedTuple):
    value: float
    error: float
    near_boundary: bool


# =============================================================================
# STEADY STATE
# =============================================================================


def steady_state(sys: SystemMatrices) -> SteadyState:
    M = solve_lyapunov(sys.A, sys.B)
    residual = float(np.linalg.norm(sys.A @ M + M @ sys.A.T + sys.B))
    return SteadyState(M=M, ep=entropy_production_rate(sys, M), lyapunov_residual=residual)


def entropy_production_rate(sys: SystemMatrices, M: np.ndarray) -> float:
    """ep = 1/2 || M^-1/2 (M Q - Q vartheta) vartheta^-1 ||_F^2."""
    w, V = linalg.eigh(M)
    if w[0] <= 0:
        raise DomainError("covariance is not positive definite")
    inv_sqrt = (V / np.sqrt(w)) @ V.T
    flux = inv_sqrt @ (M @ sys.Q - sys.Q @ sys.vartheta) @ sys.vartheta_inv
    return 0.5 * float(np.sum(flux**2))


def ep_from_sigma(sys: SystemMatrices, M: np.ndarray) -> float:
    """ep = -mu(sigma_beta) = -1/2 tr(Sigma_beta M)."""
    return -0.5 * float(np.trace(sys.sigma_beta @ M))


def ep_from_noise(sys: SystemMatrices, M: np.ndarray) -> float:
    """ep = 1/2 tr(vartheta^-2 Q* M Q) - 1/2 tr(vartheta^-1 Q* Q)."""
    inv = sys.vartheta_inv
    return 0.5 * float(np.trace(inv @ inv @ sys.Q.T @ M @ sys.Q)) - 0.5 * float(
        np.trace(inv @ sys.Q.T @ sys.Q)
    )


def propagate_gaussian(
    sys: SystemMatrices, mean: np.ndarray, cov: np.ndarray, t: float
) -> Tuple[np.ndarray, np.ndarray]:
    """Law of x(t) started from N(mean, cov)."""
    if t < 0:
        raise DomainError(f"negative time {t}")
    propagator = expm(t * sys.A)
    new_mean = propagator @ np.asarray(mean, dtype=float)
    new_cov = propagator @ np.asarray(cov, dtype=float) @ propagator.T
    new_cov = new_cov + finite_time_covariance(sys.A, sys.B, t)
    return new_mean, 0.5 * (new_cov + new_cov.T)


def gaussian_relative_entropy(
    mean1: np.ndarray, cov1: np.ndarray, mean2: np.ndarray, cov2: np.ndarray
) -> float:
    """Ent(N(mean1, cov1) | N(mean2, cov2)) = -KL, a value in [-inf, 0]."""
    cov1 = np.asarray(cov1, dtype=float)
    cov2 = np.asarray(cov2, dtype=float)
    n = cov2.shape[0]
    try:
        factor = linalg.cho_factor(cov2)
    except linalg.LinAlgError as exc:
        raise DomainError("reference covariance is not positive definite") from exc
    sign, logdet1 = np.linalg.slogdet(cov1)
    if sign <= 0 or linalg.eigvalsh(cov1)[0] <= 0:
        return -math.inf
    logdet2 = 2.0 * float(np.sum(np.log(np.diag(factor[0]))))
    delta = np.asarray(mean1, dtype=float) - np.asarray(mean2, dtype=float)
    trace = float(np.trace(linalg.cho_solve(factor, cov1)))
    quad = float(delta @ linalg.cho_solve(factor, delta))
    value = -0.5 * (trace - n + quad + logdet2 - logdet1)
    return min(value, 0.0)


# =============================================================================
# FREQUENCY DOMAIN
# =============================================================================


def frequency_scale(sys: SystemMatrices) -> float:
    return max(1.0, float(np.max(np.abs(linalg.eigvals(sys.A)))))


def e_of_omega_batch(sys: SystemMatrices, omegas: np.ndarray) -> np.ndarray:
    """E(omega) for a vector of frequencies, shape (k, m, m)."""
    omegas = np.asarray(omegas, dtype=float)
    n, m = sys.dim, sys.n_noise
    out = np.empty((omegas.size, m, m), dtype=complex)
    eye = np.eye(n)
    for start in range(0, omegas.size, _EVAL_BLOCK):
        chunk = omegas[start : start + _EVAL_BLOCK]
        shifted = sys.A[None, :, :] + 1j * chunk[:, None, None] * eye[None, :, :]
        rhs = np.broadcast_to(sys.Q.astype(complex), (chunk.size, n, m))
        R = np.linalg.solve(shifted, rhs)
        E = np.conj(np.transpose(R, (0, 2, 1))) @ sys.sigma_beta @ R
        out[start : start + chunk.size] = 0.5 * (E + np.conj(np.transpose(E, (0, 2, 1))))
    return out


def e_of_omega(sys: SystemMatrices, omega: float) -> np.ndarray:
    """E(omega) = Q* (A* - i omega)^-1 Sigma_beta (A + i omega)^-1 Q, self-adjoint."""
    smallest = linalg.svdvals(sys.A + 1j * omega * np.eye(sys.dim))[-1]
    if smallest * config.solver.resolvent_norm_max < 1.0:
        raise NumericError(f"resolvent at omega={omega:.6g} is nearly singular")
    return e_of_omega_batch(sys, np.array([omega]))[0]


def _spectra(sys: SystemMatrices, omegas: np.ndarray) -> np.ndarray:
    """Eigenvalues of E(omega), ascending, shape (k, m)."""
    return np.linalg.eigvalsh(e_of_omega_batch(sys, omegas))


def _refine_maximum(
    grid: np.ndarray, values: np.ndarray, fn: Callable[[float], float], candidates: int = 8
) -> float:
    """Maximum of fn from grid samples, sharpened by bounded scalar search per peak."""
    peaks = [
        i
        for i in range(len(grid))
        if (i == 0 or values[i] >= values[i - 1])
        and (i == len(grid) - 1 or values[i] >= values[i + 1])
    ]
    peaks.sort(key=lambda i: values[i], reverse=True)
    best = float(np.max(values))
    for i in peaks[:candidates]:
        lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
        if hi <= lo:
            continue
        result = minimize_scalar(
            lambda w: -fn(w),
            bounds=(lo, hi),
            method="bounded",
            options={"xatol": 1e-10 * max(1.0, hi)},
        )
        best = max(best, -float(result.fun))
    return best


def critical_kappa(sys: SystemMatrices) -> Tuple[float, float, float]:
    """(eps_-, eps_+, kappa_c); kappa_c is inf when eps_+ vanishes."""
    tol = config.solver
    scale = frequency_scale(sys)
    grid = np.concatenate(
        [[0.0], scale * np.logspace(-tol.eps_grid_decades, tol.eps_grid_decades, tol.eps_grid_points)]
    )
    spectra = _spectra(sys, grid)

    def top(w: float) -> float:
        return float(_spectra(sys, np.array([w]))[0, -1])

    def bottom(w: float) -> float:
        return -float(_spectra(sys, np.array([w]))[0, 0])

    eps_plus = max(_refine_maximum(grid, spectra[:, -1], top), 0.0)
    eps_minus = min(-_refine_maximum(grid, -spectra[:, 0], bottom), 0.0)

    if eps_plus <= tol.zero_tol:
        logger.info(f"{sys.name}: eps_+ = {eps_plus:.2e}, kappa_c = inf")
        return 0.0, 0.0, math.inf
    kappa_c = 1.0 / eps_plus - 0.5
    logger.info(f"{sys.name}: eps_- = {eps_minus:.10g}, eps_+ = {eps_plus:.10g}, kappa_c = {kappa_c:.10g}")
    return eps_minus, eps_plus, kappa_c


def kappa_zero(sys: SystemMatrices) -> float:
    """Lower bound 1/2 (theta_max + theta_min) / (theta_max - theta_min) on kappa_c."""
    spread = sys.theta_max - sys.theta_min
    if spread <= config.solver.zero_tol * sys.theta_max:
        return math.inf
    return 0.5 * (sys.theta_max + sys.theta_min) / spread


# =============================================================================
# CUMULANT GENERATING FUNCTION
# =============================================================================


def _half_line_integral(
    integrand: Callable[[np.ndarray], np.ndarray], scale: float
) -> Tuple[float, float]:
    """int_0^inf f(omega) domega with omega = scale tan(phi) and Gauss-Legendre panels.

    Panels are doubled until two successive sums agree to ``quad_tol``; the
    summation order is fixed so repeated calls are bit-identical.
    """
    tol = config.solver
    nodes, weights = roots_legendre(tol.quad_nodes)

    def panel_sum(n_panels: int) -> float:
        edges = np.linspace(0.0, 0.5 * np.pi, n_panels + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        phi = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
        w = (half[:, None] * weights[None, :]).ravel()
        omega = scale * np.tan(phi)
        jacobian = scale / np.cos(phi) ** 2
        return float(np.sum(w * jacobian * integrand(omega)))

    panels = tol.quad_initial_panels
    previous = panel_sum(panels)
    error = math.inf
    for _ in range(tol.quad_max_doublings):
        panels *= 2
        current = panel_sum(panels)
        error = abs(current - previous)
        if error <= tol.quad_tol * max(1.0, abs(current)):
            return current, error
        previous = current
    raise AccuracyError(
        f"frequency quadrature did not converge ({panels} panels, error {error:.2e})",
        error_bound=error,
    )


def _check_interval(alpha: float, kappa_c: Optional[float], strict: bool) -> None:
    if kappa_c is None or not math.isfinite(kappa_c):
        return
    excess = abs(alpha - 0.5) - kappa_c
    margin = config.solver.boundary_margin
    if excess > margin or (strict and excess >= -margin):
        raise DomainError(
            f"alpha={alpha:.6g} not inside the critical interval "
            f"[{0.5 - kappa_c:.6g}, {0.5 + kappa_c:.6g}]"
        )


def _factors(sys: SystemMatrices, alpha: float, omegas: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    lam = _spectra(sys, omegas)
    denom = 1.0 - alpha * lam
    if np.any(denom <= 0):
        raise DomainError(f"alpha={alpha:.6g} outside the closed critical interval")
    return lam, denom


def cgf_integral(sys: SystemMatrices, alpha: float, kappa_c: Optional[float] = None) -> float:
    """e(alpha) = -int log det(I - alpha E(omega)) domega / 4 pi."""
    _check_interval(alpha, kappa_c, strict=False)
    if alpha == 0.0:
        return 0.0

    def integrand(omegas: np.ndarray) -> np.ndarray:
        _, denom = _factors(sys, alpha, omegas)
        return -np.sum(np.log(denom), axis=1) / (2.0 * np.pi)

    value, error = _half_line_integral(integrand, frequency_scale(sys))
    logger.debug(f"e({alpha:.6g}) = {value:.12g} +- {error:.1e} (integral)")
    return value


def cgf_spectral(sys: SystemMatrices, alpha: float) -> float:
    """e(alpha) from the real parts of the spectrum of K_alpha."""
    spectrum = linalg.eigvals(hamiltonian_matrix(sys, alpha))
    return 0.25 * sys.noise_trace - 0.25 * float(np.sum(np.abs(spectrum.real)))


def cgf_riccati_trace(sys: SystemMatrices, alpha: float, kappa_c: float = math.inf) -> float:
    """e(alpha) = tr(D_alpha)/2 + tr(Q vartheta^-1 Q*)/4."""
    used, X, _, _ = solve_x(sys, alpha, kappa_c)
    A_alpha, _ = alpha_matrices(sys, used)
    D = A_alpha - sys.B @ X
    return 0.5 * float(np.trace(D)) + 0.25 * sys.noise_trace


def cgf_riccati_naive(sys: SystemMatrices, alpha: float, kappa_c: float = math.inf) -> float:
    """e(alpha) = (alpha tr(Q vartheta^-1 Q*) - tr(Q Q* X_alpha)) / 2."""
    _, X, _, _ = solve_x(sys, alpha, kappa_c)
    return 0.5 * (alpha * sys.noise_trace - float(np.trace(sys.B @ X)))


def cgf_derivative(
    sys: SystemMatrices,
    alpha: float,
    kappa_c: Optional[float] = None,
    method: str = "integral",
) -> DerivativeEstimate:
    """e'(alpha) strictly inside the critical interval.

    ``integral``: int tr(E (I - alpha E)^-1) domega / 4 pi.
    ``riccati``: (tr(Q vartheta^-1 Q*) - tr(Q Q* X'_alpha)) / 2.
    """
    if kappa_c is None:
        _, _, kappa_c = critical_kappa(sys)
    _check_interval(alpha, kappa_c, strict=True)
    near = math.isfinite(kappa_c) and kappa_c - abs(alpha - 0.5) < config.solver.near_boundary
    if near:
        logger.warning(f"e'({alpha:.6g}) evaluated near the critical boundary; diverging")

    if method == "riccati":
        X_prime = maximal_solution_derivative(sys, alpha, kappa_c=kappa_c)
        value = 0.5 * (sys.noise_trace - float(np.trace(sys.B @ X_prime)))
        return DerivativeEstimate(value, 0.0, near)
    if method != "integral":
        raise ValueError(f"unknown derivative method {method!r}")

    def integrand(omegas: np.ndarray) -> np.ndarray:
        lam, denom = _factors(sys, alpha, omegas)
        return np.sum(lam / denom, axis=1) / (2.0 * np.pi)

    value, error = _half_line_integral(integrand, frequency_scale(sys))
    return DerivativeEstimate(value, error, near)


def cgf_second_derivative(
    sys: SystemMatrices, alpha: float = 0.0, kappa_c: Optional[float] = None
) -> float:
    """e''(alpha) = int tr((E (I - alpha E)^-1)^2) domega / 4 pi; e''(0) is the CLT variance."""
    _check_interval(alpha, kappa_c, strict=True)

    def integrand(omegas: np.ndarray) -> np.ndarray:
        lam, denom = _factors(sys, alpha, omegas)
        return np.sum((lam / denom) ** 2, axis=1) / (2.0 * np.pi)

    value, _ = _half_line_integral(integrand, frequency_scale(sys))
    return value


def cgf_profile(
    sys: SystemMatrices,
    n_points: Optional[int] = None,
    threads: int = 1,
    critical: Optional[Tuple[float, float, float]] = None,
    with_integral: bool = False,
) -> CgfProfile:
    """Sample e and e' on the closed critical interval.

    Interior values use the spectral route and quadrature derivatives; the two
    edges use the integral route (spectral if the quadrature fails) and carry
    infinite slopes.
    """
    n_points = n_points or config.grids.alpha_points
    eps_minus, eps_plus, kappa_c = critical or critical_kappa(sys)
    if math.isfinite(kappa_c):
        lo, hi = 0.5 - kappa_c, 0.5 + kappa_c
    else:
        span = config.grids.equilibrium_alpha_span
        lo, hi = 0.5 - span, 0.5 + span
    grid = np.linspace(lo, hi, n_points)
    margin = config.solver.boundary_margin

    def evaluate(alpha: float) -> Tuple[float, float, float]:
        on_edge = math.isfinite(kappa_c) and abs(abs(alpha - 0.5) - kappa_c) <= margin
        if on_edge:
            try:
                value = cgf_integral(sys, alpha, kappa_c)
            except (AccuracyError, DomainError) as exc:
                logger.warning(f"edge value at alpha={alpha:.6g} from spectral route ({exc})")
                value = cgf_spectral(sys, alpha)
            slope = math.copysign(math.inf, alpha - 0.5)
            return value, slope, value
        value = cgf_spectral(sys, alpha)
        slope = cgf_derivative(sys, alpha, kappa_c).value
        integral = cgf_integral(sys, alpha, kappa_c) if with_integral else math.nan
        return value, slope, integral

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        rows = list(pool.map(evaluate, grid))

    values = np.array([r[0] for r in rows])
    slopes = np.array([r[1] for r in rows])
    integrals = np.array([r[2] for r in rows]) if with_integral else None
    return CgfProfile(
        eps_minus=eps_minus,
        eps_plus=eps_plus,
        kappa_c=kappa_c,
        alpha_grid=grid,
        e_values=values,
        e_prime=slopes,
        method="spectral",
        ep=steady_state(sys).ep,
        e_integral=integrals,
    )
