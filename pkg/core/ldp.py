"""
Large Deviations of Entropic Functionals
========================================

Boundary-perturbed functionals S^t + Phi(x_0) - Psi(x_t), with quadratic
Phi(x) = x.Fx/2 and Psi(x) = x.Gx/2, share the cumulant generating function
e(alpha) of the canonical functional on an effective domain

    J_inf = J_- & J_+,
    J_+ = {alpha : theta X_{1-alpha} theta + alpha (X_1 + F) > 0},
    J_- = {alpha : N^ + V*(X_alpha - alpha (G + theta X_1 theta)) V > 0},

where V spans the range of the initial covariance N and N^ is the inverse of
N on that range. The rate function of the canonical functional is

    I(s) = sup_alpha (alpha s - e(-alpha)),     I(-s) - I(s) = s,

and a perturbed functional has the extended rate J, equal to I between
eta_- = -e'(alpha_+) and eta_+ = -e'(alpha_-) and affine with slopes -alpha_+
and -alpha_- outside.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, NamedTuple, Optional, Tuple, Union

import numpy as np
from scipy import linalg
from scipy.optimize import brentq

from config import FunctionalTag, config
from core.cgf import (
    CgfProfile,
    cgf_derivative,
    cgf_second_derivative,
    cgf_spectral,
    critical_kappa,
    steady_state,
)
from core.errors import ModelError, NumericError, ResolutionError
from core.network import SystemMatrices, boundary_temperature_form
from core.riccati import RiccatiFamily

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class FunctionalKind:
    """Which entropic functional, and the initial law it starts from.

    ``initial_cov`` is the covariance N of a Gaussian initial state; it is
    required by ``canonical_transient`` and ignored by ``tde_transient`` (Dirac
    start). Explicit ``F`` and ``G`` override the table for the tag.
    """

    tag: FunctionalTag
    initial_mean: Optional[np.ndarray] = None
    initial_cov: Optional[np.ndarray] = None
    F: Optional[np.ndarray] = None
    G: Optional[np.ndarray] = None

    @classmethod
    def of(cls, tag: Union[str, FunctionalTag], **params) -> "FunctionalKind":
        return cls(tag=FunctionalTag(tag), **params)

    @property
    def stationary_start(self) -> bool:
        return self.tag not in (FunctionalTag.TDE_TRANSIENT, FunctionalTag.CANONICAL_TRANSIENT)


@dataclass(frozen=True, eq=False)
class BoundaryForms:
    """F, G and the initial-state form N^ restricted to Ran N (basis V)."""

    F: np.ndarray
    G: np.ndarray
    N_hat: Optional[np.ndarray]
    basis: Optional[np.ndarray]


@dataclass(frozen=True)
class FunctionalDomain:
    alpha_minus: float
    alpha_plus: float
    minus_closed: bool
    plus_closed: bool
    kappa_c: float

    def contains(self, alpha: float) -> bool:
        lower = alpha >= self.alpha_minus if self.minus_closed else alpha > self.alpha_minus
        upper = alpha <= self.alpha_plus if self.plus_closed else alpha < self.alpha_plus
        return lower and upper

    def __str__(self) -> str:
        left = "[" if self.minus_closed else "("
        right = "]" if self.plus_closed else ")"
        return f"{left}{self.alpha_minus:.10g}, {self.alpha_plus:.10g}{right}"


class RateFunction(NamedTuple):
    values: np.ndarray
    maximizers: np.ndarray  # beta with e'(beta) = -s
    clamped: np.ndarray
    degenerate: bool


@dataclass(frozen=True, eq=False)
class LdpResult:
    """Domain, eta bounds and rate functions of one functional on an s-grid."""

    tag: FunctionalTag
    domain: FunctionalDomain
    eta_minus: float
    eta_plus: float
    s_grid: np.ndarray
    I_values: np.ndarray
    J_values: np.ndarray
    symmetry_values: np.ndarray
    degenerate: bool = False
    clamped: bool = False
    ep: float = 0.0

    @property
    def alpha_minus(self) -> float:
        return self.domain.alpha_minus

    @property
    def alpha_plus(self) -> float:
        return self.domain.alpha_plus

    def summary(self) -> str:
        flags = [name for name, on in (("degenerate", self.degenerate), ("clamped", self.clamped)) if on]
        return (
            f"{self.tag.value}: domain {self.domain}, "
            f"eta in [{self.eta_minus:.10g}, {self.eta_plus:.10g}], ep = {self.ep:.10g}"
            + (f" [{', '.join(flags)}]" if flags else "")
        )


# =============================================================================
# EFFECTIVE DOMAIN
# =============================================================================


def _range_form(N: np.ndarray) -> Tuple[Optional[np.ndarray], Optional[np.ndarray]]:
    """(N^, V): inverse of N on its range in the eigenbasis V of that range."""
    w, V = linalg.eigh(0.5 * (N + N.T))
    if w[-1] <= 0:
        return None, None
    keep = w > 1e-12 * w[-1]
    return np.diag(1.0 / w[keep]), V[:, keep]


def boundary_forms(
    sys: SystemMatrices, kind: FunctionalKind, family: RiccatiFamily
) -> BoundaryForms:
    theta = sys.theta
    X1 = family.X1
    tag = kind.tag
    N: Optional[np.ndarray] = theta @ np.linalg.inv(X1) @ theta  # = M

    if tag == FunctionalTag.CANONICAL:
        F = G = np.zeros_like(X1)
    elif tag in (FunctionalTag.TDE_STEADY, FunctionalTag.TDE_TRANSIENT):
        F = -X1
        G = -theta @ X1 @ theta
        if tag == FunctionalTag.TDE_TRANSIENT:
            N = None
    elif tag == FunctionalTag.TDE_QUASI_MARKOV:
        F = -X1 + boundary_temperature_form(sys)
        G = theta @ F @ theta
    elif tag == FunctionalTag.ENTROPY_PRODUCTION:
        F = theta @ X1 @ theta - X1
        G = np.zeros_like(X1)
    else:
        if kind.initial_cov is None:
            raise ModelError("canonical_transient needs an initial covariance")
        N = np.asarray(kind.initial_cov, dtype=float)
        try:
            N_inv = linalg.inv(N)
        except linalg.LinAlgError as exc:
            raise ModelError("initial covariance is singular") from exc
        F = theta @ N_inv @ theta - X1
        G = N_inv - theta @ X1 @ theta

    if kind.F is not None:
        F = np.asarray(kind.F, dtype=float)
    if kind.G is not None:
        G = np.asarray(kind.G, dtype=float)

    N_hat, basis = _range_form(N) if N is not None else (None, None)
    return BoundaryForms(F=F, G=G, N_hat=N_hat, basis=basis)


def domain_margin(
    sys: SystemMatrices, forms: BoundaryForms, family: RiccatiFamily
) -> Callable[[float], float]:
    """alpha -> smallest eigenvalue over the matrices defining J_+ and J_-."""
    theta = sys.theta
    X1 = family.X1

    def margin(alpha: float) -> float:
        plus = theta @ family.X(1.0 - alpha) @ theta + alpha * (X1 + forms.F)
        value = float(linalg.eigvalsh(0.5 * (plus + plus.T))[0])
        if forms.basis is not None:
            V = forms.basis
            inner = family.X(alpha) - alpha * (forms.G + theta @ X1 @ theta)
            minus = forms.N_hat + V.T @ inner @ V
            value = min(value, float(linalg.eigvalsh(0.5 * (minus + minus.T))[0]))
        return value

    return margin


def _search_edge(margin: Callable[[float], float], edge: float) -> Tuple[float, bool]:
    """Walk from 0 towards ``edge``; bisect the first sign change of the margin."""
    points = config.solver.domain_grid_points
    grid = np.linspace(0.0, edge, points + 1)[1:]
    previous = 0.0
    for alpha in grid:
        if margin(float(alpha)) <= 0:
            root = brentq(margin, previous, float(alpha), xtol=config.solver.bisection_tol)
            return float(root), False
        previous = float(alpha)
    return edge, True


def functional_domain(
    sys: SystemMatrices,
    kind: FunctionalKind,
    kappa_c: Optional[float] = None,
    family: Optional[RiccatiFamily] = None,
) -> FunctionalDomain:
    """Endpoints of J_inf; open at interior sign changes, closed at 1/2 +- kappa_c."""
    if kappa_c is None:
        _, _, kappa_c = critical_kappa(sys)
    family = family or RiccatiFamily(sys, kappa_c)
    forms = boundary_forms(sys, kind, family)
    margin = domain_margin(sys, forms, family)
    if margin(0.0) <= 0:
        raise ResolutionError(f"{kind.tag.value}: alpha = 0 is not inside the effective domain")

    if math.isfinite(kappa_c):
        lower_edge, upper_edge = 0.5 - kappa_c, 0.5 + kappa_c
    else:
        cap = config.solver.alpha_search_cap
        lower_edge, upper_edge = -cap, cap

    alpha_minus, minus_closed = _search_edge(margin, lower_edge)
    alpha_plus, plus_closed = _search_edge(margin, upper_edge)
    if not math.isfinite(kappa_c):
        # no sign change up to the cap: the domain is unbounded on that side
        if minus_closed:
            alpha_minus, minus_closed = -math.inf, False
        if plus_closed:
            alpha_plus, plus_closed = math.inf, False

    domain = FunctionalDomain(alpha_minus, alpha_plus, minus_closed, plus_closed, kappa_c)
    logger.info(f"{sys.name} {kind.tag.value}: effective domain {domain}")
    return domain


# =============================================================================
# RATE FUNCTIONS
# =============================================================================


class _CgfModel:
    """e and e' of one system, with the degenerate equilibrium case made exact."""

    def __init__(self, sys: SystemMatrices, kappa_c: float):
        self.sys = sys
        self.kappa_c = kappa_c
        self.degenerate = not math.isfinite(kappa_c)
        self._slopes: Dict[float, float] = {}

    def value(self, alpha: float) -> float:
        if self.degenerate:
            return 0.0
        return cgf_spectral(self.sys, alpha)

    def slope(self, alpha: float) -> float:
        if self.degenerate:
            return 0.0
        key = round(float(alpha), 13)
        if key not in self._slopes:
            try:
                estimate = cgf_derivative(self.sys, alpha, self.kappa_c, method="riccati")
            except NumericError as exc:
                logger.debug(f"Riccati slope failed at alpha={alpha:.6g} ({exc}); using quadrature")
                estimate = cgf_derivative(self.sys, alpha, self.kappa_c, method="integral")
            self._slopes[key] = estimate.value
        return self._slopes[key]

    def inner_points(self, side: float) -> Tuple[float, ...]:
        """Interior alphas approaching the edge 1/2 + side kappa_c."""
        near = config.solver.near_boundary
        return tuple(0.5 + side * (self.kappa_c - d) for d in (near, near / 10, near / 100))


def _legendre(model: _CgfModel, s: float) -> Tuple[float, float, bool]:
    """(I(s), beta, clamped) with I(s) = -beta s - e(beta) and e'(beta) = -s."""
    lows = model.inner_points(-1.0)
    highs = model.inner_points(+1.0)
    target = -s

    lo = next((b for b in lows if model.slope(b) <= target), None)
    hi = next((b for b in highs if model.slope(b) >= target), None)
    if lo is None or hi is None:
        beta = lows[-1] if lo is None else highs[-1]
        logger.warning(f"s={s:.6g} beyond representable slopes; clamped at alpha={beta:.8g}")
        return -beta * s - model.value(beta), beta, True

    beta = float(
        brentq(lambda b: model.slope(b) - target, lo, hi, xtol=config.solver.bisection_tol)
    )
    return -beta * s - model.value(beta), beta, False


def rate_function(sys: SystemMatrices, profile: CgfProfile, s_grid: np.ndarray) -> RateFunction:
    """I(s) = sup_alpha (alpha s - e(-alpha)) by monotone root finding on e'.

    At equilibrium e vanishes identically: I(0) = 0 and I = inf elsewhere.
    """
    s_grid = np.asarray(s_grid, dtype=float)
    model = _CgfModel(sys, profile.kappa_c)
    if model.degenerate:
        scale = max(1.0, float(np.max(np.abs(s_grid)))) if s_grid.size else 1.0
        at_zero = np.abs(s_grid) <= config.solver.zero_tol * scale
        values = np.where(at_zero, 0.0, math.inf)
        return RateFunction(values, np.zeros_like(s_grid), np.zeros(s_grid.shape, bool), True)

    rows = [_legendre(model, float(s)) for s in s_grid]
    return RateFunction(
        values=np.array([r[0] for r in rows]),
        maximizers=np.array([r[1] for r in rows]),
        clamped=np.array([r[2] for r in rows], dtype=bool),
        degenerate=False,
    )


def eta_bounds(
    sys: SystemMatrices, profile: CgfProfile, domain: FunctionalDomain
) -> Tuple[float, float]:
    """(eta_-, eta_+) = (-e'(alpha_+), -e'(alpha_-)); infinite at critical endpoints."""
    model = _CgfModel(sys, profile.kappa_c)
    critical_plus = domain.plus_closed or not math.isfinite(domain.alpha_plus)
    critical_minus = domain.minus_closed or not math.isfinite(domain.alpha_minus)
    eta_minus = -math.inf if critical_plus else -model.slope(domain.alpha_plus)
    eta_plus = math.inf if critical_minus else -model.slope(domain.alpha_minus)
    return eta_minus, eta_plus


def extended_rate(
    sys: SystemMatrices,
    profile: CgfProfile,
    domain: FunctionalDomain,
    s_grid: np.ndarray,
    rate: Optional[RateFunction] = None,
) -> np.ndarray:
    """J(s): I on [eta_-, eta_+], -s alpha_+ - e(alpha_+) below, -s alpha_- - e(alpha_-) above."""
    s_grid = np.asarray(s_grid, dtype=float)
    rate = rate or rate_function(sys, profile, s_grid)
    model = _CgfModel(sys, profile.kappa_c)
    eta_minus, eta_plus = eta_bounds(sys, profile, domain)

    values = np.array(rate.values, dtype=float)
    if math.isfinite(eta_minus):
        below = s_grid < eta_minus
        a_plus = domain.alpha_plus
        values[below] = -s_grid[below] * a_plus - model.value(a_plus)
    if math.isfinite(eta_plus):
        above = s_grid > eta_plus
        a_minus = domain.alpha_minus
        values[above] = -s_grid[above] * a_minus - model.value(a_minus)
    return values


def symmetry_function(J_values: np.ndarray, s_grid: np.ndarray) -> np.ndarray:
    """s -> J(-s) - J(s) by reflecting a grid symmetric about 0."""
    s_grid = np.asarray(s_grid, dtype=float)
    J_values = np.asarray(J_values, dtype=float)
    if J_values.shape != s_grid.shape:
        raise ValueError("J_values and s_grid differ in shape")
    scale = max(1.0, float(np.max(np.abs(s_grid)))) if s_grid.size else 1.0
    if not np.allclose(s_grid, -s_grid[::-1], rtol=0.0, atol=1e-12 * scale):
        raise ValueError("s_grid is not symmetric about 0")
    with np.errstate(invalid="ignore"):
        return J_values[::-1] - J_values


def check_condition_r(
    sys: SystemMatrices,
    alpha_grid: np.ndarray,
    kappa_c: Optional[float] = None,
    family: Optional[RiccatiFamily] = None,
) -> np.ndarray:
    """Smallest eigenvalue of X_{1-alpha} + alpha X_1 at each alpha."""
    if family is None:
        if kappa_c is None:
            _, _, kappa_c = critical_kappa(sys)
        family = RiccatiFamily(sys, kappa_c)
    return np.array([family.condition_r(float(a)) for a in np.asarray(alpha_grid, dtype=float)])


def condition_grid(kappa_c: float, points: Optional[int] = None) -> np.ndarray:
    points = points or config.grids.condition_points
    half = kappa_c if math.isfinite(kappa_c) else config.grids.equilibrium_alpha_span
    return np.linspace(0.5 - half, 0.5 + half, points)


def default_s_grid(ep: float) -> np.ndarray:
    """Symmetric grid over [-s_span ep, s_span ep]; unit scale when ep vanishes."""
    grids = config.grids
    scale = ep if ep > config.solver.zero_tol else 1.0
    return np.linspace(-grids.s_span * scale, grids.s_span * scale, grids.s_points)


def clt_variance(sys: SystemMatrices, kappa_c: Optional[float] = None) -> float:
    """Asymptotic variance of S^t / sqrt(t), e''(0)."""
    return cgf_second_derivative(sys, 0.0, kappa_c)


def large_deviations(
    sys: SystemMatrices,
    kind: FunctionalKind,
    profile: CgfProfile,
    s_grid: Optional[np.ndarray] = None,
    family: Optional[RiccatiFamily] = None,
) -> LdpResult:
    """Domain, eta bounds, I, J and the symmetry function of one functional."""
    ep = profile.ep if profile.ep else steady_state(sys).ep
    s_grid = default_s_grid(ep) if s_grid is None else np.asarray(s_grid, dtype=float)
    family = family or RiccatiFamily(sys, profile.kappa_c)

    domain = functional_domain(sys, kind, profile.kappa_c, family)
    rate = rate_function(sys, profile, s_grid)
    eta_minus, eta_plus = eta_bounds(sys, profile, domain)
    J = extended_rate(sys, profile, domain, s_grid, rate)
    symmetry = symmetry_function(J, s_grid)

    result = LdpResult(
        tag=kind.tag,
        domain=domain,
        eta_minus=eta_minus,
        eta_plus=eta_plus,
        s_grid=s_grid,
        I_values=rate.values,
        J_values=J,
        symmetry_values=symmetry,
        degenerate=rate.degenerate,
        clamped=bool(np.any(rate.clamped)),
        ep=ep,
    )
    logger.info(result.summary())
    return result
