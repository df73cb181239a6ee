"""
Harmonic Network Construction
=============================

Turns a declarative network description into the phase-space operators of the
linear Langevin system

    dx = A x dt + Q dw,

together with the time-reversal involution theta, the reservoir temperatures
vartheta and a reference operator beta with beta Q = Q vartheta^-1.

State ordering is fixed:
  - Markovian networks: x = (p, omega q), theta = diag(-I, I), theta Q = -Q.
  - Quasi-Markovian networks: x = (r, p, omega q), theta = diag(I, -I, I),
    theta Q = +Q; the reservoirs act on the auxiliary variables r.

omega is the symmetric positive square root of omega_sq, so theta A theta = A*
holds exactly in floating point.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from functools import cached_property
from itertools import combinations
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from config import NetworkPreset, config
from core.errors import AssumptionError, ModelError, NumericError
from core.matops import controllability, controllable_subspace

logger = logging.getLogger(__name__)

MARKOVIAN = "markovian"
QUASI_MARKOVIAN = "quasi_markovian"


# =============================================================================
# DESCRIPTIONS
# =============================================================================


@dataclass(frozen=True)
class BoundaryCoupling:
    """Langevin reservoir attached to one oscillator."""

    site: int
    gamma: float
    theta: float


@dataclass(frozen=True, eq=False)
class QuasiMarkovCoupling:
    """Reservoirs coupled through auxiliary variables r in R^J."""

    coupling: np.ndarray  # Lambda, |I| x |J|, injective
    bath_map: np.ndarray  # iota, J x J, invertible
    temperatures: Tuple[float, ...]


@dataclass(frozen=True, eq=False)
class NetworkSpec:
    """Oscillators, their potential omega_sq and the attached reservoirs."""

    omega_sq: np.ndarray
    boundary: Tuple[BoundaryCoupling, ...] = ()
    quasi_markov: Optional[QuasiMarkovCoupling] = None
    name: str = "network"

    @property
    def n_sites(self) -> int:
        return int(np.asarray(self.omega_sq).shape[0])

    @property
    def temperatures(self) -> Tuple[float, ...]:
        if self.quasi_markov is not None:
            return tuple(self.quasi_markov.temperatures)
        return tuple(b.theta for b in self.boundary)

    def interaction_graph_connected(self) -> bool:
        """Connectivity of the graph with edges where omega_sq is non-zero."""
        adjacency = csr_matrix(np.asarray(self.omega_sq) != 0)
        n_components, _ = connected_components(adjacency, directed=False)
        return n_components == 1

    def validate(self) -> List[str]:
        errors: List[str] = []
        omega_sq = np.asarray(self.omega_sq, dtype=float)
        if omega_sq.ndim != 2 or omega_sq.shape[0] != omega_sq.shape[1] or omega_sq.size == 0:
            return ["omega_sq must be a non-empty square matrix"]
        if not np.allclose(omega_sq, omega_sq.T, atol=1e-12):
            errors.append("omega_sq is not symmetric")
        elif np.min(linalg.eigvalsh(omega_sq)) <= 0:
            errors.append("omega_sq is not positive definite")
        if not self.interaction_graph_connected():
            errors.append("interaction graph is not connected")

        if self.quasi_markov is None:
            if not self.boundary:
                errors.append("no boundary reservoirs")
            sites = [b.site for b in self.boundary]
            if len(set(sites)) != len(sites):
                errors.append("boundary sites are not distinct")
            if any(s < 0 or s >= self.n_sites for s in sites):
                errors.append("boundary site index out of range")
            if any(b.gamma <= 0 for b in self.boundary):
                errors.append("reservoir coupling gamma must be positive")
            if any(b.theta <= 0 for b in self.boundary):
                errors.append("reservoir temperature must be positive")
        else:
            if any(t <= 0 for t in self.quasi_markov.temperatures):
                errors.append("reservoir temperature must be positive")
        return errors


# =============================================================================
# PHASE-SPACE OPERATORS
# =============================================================================


@dataclass(frozen=True, eq=False)
class SystemMatrices:
    """Phase-space operators of a harmonic network. Immutable after build."""

    A: np.ndarray
    Q: np.ndarray
    theta: np.ndarray
    vartheta: np.ndarray
    beta: np.ndarray
    kind: str = MARKOVIAN
    n_aux: int = 0
    name: str = "network"

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    @property
    def n_noise(self) -> int:
        return self.Q.shape[1]

    @cached_property
    def B(self) -> np.ndarray:
        return self.Q @ self.Q.T

    @cached_property
    def omega_skew(self) -> np.ndarray:
        return 0.5 * (self.A - self.A.T)

    @cached_property
    def vartheta_inv(self) -> np.ndarray:
        return np.diag(1.0 / np.diag(self.vartheta))

    @cached_property
    def sigma_beta(self) -> np.ndarray:
        """Sigma_beta = [Omega, beta], the form of the entropy flux sigma_beta(x) = x.Sigma x / 2."""
        return self.omega_skew @ self.beta - self.beta @ self.omega_skew

    @cached_property
    def noise_trace(self) -> float:
        """tr(Q vartheta^-1 Q*)."""
        return float(np.trace(self.Q @ self.vartheta_inv @ self.Q.T))

    @cached_property
    def weighted_noise(self) -> np.ndarray:
        """Q vartheta^-2 Q*."""
        return self.Q @ self.vartheta_inv @ self.vartheta_inv @ self.Q.T

    @property
    def theta_min(self) -> float:
        return float(np.min(np.diag(self.vartheta)))

    @property
    def theta_max(self) -> float:
        return float(np.max(np.diag(self.vartheta)))

    @property
    def at_equilibrium(self) -> bool:
        return self.theta_max - self.theta_min <= config.solver.zero_tol * self.theta_max

    @property
    def sign(self) -> int:
        """sigma in theta Q = sigma Q."""
        return -1 if self.kind == MARKOVIAN else 1

    def with_beta(self, beta: np.ndarray) -> "SystemMatrices":
        """Same system with an alternative admissible reference operator."""
        return replace(self, beta=np.asarray(beta, dtype=float))


def _symmetric_sqrt(omega_sq: np.ndarray) -> np.ndarray:
    w, V = linalg.eigh(omega_sq)
    if np.min(w) <= 0:
        raise ModelError("omega_sq is not positive definite")
    omega = (V * np.sqrt(w)) @ V.T
    return 0.5 * (omega + omega.T)


def _reference_operator(Q: np.ndarray, vartheta: np.ndarray) -> np.ndarray:
    gram = Q.T @ Q
    if np.linalg.cond(gram) > 1e12:
        raise NumericError("Q*Q is singular; no reference operator")
    gram_inv_qt = linalg.solve(gram, Q.T, assume_a="pos")
    projector = Q @ gram_inv_qt
    beta = Q @ np.diag(1.0 / np.diag(vartheta)) @ gram_inv_qt + (np.eye(Q.shape[0]) - projector)
    return 0.5 * (beta + beta.T)


def default_beta(sys: SystemMatrices) -> np.ndarray:
    """beta = Q vartheta^-1 (Q*Q)^-1 Q* + (I - Q (Q*Q)^-1 Q*)."""
    return _reference_operator(sys.Q, sys.vartheta)


def _require_valid(spec: NetworkSpec) -> None:
    errors = spec.validate()
    if errors:
        raise ModelError(f"{spec.name}: " + "; ".join(errors))


def build_markovian(spec: NetworkSpec) -> SystemMatrices:
    """Phase-space operators for reservoirs acting directly on boundary momenta."""
    if spec.quasi_markov is not None:
        raise ModelError("quasi-Markovian description passed to build_markovian")
    _require_valid(spec)

    n = spec.n_sites
    m = len(spec.boundary)
    omega = _symmetric_sqrt(np.asarray(spec.omega_sq, dtype=float))
    iota = np.zeros((n, m))
    for k, reservoir in enumerate(spec.boundary):
        iota[reservoir.site, k] = np.sqrt(2.0 * reservoir.gamma)
    vartheta = np.diag([float(b.theta) for b in spec.boundary])

    zero = np.zeros((n, n))
    A = np.block([[-0.5 * iota @ iota.T, -omega.T], [omega, zero]])
    Q = np.vstack([iota, np.zeros((n, m))]) @ np.sqrt(vartheta)
    theta = np.diag(np.concatenate([-np.ones(n), np.ones(n)]))

    logger.debug(f"built Markovian system {spec.name}: dim {2 * n}, {m} reservoirs")
    return SystemMatrices(
        A=A,
        Q=Q,
        theta=theta,
        vartheta=vartheta,
        beta=_reference_operator(Q, vartheta),
        kind=MARKOVIAN,
        name=spec.name,
    )


def build_quasi_markovian(spec: NetworkSpec) -> SystemMatrices:
    """Phase-space operators when reservoirs couple through auxiliary variables."""
    qm = spec.quasi_markov
    if qm is None:
        raise ModelError("build_quasi_markovian requires a quasi_markov block")
    coupling = np.atleast_2d(np.asarray(qm.coupling, dtype=float))
    n_aux = coupling.shape[1] if coupling.size else 0
    if n_aux == 0:
        raise ModelError("quasi-Markovian network without auxiliary variables")
    _require_valid(spec)

    n = spec.n_sites
    if coupling.shape[0] != n:
        raise ModelError(f"coupling has {coupling.shape[0]} rows, expected {n}")
    if np.linalg.matrix_rank(coupling) != n_aux:
        raise ModelError("coupling Lambda is not injective")
    bath_map = np.asarray(qm.bath_map, dtype=float)
    if bath_map.size == 0:
        bath_map = np.eye(n_aux)
    if bath_map.shape != (n_aux, n_aux) or np.linalg.matrix_rank(bath_map) != n_aux:
        raise ModelError("bath map iota must be an invertible J x J matrix")
    if len(qm.temperatures) != n_aux:
        raise ModelError("one temperature per auxiliary variable required")

    omega = _symmetric_sqrt(np.asarray(spec.omega_sq, dtype=float))
    vartheta = np.diag([float(t) for t in qm.temperatures])
    zn, zjn = np.zeros((n, n)), np.zeros((n_aux, n))

    A = np.block(
        [
            [-0.5 * bath_map @ bath_map.T, -coupling.T, zjn],
            [coupling, zn, -omega.T],
            [zjn.T, omega, zn],
        ]
    )
    Q = np.vstack([bath_map, np.zeros((2 * n, n_aux))]) @ np.sqrt(vartheta)
    theta = np.diag(np.concatenate([np.ones(n_aux), -np.ones(n), np.ones(n)]))

    return SystemMatrices(
        A=A,
        Q=Q,
        theta=theta,
        vartheta=vartheta,
        beta=_reference_operator(Q, vartheta),
        kind=QUASI_MARKOVIAN,
        n_aux=n_aux,
        name=spec.name,
    )


def build_system(spec: NetworkSpec) -> SystemMatrices:
    if spec.quasi_markov is not None:
        return build_quasi_markovian(spec)
    return build_markovian(spec)


# =============================================================================
# STRUCTURAL VALIDATION
# =============================================================================


@dataclass
class ConstraintResidual:
    name: str
    value: float
    passed: bool


@dataclass
class ValidationReport:
    """Residual of every structural identity of a system."""

    constraints: List[ConstraintResidual]
    sign: int
    threshold: float

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.constraints)

    def failures(self) -> List[str]:
        return [c.name for c in self.constraints if not c.passed]

    def to_dict(self) -> Dict[str, object]:
        return {
            "passed": self.passed,
            "sign": self.sign,
            "threshold": self.threshold,
            "constraints": [
                {"name": c.name, "value": c.value, "passed": c.passed}
                for c in self.constraints
            ],
        }

    def summary(self) -> str:
        lines = [f"Structure check (sign {self.sign:+d}, threshold {self.threshold:.1e})"]
        for c in self.constraints:
            mark = "ok" if c.passed else "FAIL"
            lines.append(f"  [{mark:>4}] {c.name}: {c.value:.3e}")
        return "\n".join(lines)


def validate_structure(sys: SystemMatrices, tol: Optional[float] = None) -> ValidationReport:
    """Report the residual of each structural constraint of (A, Q, theta, vartheta, beta)."""
    tol = config.solver.structure_tol if tol is None else tol
    if tol <= 0:
        raise ValueError("tol must be positive")
    A, Q, theta, vartheta, beta = sys.A, sys.Q, sys.theta, sys.vartheta, sys.beta
    n = sys.dim
    threshold = tol * (1.0 + float(np.linalg.norm(A, 2)))
    eye = np.eye(n)
    norm = np.linalg.norm

    def residual(name: str, value: float) -> ConstraintResidual:
        return ConstraintResidual(name, float(value), bool(value <= threshold))

    def margin(name: str, value: float) -> ConstraintResidual:
        return ConstraintResidual(name, float(value), bool(value > threshold))

    flipped = theta @ Q
    plus, minus = norm(flipped - Q), norm(flipped + Q)
    sign = 1 if plus <= minus else -1

    constraints = [
        margin(
            "Ker(A - A*) & Ker Q* = {0}",
            linalg.svdvals(np.vstack([A - A.T, Q.T]))[-1],
        ),
        residual("A + A* = -Q vartheta^-1 Q*", norm(A + A.T + Q @ sys.vartheta_inv @ Q.T)),
        margin("vartheta > 0", np.min(np.diag(vartheta))),
        residual("vartheta diagonal", norm(vartheta - np.diag(np.diag(vartheta)))),
        margin("Q*Q > 0", np.min(linalg.eigvalsh(Q.T @ Q))),
        residual("theta = theta*", norm(theta - theta.T)),
        residual("theta^2 = I", norm(theta @ theta - eye)),
        residual("theta Q = sigma Q", min(plus, minus)),
        residual("theta A theta = A*", norm(theta @ A @ theta - A.T)),
        residual("[vartheta, Q*Q] = 0", norm(vartheta @ Q.T @ Q - Q.T @ Q @ vartheta)),
        residual("beta Q = Q vartheta^-1", norm(beta @ Q - Q @ sys.vartheta_inv)),
        residual("theta beta theta = beta", norm(theta @ beta @ theta - beta)),
    ]
    return ValidationReport(constraints=constraints, sign=sign, threshold=threshold)


def controllability_rank(sys: SystemMatrices) -> Tuple[int, bool]:
    return controllability(sys.A, sys.Q)


def require_controllable(sys: SystemMatrices) -> int:
    """Kalman rank of (A, Q); raises AssumptionError when it is deficient."""
    rank, ok = controllability(sys.A, sys.Q)
    if not ok:
        raise AssumptionError(
            f"{sys.name}: pair (A, Q) is not controllable (rank {rank} < {sys.dim})"
        )
    return rank


def boundary_temperature_form(sys: SystemMatrices) -> np.ndarray:
    """pi_Q vartheta^-1 pi_Q on the reservoir-coupled auxiliary block."""
    if sys.kind != QUASI_MARKOVIAN:
        raise ModelError("boundary temperature form is defined for quasi-Markovian systems")
    form = np.zeros((sys.dim, sys.dim))
    form[: sys.n_aux, : sys.n_aux] = sys.vartheta_inv
    return form


# =============================================================================
# CONFIGURATION-SPACE CRITERIA
# =============================================================================


def _boundary_injection(spec: NetworkSpec) -> np.ndarray:
    iota = np.zeros((spec.n_sites, len(spec.boundary)))
    for k, reservoir in enumerate(spec.boundary):
        iota[reservoir.site, k] = 1.0
    return iota


def configuration_controllable(spec: NetworkSpec) -> bool:
    """Controllability of (omega_sq, iota), equivalent to that of (A, Q)."""
    omega_sq = np.asarray(spec.omega_sq, dtype=float)
    _, ok = controllability(omega_sq, _boundary_injection(spec))
    return ok


def ep_positivity_certificate(spec: NetworkSpec) -> List[Tuple[float, float]]:
    """Temperature pairs whose reservoir groups reach a common configuration direction.

    Reservoirs are grouped by temperature; C_t is the controllable subspace of
    (omega_sq, iota pi_t). A returned pair (t1, t2) has C_t1 and C_t2 meeting
    non-trivially, which forces a strictly positive entropy production.
    """
    omega_sq = np.asarray(spec.omega_sq, dtype=float)
    injection = _boundary_injection(spec)
    groups: Dict[float, List[int]] = {}
    for k, reservoir in enumerate(spec.boundary):
        groups.setdefault(float(reservoir.theta), []).append(k)
    subspaces = {
        theta: controllable_subspace(omega_sq, injection[:, columns])
        for theta, columns in groups.items()
    }
    pairs = []
    for t1, t2 in combinations(sorted(subspaces), 2):
        first, second = subspaces[t1], subspaces[t2]
        joint_rank = np.linalg.matrix_rank(np.hstack([first, second]), tol=1e-9)
        if first.shape[1] + second.shape[1] > joint_rank:
            pairs.append((t1, t2))
    return pairs


# =============================================================================
# REFERENCE NETWORKS
# =============================================================================


def single_oscillator(omega: float = 1.0, gamma: float = 1.0, theta: float = 2.0) -> NetworkSpec:
    return NetworkSpec(
        omega_sq=np.array([[omega**2]]),
        boundary=(BoundaryCoupling(0, gamma, theta),),
        name="single_oscillator",
    )


def jacobi_chain(
    b: Sequence[float],
    a: Sequence[float],
    gammas: Tuple[float, float],
    thetas: Tuple[float, float],
    name: str = "chain",
) -> NetworkSpec:
    """Chain with omega_sq = tridiag(a, b, a) and reservoirs on both end sites."""
    length = len(b)
    if len(a) != length - 1:
        raise ModelError(f"chain of length {length} needs {length - 1} couplings")
    omega_sq = np.diag(np.asarray(b, dtype=float))
    if length > 1:
        omega_sq += np.diag(np.asarray(a, dtype=float), 1) + np.diag(np.asarray(a, dtype=float), -1)
    if length == 1:
        boundary = (BoundaryCoupling(0, gammas[0], thetas[0]),)
    else:
        boundary = (
            BoundaryCoupling(0, gammas[0], thetas[0]),
            BoundaryCoupling(length - 1, gammas[1], thetas[1]),
        )
    return NetworkSpec(omega_sq=omega_sq, boundary=boundary, name=name)


def jacobi_chain_from_drive(
    length: int,
    b: float,
    a: float,
    gamma_bar: float,
    delta: float,
    theta_bar: float,
    delta_theta: float,
) -> NetworkSpec:
    """Homogeneous chain with friction asymmetry delta and temperature gap delta_theta."""
    gammas = (gamma_bar * np.exp(delta / 2), gamma_bar * np.exp(-delta / 2))
    thetas = (theta_bar - delta_theta / 2, theta_bar + delta_theta / 2)
    return jacobi_chain([b] * length, [a] * (length - 1), gammas, thetas, name=f"chain_{length}")


def triangular_network(
    u: float,
    v: float,
    theta_bar: float = 1.0,
    a: float = 1.0 / (2.0 * np.sqrt(2.0)),
    b: float = 0.25,
    gamma: float = 1.0,
) -> NetworkSpec:
    """Six-site ring; sites 1, 3, 5 (0-based) carry reservoirs and mutual couplings b."""
    if not abs(a) < 0.5 or not (2 * a**2 - 0.5 < b < 1 - 4 * a**2):
        raise ModelError(f"couplings (a={a}, b={b}) leave omega_sq indefinite")
    omega_sq = np.eye(6)
    for i in range(6):
        j = (i + 1) % 6
        omega_sq[i, j] = omega_sq[j, i] = a
    driven = (1, 3, 5)
    for i in driven:
        j = (i + 2) % 6
        omega_sq[i, j] = omega_sq[j, i] = b
    thetas = (
        theta_bar * (1 - u),
        theta_bar * (1 + 0.5 * (u + 3 * v)),
        theta_bar * (1 + 0.5 * (u - 3 * v)),
    )
    boundary = tuple(BoundaryCoupling(s, gamma, t) for s, t in zip(driven, thetas))
    return NetworkSpec(omega_sq=omega_sq, boundary=boundary, name="triangular")


def network_from_config(params) -> NetworkSpec:
    """NetworkSpec from the ``network`` section of a run configuration."""
    if params.preset == NetworkPreset.CHAIN:
        chain = params.chain
        return jacobi_chain(chain.b, chain.a, chain.gammas, chain.thetas, name=params.name)
    if params.preset == NetworkPreset.TRIANGULAR:
        tri = params.triangular
        spec = triangular_network(tri.u, tri.v, tri.theta_bar, tri.a, tri.b, tri.gamma)
        return replace(spec, name=params.name)

    ex = params.explicit
    quasi = None
    if ex.quasi_markov is not None:
        quasi = QuasiMarkovCoupling(
            coupling=np.asarray(ex.quasi_markov.coupling, dtype=float),
            bath_map=np.asarray(ex.quasi_markov.bath_map, dtype=float),
            temperatures=tuple(ex.quasi_markov.temperatures),
        )
    return NetworkSpec(
        omega_sq=np.asarray(ex.omega_sq, dtype=float),
        boundary=tuple(BoundaryCoupling(b.site, b.gamma, b.theta) for b in ex.boundary),
        quasi_markov=quasi,
        name=params.name,
    )


def system_from_config(params) -> SystemMatrices:
    """Build and, when requested, re-reference the system described by a config."""
    sys = build_system(network_from_config(params))
    if params.preset == NetworkPreset.EXPLICIT and params.explicit.beta is not None:
        sys = sys.with_beta(np.asarray(params.explicit.beta, dtype=float))
        report = validate_structure(sys)
        if not report.passed:
            raise AssumptionError(f"beta override violates {report.failures()}")
    return sys
