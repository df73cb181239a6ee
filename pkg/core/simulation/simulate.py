"""Exact-transition Monte Carlo for linear Langevin networks.

The SDE dx = A x dt + Q dw is linear, so one step of length dt is sampled
exactly as x' = e^{dt A} x + L z with L L* = M_dt. Entropic functionals are
quadratic forms of the sampled path (trapezoid rule on the entropy flux plus
boundary terms), so no stochastic integral is discretized.

Random streams are counter-based: trajectory ``i`` of a run with seed ``s``
draws from Philox keyed by SeedSequence(s, spawn_key=(i,)). Trajectories are
grouped in chunks of fixed size, so results do not depend on the thread count.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg, stats
from scipy.special import logsumexp

from config import config
from core.cgf import steady_state
from core.errors import DomainError, NumericError
from core.matops import expm, finite_time_covariance
from core.network import SystemMatrices

logger = logging.getLogger(__name__)

CANONICAL = "canonical"
TDE = "tde"


@dataclass(frozen=True, eq=False)
class TransitionFactors:
    """e^{dt A} and a square root of M_dt for one step size."""

    dt: float
    propagator: np.ndarray
    covariance: np.ndarray
    factor: np.ndarray


@dataclass(frozen=True, eq=False)
class TrajectoryBatch:
    """Functional samples and end points of independent stationary trajectories."""

    seed: int
    n_traj: int
    t_final: float
    dt: float
    S_tde: np.ndarray
    S_canonical: np.ndarray
    x0: np.ndarray
    x_final: np.ndarray

    def samples(self, functional: str = CANONICAL) -> np.ndarray:
        if functional == CANONICAL:
            return self.S_canonical
        if functional == TDE:
            return self.S_tde
        raise ValueError(f"unknown functional {functional!r}")

    def rows(self) -> Iterable[Tuple[int, float, float]]:
        """(traj_id, S_tde, S_canonical) per trajectory."""
        for i in range(self.n_traj):
            yield i, float(self.S_tde[i]), float(self.S_canonical[i])


class CgfEstimate(NamedTuple):
    alpha: float
    value: float
    stderr: float
    ess: float
    biased: bool


class JarzynskiSummary(NamedTuple):
    mean: float
    stderr: float
    n_traj: int

    def within(self, k: float = 3.0) -> bool:
        return abs(self.mean - 1.0) <= k * self.stderr


class CltSummary(NamedTuple):
    """Anderson-Darling statistic of a standardized functional and its variance ratio."""

    statistic: float
    critical_value: float
    level: float
    variance_ratio: float
    n_traj: int

    @property
    def normal(self) -> bool:
        return self.statistic < self.critical_value


# =============================================================================
# SAMPLING
# =============================================================================


def trajectory_stream(seed: int, index: int) -> np.random.Generator:
    """Independent generator for trajectory ``index`` of a seeded run."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))


def _psd_factor(cov: np.ndarray, what: str) -> np.ndarray:
    w, V = linalg.eigh(0.5 * (cov + cov.T))
    if w[0] < config.solver.covariance_clip * max(1.0, abs(w[-1])):
        raise NumericError(f"{what} is indefinite (min eigenvalue {w[0]:.3e})")
    return V * np.sqrt(np.clip(w, 0.0, None))


@lru_cache(maxsize=32)
def transition_factors(sys: SystemMatrices, dt: float) -> TransitionFactors:
    if dt <= 0:
        raise DomainError(f"time step must be positive, got {dt}")
    covariance = finite_time_covariance(sys.A, sys.B, dt)
    return TransitionFactors(
        dt=dt,
        propagator=expm(dt * sys.A),
        covariance=covariance,
        factor=_psd_factor(covariance, f"M_dt (dt={dt})"),
    )


@lru_cache(maxsize=32)
def stationary_factor(sys: SystemMatrices) -> np.ndarray:
    return _psd_factor(steady_state(sys).M, "steady covariance")


def exact_step(
    sys: SystemMatrices, x: np.ndarray, dt: float, rng: np.random.Generator
) -> np.ndarray:
    """One exact transition of length dt; ``x`` may carry leading batch axes."""
    factors = transition_factors(sys, float(dt))
    x = np.asarray(x, dtype=float)
    z = rng.standard_normal(x.shape)
    return x @ factors.propagator.T + z @ factors.factor.T


def _step_count(t: float, dt: float) -> int:
    if t < 0 or dt <= 0:
        raise DomainError(f"invalid horizon t={t}, dt={dt}")
    steps = int(round(t / dt))
    if abs(steps * dt - t) > 1e-9 * max(1.0, t):
        raise DomainError(f"t={t} is not a multiple of dt={dt}")
    return steps


# =============================================================================
# FUNCTIONALS
# =============================================================================


def trapezoid_weights(steps: int) -> np.ndarray:
    weights = np.ones(steps + 1)
    weights[0] = weights[-1] = 0.5
    if steps == 0:
        weights[:] = 0.0
    return weights


def accumulate_functionals(
    sys: SystemMatrices,
    path: np.ndarray,
    dt: float,
    M: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """(S_tde, S_canonical) of paths sampled on a uniform grid.

    ``path`` has shape (..., K + 1, n). With sigma_beta(x) = x.Sigma_beta x / 2,

        S_tde = -dt sum_k w_k sigma_beta(x_k) - x_T.beta x_T / 2 + x_0.beta x_0 / 2,
        S_can = S_tde + (theta x_T).M^-1 (theta x_T) / 2 - x_0.M^-1 x_0 / 2,

    with trapezoid weights w_k.
    """
    path = np.asarray(path, dtype=float)
    steps = path.shape[-2] - 1
    if M is None:
        M = steady_state(sys).M
    M_inv = linalg.inv(M)

    flux = 0.5 * np.einsum("...ki,ij,...kj->...k", path, sys.sigma_beta, path)
    integral = dt * flux @ trapezoid_weights(steps)

    x0, xT = path[..., 0, :], path[..., -1, :]
    beta = sys.beta
    s_tde = -integral - 0.5 * np.einsum("...i,ij,...j->...", xT, beta, xT)
    s_tde = s_tde + 0.5 * np.einsum("...i,ij,...j->...", x0, beta, x0)

    reversed_end = xT @ sys.theta.T
    s_can = s_tde + 0.5 * np.einsum("...i,ij,...j->...", reversed_end, M_inv, reversed_end)
    s_can = s_can - 0.5 * np.einsum("...i,ij,...j->...", x0, M_inv, x0)
    return s_tde, s_can


def _simulate_chunk(
    sys: SystemMatrices,
    seed: int,
    indices: range,
    steps: int,
    dt: float,
    initial_state: Optional[np.ndarray],
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    n = sys.dim
    factors = transition_factors(sys, dt)
    noise = np.stack(
        [trajectory_stream(seed, i).standard_normal((steps + 1, n)) for i in indices]
    )
    if initial_state is None:
        x = noise[:, 0, :] @ stationary_factor(sys).T
    else:
        x = np.broadcast_to(np.asarray(initial_state, dtype=float), (len(indices), n)).copy()

    path = np.empty((len(indices), steps + 1, n))
    path[:, 0, :] = x
    propagator_t, factor_t = factors.propagator.T, factors.factor.T
    for k in range(1, steps + 1):
        x = x @ propagator_t + noise[:, k, :] @ factor_t
        path[:, k, :] = x
    s_tde, s_can = accumulate_functionals(sys, path, dt)
    return s_tde, s_can, path[:, 0, :].copy(), x


def simulate_functionals(
    sys: SystemMatrices,
    t: float,
    dt: float,
    n_traj: int,
    seed: int,
    threads: int = 1,
    chunk_size: Optional[int] = None,
    initial_state: Optional[np.ndarray] = None,
) -> TrajectoryBatch:
    """Sample n_traj trajectories of length t from N(0, M) (or a fixed start)."""
    if n_traj < 1:
        raise DomainError("n_traj must be positive")
    steps = _step_count(t, dt)
    chunk_size = chunk_size or config.simulation.chunk_size
    chunks = [range(lo, min(lo + chunk_size, n_traj)) for lo in range(0, n_traj, chunk_size)]
    logger.info(
        f"simulating {n_traj} trajectories of {steps} steps (dt={dt}) "
        f"in {len(chunks)} chunks on {threads} thread(s)"
    )

    def run(indices: range):
        return _simulate_chunk(sys, seed, indices, steps, dt, initial_state)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        parts = list(pool.map(run, chunks))

    return TrajectoryBatch(
        seed=seed,
        n_traj=n_traj,
        t_final=t,
        dt=dt,
        S_tde=np.concatenate([p[0] for p in parts]),
        S_canonical=np.concatenate([p[1] for p in parts]),
        x0=np.concatenate([p[2] for p in parts]),
        x_final=np.concatenate([p[3] for p in parts]),
    )


# =============================================================================
# ESTIMATORS
# =============================================================================


def _log_mean_exp(a: np.ndarray) -> Tuple[float, float, float]:
    """(log mean e^a, jackknife standard error, effective sample size)."""
    n = a.size
    total = float(logsumexp(a))
    value = total - math.log(n)
    # leave-one-out log sums without cancellation
    share = np.minimum(np.exp(a - total), 1.0 - 1e-15)
    loo = total + np.log1p(-share) - math.log(n - 1)
    variance = (n - 1) / n * float(np.sum((loo - loo.mean()) ** 2))
    w = np.exp(a - a.max())
    ess = float(w.sum() ** 2 / np.sum(w**2))
    return value, math.sqrt(variance), ess


def empirical_cgf(
    sys: SystemMatrices,
    alpha_list: Sequence[float],
    t: float,
    n_traj: int,
    seed: int,
    dt: Optional[float] = None,
    threads: int = 1,
    functional: str = CANONICAL,
    batch: Optional[TrajectoryBatch] = None,
    safe_band: Optional[Tuple[float, float]] = None,
) -> List[CgfEstimate]:
    """(1/t) log E_mu[exp(-alpha S^t)] per alpha with jackknife standard errors."""
    lo, hi = safe_band or config.simulation.safe_band
    outside = [a for a in alpha_list if a < lo or a > hi]
    if outside:
        raise DomainError(f"alphas {outside} outside the safe band [{lo}, {hi}]")
    if batch is None:
        batch = simulate_functionals(
            sys, t, dt or config.simulation.dt, n_traj, seed, threads=threads
        )
    samples = batch.samples(functional)
    t = batch.t_final

    estimates: List[CgfEstimate] = []
    for alpha in alpha_list:
        if alpha == 0.0:
            estimates.append(CgfEstimate(0.0, 0.0, 0.0, float(samples.size), False))
            continue
        value, stderr, ess = _log_mean_exp(-alpha * samples)
        biased = ess < config.simulation.min_ess
        if biased:
            logger.warning(
                f"alpha={alpha:.4g}: effective sample size {ess:.1f} below "
                f"{config.simulation.min_ess:.0f}; estimate is biased"
            )
        estimates.append(CgfEstimate(float(alpha), value / t, stderr / t, ess, biased))
    return estimates


def jarzynski_check(batch: TrajectoryBatch) -> JarzynskiSummary:
    """E_mu[exp(-S^t)] with its standard error; equals 1 for the canonical functional."""
    with np.errstate(over="ignore"):
        weights = np.exp(-batch.S_canonical)
    mean = float(weights.mean())
    stderr = float(weights.std(ddof=1) / math.sqrt(weights.size))
    return JarzynskiSummary(mean, stderr, batch.n_traj)


def clt_check(
    batch: TrajectoryBatch,
    variance: float,
    functional: str = CANONICAL,
    level: float = 1.0,
) -> CltSummary:
    """Normality of (S^t - mean) / sqrt(t variance) over trajectories.

    ``variance`` is the asymptotic rate e''(0); ``level`` is the significance in
    percent and must be one of the Anderson-Darling tabulated levels.
    """
    if variance <= 0.0:
        raise DomainError(f"CLT variance must be positive, got {variance:.3e}")
    samples = batch.samples(functional)
    scaled = (samples - samples.mean()) / math.sqrt(batch.t_final * variance)
    result = stats.anderson(scaled, dist="norm")
    levels = [float(value) for value in result.significance_level]
    if level not in levels:
        raise ValueError(f"level {level} not tabulated; choose one of {levels}")
    critical = float(result.critical_values[levels.index(level)])
    ratio = float(np.var(scaled, ddof=1))
    logger.info(
        f"CLT check: A2={float(result.statistic):.3f} (critical {critical:.3f} at {level}%), "
        f"variance ratio {ratio:.3f}"
    )
    return CltSummary(float(result.statistic), critical, level, ratio, batch.n_traj)


def stochastic_integral_tde(
    sys: SystemMatrices,
    t: float,
    dt: float,
    n_traj: int,
    seed: int,
) -> Tuple[np.ndarray, np.ndarray]:
    """Euler-Maruyama cross-check of the dissipated entropy.

    Returns (Ito form, path form) on the same Euler-Maruyama paths; the Ito form
    is -int (vartheta^-1 Q* x).dw + 1/2 int |vartheta^-1 Q* x|^2 ds - t tr(Q vartheta^-1 Q*)/2.
    The two agree up to the discretization error of the scheme.
    """
    steps = _step_count(t, dt)
    n, m = sys.dim, sys.n_noise
    drive = sys.vartheta_inv @ sys.Q.T
    step_matrix = (np.eye(n) + dt * sys.A).T
    root = stationary_factor(sys)

    ito = np.empty(n_traj)
    path_form = np.empty(n_traj)
    for i in range(n_traj):
        rng = trajectory_stream(seed, i)
        x = root @ rng.standard_normal(n)
        dw = math.sqrt(dt) * rng.standard_normal((steps, m))
        path = np.empty((steps + 1, n))
        path[0] = x
        for k in range(steps):
            path[k + 1] = path[k] @ step_matrix + sys.Q @ dw[k]
        forcing = path[:-1] @ drive.T
        ito[i] = (
            -float(np.sum(forcing * dw))
            + 0.5 * dt * float(np.sum(forcing**2))
            - 0.5 * t * sys.noise_trace
        )
        path_form[i] = float(accumulate_functionals(sys, path, dt)[0])
    return ito, path_form


def summarize(values: np.ndarray) -> Dict[str, float]:
    """Mean and standard error of a sample."""
    return {
        "mean": float(np.mean(values)),
        "stderr": float(np.std(values, ddof=1) / math.sqrt(values.size)),
    }
