"""
Monte Carlo Functionals and Determinant Oracles
===============================================

Sampled functionals are quadratic forms of exactly sampled paths, so:

  - reversing a path (x_k -> theta x_{K-k}) flips the sign of both functionals
  - the dense path determinant and the transfer recursion are the same number
  - the importance-weighted estimate of (1/t) log E[exp(-alpha S)] agrees with
    that number within its standard error
  - E[exp(-S_canonical)] = 1 (Jarzynski) within sampling error
  - the finite-time generating function approaches e(alpha) like 1/t, so
    successive differences over doubled horizons halve
  - at t = 100 the centered canonical functional divided by sqrt(t e''(0)) is
    standard normal
  - runs are reproducible from the seed, independent of the thread count
"""

import math
import sys
from pathlib import Path

import numpy as np
import pytest

REPO_ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(REPO_ROOT))

from core.cgf import cgf_spectral, steady_state  # noqa: E402
from core.errors import DomainError  # noqa: E402
from core.ldp import clt_variance  # noqa: E402
from core.simulation import (  # noqa: E402
    accumulate_functionals,
    clt_check,
    empirical_cgf,
    exact_step,
    jarzynski_check,
    path_oracle_cgf,
    simulate_functionals,
    stochastic_integral_tde,
    trajectory_stream,
    transfer_oracle_cgf,
)
from core.simulation.simulate import summarize, trapezoid_weights, transition_factors  # noqa: E402


class TestExactStep:
    def test_stationary_covariance_preserved(self, two_chain):
        M = steady_state(two_chain).M
        rng = trajectory_stream(11, 0)
        x = rng.multivariate_normal(np.zeros(4), M, size=20_000)
        for _ in range(5):
            x = exact_step(two_chain, x, 0.2, rng)
        sample = np.cov(x.T)
        assert np.allclose(sample, M, atol=0.08 * np.max(np.abs(M)))

    def test_transition_covariance(self, two_chain):
        factors = transition_factors(two_chain, 0.1)
        assert np.allclose(factors.factor @ factors.factor.T, factors.covariance, atol=1e-12)

    def test_invalid_step(self, two_chain):
        with pytest.raises(DomainError):
            transition_factors(two_chain, 0.0)


class TestAccumulate:
    def test_reversed_path_flips_sign(self, two_chain):
        rng = np.random.default_rng(3)
        path = rng.standard_normal((2, 8, 4))
        reversed_path = path[:, ::-1, :] @ two_chain.theta.T
        s_tde, s_can = accumulate_functionals(two_chain, path, 0.1)
        r_tde, r_can = accumulate_functionals(two_chain, reversed_path, 0.1)
        assert np.allclose(r_tde, -s_tde, atol=1e-12)
        assert np.allclose(r_can, -s_can, atol=1e-12)

    def test_single_point_path(self, equilibrium_chain):
        x = np.array([[0.3, -1.0, 0.5, 2.0]])
        s_tde, s_can = accumulate_functionals(equilibrium_chain, x, 0.1)
        assert s_tde == pytest.approx(0.0)
        assert s_can == pytest.approx(0.0, abs=1e-12)

    def test_trapezoid_weights(self):
        assert trapezoid_weights(3).tolist() == [0.5, 1.0, 1.0, 0.5]
        assert trapezoid_weights(0).tolist() == [0.0]


class TestOracles:
    @pytest.mark.parametrize("functional", ["canonical", "tde"])
    @pytest.mark.parametrize("alpha", [0.3, 0.8])
    def test_dense_matches_transfer(self, two_chain, functional, alpha):
        dense = path_oracle_cgf(two_chain, alpha, 1.0, 11, functional)
        transfer = transfer_oracle_cgf(two_chain, alpha, 1.0, 10, functional)
        assert dense == pytest.approx(transfer, rel=1e-9, abs=1e-12)

    def test_zero_alpha(self, two_chain):
        assert path_oracle_cgf(two_chain, 0.0, 5.0, 3) == 0.0
        assert transfer_oracle_cgf(two_chain, 0.0, 5.0, 3) == 0.0

    def test_dense_limit(self, two_chain):
        with pytest.raises(DomainError, match="transfer_oracle_cgf"):
            path_oracle_cgf(two_chain, 0.5, 10.0, 2000)

    def test_divergent_moment(self, two_chain):
        with pytest.raises(DomainError):
            transfer_oracle_cgf(two_chain, 40.0, 5.0, 50)

    def test_approaches_limit_like_inverse_time(self, two_chain):
        dt = 0.01
        limit = cgf_spectral(two_chain, 0.5)
        horizons = (20.0, 40.0, 80.0)
        values = {t: transfer_oracle_cgf(two_chain, 0.5, t, int(round(t / dt))) for t in horizons}
        errors = [abs(values[t] - limit) for t in horizons]
        assert errors[0] > errors[1] > errors[2]
        # e_t = e + c / t up to exponentially small terms
        first = values[20.0] - values[40.0]
        second = values[40.0] - values[80.0]
        assert first / second == pytest.approx(2.0, rel=0.25)


class TestMonteCarlo:
    T = 10.0
    DT = 0.05
    N = 4000
    SEED = 2024

    @pytest.fixture(scope="class")
    def batch(self, mild_chain):
        return simulate_functionals(mild_chain, self.T, self.DT, self.N, self.SEED, threads=2)

    def test_reproducible_across_threads(self, mild_chain):
        first = simulate_functionals(mild_chain, 1.0, 0.1, 300, 5, threads=1, chunk_size=64)
        second = simulate_functionals(mild_chain, 1.0, 0.1, 300, 5, threads=3, chunk_size=64)
        assert np.array_equal(first.S_canonical, second.S_canonical)
        assert np.array_equal(first.S_tde, second.S_tde)

    def test_seed_changes_samples(self, mild_chain):
        first = simulate_functionals(mild_chain, 1.0, 0.1, 50, 5)
        second = simulate_functionals(mild_chain, 1.0, 0.1, 50, 6)
        assert not np.array_equal(first.S_canonical, second.S_canonical)

    def test_horizon_must_be_multiple_of_step(self, mild_chain):
        with pytest.raises(DomainError, match="multiple"):
            simulate_functionals(mild_chain, 1.0, 0.3, 10, 1)

    @pytest.mark.parametrize("alpha", [0.25, 0.5])
    def test_empirical_matches_oracle(self, mild_chain, batch, alpha):
        (estimate,) = empirical_cgf(mild_chain, [alpha], self.T, self.N, self.SEED, batch=batch)
        oracle = transfer_oracle_cgf(mild_chain, alpha, self.T, int(round(self.T / self.DT)))
        assert not estimate.biased
        assert abs(estimate.value - oracle) <= 4 * estimate.stderr + 1e-4

    def test_alpha_zero_is_exact(self, mild_chain, batch):
        (estimate,) = empirical_cgf(mild_chain, [0.0], self.T, self.N, self.SEED, batch=batch)
        assert estimate.value == 0.0
        assert estimate.ess == self.N

    def test_outside_safe_band(self, mild_chain, batch):
        with pytest.raises(DomainError, match="safe band"):
            empirical_cgf(mild_chain, [2.0], self.T, self.N, self.SEED, batch=batch)

    def test_jarzynski(self, mild_chain, batch):
        summary = jarzynski_check(batch)
        assert summary.n_traj == self.N
        # the sampled functional is discrete; its exact exponential moment comes from the oracle
        steps = int(round(self.T / self.DT))
        target = math.exp(-self.T * transfer_oracle_cgf(mild_chain, 1.0, self.T, steps))
        assert abs(summary.mean - target) <= 3 * summary.stderr

    def test_mean_dissipation_rate(self, mild_chain, batch):
        ep = steady_state(mild_chain).ep
        stats = summarize(batch.S_tde / self.T)
        assert abs(stats["mean"] - ep) <= 3 * stats["stderr"]

    def test_rows(self, batch):
        rows = list(batch.rows())
        assert len(rows) == self.N
        assert rows[0][0] == 0
        assert rows[0][2] == pytest.approx(float(batch.S_canonical[0]))


class TestTwoChainStatistics:
    T = 1.0
    DT = 0.05
    N = 4000
    SEED = 11

    @pytest.fixture(scope="class")
    def batch(self, two_chain):
        return simulate_functionals(two_chain, self.T, self.DT, self.N, self.SEED, threads=2)

    def test_jarzynski(self, two_chain, batch):
        steps = int(round(self.T / self.DT))
        # E[exp(-2 S)] must be finite for the standard error to mean anything
        assert math.isfinite(transfer_oracle_cgf(two_chain, 2.0, self.T, steps))
        target = math.exp(-self.T * transfer_oracle_cgf(two_chain, 1.0, self.T, steps))
        summary = jarzynski_check(batch)
        assert abs(summary.mean - target) <= 3 * summary.stderr

    def test_mean_dissipation_rate(self, two_chain, batch):
        ep = steady_state(two_chain).ep
        assert ep == pytest.approx(2.0 / 9.0, rel=1e-9)
        stats = summarize(batch.S_tde / self.T)
        assert abs(stats["mean"] - ep) <= 3 * stats["stderr"]


class TestCentralLimit:
    @pytest.fixture(scope="class")
    def long_batch(self, two_chain):
        return simulate_functionals(two_chain, 100.0, 0.1, 400, 31, threads=2)

    def test_canonical_functional_is_normal(self, two_chain, long_batch):
        summary = clt_check(long_batch, clt_variance(two_chain))
        assert summary.level == 1.0
        assert summary.normal
        assert summary.variance_ratio == pytest.approx(1.0, abs=0.25)

    def test_rejects_degenerate_variance(self, long_batch):
        with pytest.raises(DomainError):
            clt_check(long_batch, 0.0)

    def test_rejects_untabulated_level(self, two_chain, long_batch):
        with pytest.raises(ValueError, match="tabulated"):
            clt_check(long_batch, clt_variance(two_chain), level=3.0)


def test_ito_form_tracks_path_form(mild_chain):
    ito, path_form = stochastic_integral_tde(mild_chain, 1.0, 0.001, 40, seed=9)
    assert np.corrcoef(ito, path_form)[0, 1] > 0.9
