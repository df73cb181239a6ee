"""
Analytic Regressions
====================

Small networks whose answers are known in closed form: symmetric chains whose secular
polynomial has a positive root have kappa_c = kappa_0, unequal frictions push
kappa_c above it, equal temperatures give M = theta I and a vanishing e, and
every network has e(0) = e(1) = 0 with e'(0) = -ep. Values are stored in a
baseline file and rechecked in CI.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from core.cgf import (
    cgf_derivative,
    cgf_spectral,
    critical_kappa,
    ep_from_noise,
    ep_from_sigma,
    kappa_zero,
    steady_state,
)
from core.network import SystemMatrices, build_markovian, jacobi_chain, jacobi_chain_from_drive

logger = logging.getLogger(__name__)

REPORT_NAME = "analytic_validation_report.json"


@dataclass
class ScenarioResult:
    name: str
    metrics: Dict[str, float]


@dataclass
class RegressionScenario:
    name: str
    description: str
    evaluate: Callable[[], ScenarioResult]


@dataclass(frozen=True)
class MetricCheck:
    label: str
    value: float
    reference: float
    deviation: float
    problem: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "metric": self.label,
            "value": self.value,
            "reference": self.reference,
            "deviation": self.deviation,
            "ok": self.problem is None,
        }


def _chain(
    length: int,
    thetas: Tuple[float, float],
    name: str,
    b: float = 2.0,
    a: float = 1.0,
    gamma: float = 1.0,
) -> SystemMatrices:
    return build_markovian(
        jacobi_chain([b] * length, [a] * (length - 1), (gamma, gamma), thetas, name=name)
    )


class RegressionRunner:
    """Run deterministic analytic regressions for CI validation."""

    def __init__(self, tolerance: float = 1e-6):
        self.tolerance = tolerance
        self.scenarios = [
            RegressionScenario(
                name="symmetric_two_chain",
                description="kappa_c equals the temperature bound for a symmetric 2-chain",
                evaluate=lambda: self._symmetric_chain("symmetric_two_chain", 2, 2.0, 1.0, 0.1),
            ),
            RegressionScenario(
                name="symmetric_four_chain",
                description="kappa_c equals the temperature bound for a symmetric 4-chain",
                evaluate=lambda: self._symmetric_chain("symmetric_four_chain", 4, 1.0, 0.5, 2.0),
            ),
            RegressionScenario(
                name="asymmetric_four_chain",
                description="Unequal frictions lift kappa_c strictly above the temperature bound",
                evaluate=self._asymmetric_chain,
            ),
            RegressionScenario(
                name="equilibrium_chain",
                description="Equal temperatures: no entropy production, e identically zero",
                evaluate=self._equilibrium_chain,
            ),
            RegressionScenario(
                name="cgf_endpoints",
                description="e(0) = e(1) = 0 and e'(0) = -ep on the 2-chain",
                evaluate=self._cgf_endpoints,
            ),
        ]

    def _symmetric_chain(
        self, name: str, length: int, b: float, a: float, gamma: float
    ) -> ScenarioResult:
        sys = _chain(length, (1.0, 3.0), name, b, a, gamma)
        _, _, kappa_c = critical_kappa(sys)
        return ScenarioResult(
            name=name,
            metrics={"kappa_c": kappa_c, "kappa_0": kappa_zero(sys)},
        )

    def _asymmetric_chain(self) -> ScenarioResult:
        sys = build_markovian(jacobi_chain_from_drive(4, 1.0, 0.5, 2.0, 1.0, 2.0, 2.0))
        _, _, kappa_c = critical_kappa(sys)
        return ScenarioResult(
            name="asymmetric_four_chain",
            metrics={
                "kappa_0": kappa_zero(sys),
                "above_bound": float(kappa_c > kappa_zero(sys) + 1e-3),
            },
        )

    def _equilibrium_chain(self) -> ScenarioResult:
        sys = _chain(2, (2.0, 2.0), "equilibrium_chain")
        state = steady_state(sys)
        _, eps_plus, _ = critical_kappa(sys)
        alphas = np.linspace(-1.5, 2.5, 9)
        return ScenarioResult(
            name="equilibrium_chain",
            metrics={
                "ep": state.ep,
                "covariance_error": float(np.linalg.norm(state.M - 2.0 * np.eye(sys.dim))),
                "eps_plus": eps_plus,
                "max_abs_e": max(abs(cgf_spectral(sys, a)) for a in alphas),
            },
        )

    def _cgf_endpoints(self) -> ScenarioResult:
        sys = _chain(2, (1.0, 3.0), "two_chain")
        state = steady_state(sys)
        _, _, kappa_c = critical_kappa(sys)
        slope = cgf_derivative(sys, 0.0, kappa_c).value
        return ScenarioResult(
            name="cgf_endpoints",
            metrics={
                "ep": state.ep,
                "e_at_0": cgf_spectral(sys, 0.0),
                "e_at_1": cgf_spectral(sys, 1.0),
                "slope_plus_ep": slope + state.ep,
                "ep_sigma_gap": ep_from_sigma(sys, state.M) - state.ep,
                "ep_noise_gap": ep_from_noise(sys, state.M) - state.ep,
            },
        )

    def run(self) -> Dict[str, Dict[str, float]]:
        """Evaluate every scenario; metrics keyed by scenario name."""
        current = {}
        for scenario in self.scenarios:
            result = scenario.evaluate()
            current[result.name] = {k: float(v) for k, v in result.metrics.items()}
        logger.info(f"evaluated {len(current)} analytic regression scenarios")
        return current

    def load_baseline(self, baseline_path: Path) -> Dict[str, Dict[str, float]]:
        return json.loads(Path(baseline_path).read_text(encoding="utf-8"))

    def check_metric(self, label: str, value: float, reference: Optional[float]) -> MetricCheck:
        # Absolute below unit scale, relative above.
        if reference is None:
            return MetricCheck(label, value, math.nan, math.inf, "no baseline value")
        if not math.isfinite(value):
            return MetricCheck(label, value, reference, math.inf, f"is not finite ({value})")
        scale = max(1.0, abs(reference))
        deviation = abs(value - reference) / scale
        problem = None
        if deviation > self.tolerance:
            problem = f"deviated by {deviation:.2e} (value {value:.10g} vs {reference:.10g})"
        return MetricCheck(label, value, reference, deviation, problem)

    def compare_to_baseline(
        self,
        baseline_path: Path,
        report_dir: Path,
    ) -> Tuple[bool, Dict[str, Dict[str, float]], List[str]]:
        """(passed, current metrics, failure messages); writes a JSON report."""
        baseline = self.load_baseline(baseline_path)
        current = self.run()

        checks: List[MetricCheck] = []
        for name, metrics in current.items():
            reference = baseline.get(name, {})
            for metric, value in metrics.items():
                checks.append(self.check_metric(f"{name}:{metric}", value, reference.get(metric)))
        failures = [f"{c.label} {c.problem}" for c in checks if c.problem]

        report_dir = Path(report_dir)
        report_dir.mkdir(parents=True, exist_ok=True)
        report = {
            "passed": not failures,
            "tolerance": self.tolerance,
            "checks": [c.to_dict() for c in checks],
            "failures": failures,
        }
        (report_dir / REPORT_NAME).write_text(
            json.dumps(report, indent=2, default=str) + "\n", encoding="utf-8"
        )
        if failures:
            logger.warning(f"{len(failures)} analytic regression metric(s) off baseline")
        return not failures, current, failures
