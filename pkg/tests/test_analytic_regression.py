import json
from pathlib import Path
import sys

# Ensure repository root on path for direct test execution
REPO_ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(REPO_ROOT))

from core.simulation.regression import RegressionRunner  # noqa: E402


def test_analytic_regressions_match_baseline(tmp_path):
    baseline = Path(__file__).parent / "snapshots" / "analytic_baseline.json"
    runner = RegressionRunner(tolerance=1e-6)
    passed, current, failures = runner.compare_to_baseline(
        baseline_path=baseline, report_dir=tmp_path
    )

    assert passed, f"Analytic regression failures: {failures}"
    # Spot check metrics are captured
    assert "symmetric_four_chain" in current
    assert "slope_plus_ep" in current["cgf_endpoints"]
    assert (tmp_path / "analytic_validation_report.json").exists()


def test_deviation_is_reported(tmp_path):
    baseline_path = Path(__file__).parent / "snapshots" / "analytic_baseline.json"
    runner = RegressionRunner()
    baseline = runner.load_baseline(baseline_path)
    baseline["symmetric_two_chain"]["kappa_c"] = 1.5
    shifted = tmp_path / "shifted.json"
    shifted.write_text(json.dumps(baseline), encoding="utf-8")

    passed, _, failures = runner.compare_to_baseline(baseline_path=shifted, report_dir=tmp_path)
    assert not passed
    assert any(f.startswith("symmetric_two_chain:kappa_c") for f in failures)
