"""CI entrypoint for FluctNet.

Runs config validation, the analytic regressions and ensures result metadata
is present.
"""

from __future__ import annotations

import sys
from pathlib import Path

PROJECT_ROOT = Path(__file__).resolve().parent.parent
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from config import config, load_config  # noqa: E402
from scripts.validate_metadata import main as validate_metadata_main  # noqa: E402


def run_config_validation() -> int:
    errors = config.validate()
    fixtures = sorted((PROJECT_ROOT / "tests" / "fixtures").glob("*.json"))
    for path in fixtures:
        errors.extend(f"{path.name}: {err}" for err in load_config(path).validate())
    if errors:
        print("Configuration validation failed:")
        for err in errors:
            print(f" - {err}")
        return 1

    print(f"Configuration validation passed ({len(fixtures)} run configuration(s)).")
    return 0


def run_regressions() -> int:
    from core.simulation.regression import RegressionRunner

    baseline = PROJECT_ROOT / "tests" / "snapshots" / "analytic_baseline.json"
    report_dir = PROJECT_ROOT / "output" / "reports"
    passed, _, failures = RegressionRunner().compare_to_baseline(baseline, report_dir)
    if not passed:
        print("Analytic regressions failed:")
        for failure in failures:
            print(f" - {failure}")
        return 1

    print("Analytic regressions passed.")
    return 0


def main() -> int:
    exit_codes = [run_config_validation()]
    exit_codes.append(run_regressions())
    exit_codes.append(validate_metadata_main([]))

    return 1 if any(code != 0 for code in exit_codes) else 0


if __name__ == "__main__":
    sys.exit(main())
