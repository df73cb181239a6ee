"""Validate provenance headers of tables and documents in output/.

Designed for CI to refuse results lacking provenance.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple

PROJECT_ROOT = Path(__file__).resolve().parent.parent
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from core.metadata import REQUIRED_FIELDS, read_csv_metadata  # noqa: E402


ARTIFACT_EXTENSIONS = {".csv", ".json"}
SKIPPED_NAMES = {"analytic_validation_report.json"}


def find_artifacts(output_dir: Path) -> Iterable[Path]:
    """Yield all result files under output_dir."""
    if not output_dir.exists():
        return []

    return (
        path
        for path in sorted(output_dir.rglob("*"))
        if path.is_file()
        and path.suffix.lower() in ARTIFACT_EXTENSIONS
        and path.name not in SKIPPED_NAMES
    )


def read_header(artifact_path: Path) -> Optional[Dict[str, object]]:
    if artifact_path.suffix.lower() == ".csv":
        return dict(read_csv_metadata(artifact_path))
    try:
        payload = json.loads(artifact_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError:
        return None
    metadata = payload.get("metadata") if isinstance(payload, dict) else None
    return metadata if isinstance(metadata, dict) else {}


def validate_metadata_file(artifact_path: Path) -> Tuple[bool, str]:
    """Check that a result file carries every provenance field."""
    header = read_header(artifact_path)
    if header is None:
        return False, f"{artifact_path.name}: not a JSON document"

    missing = [field for field in REQUIRED_FIELDS if field not in header]
    if missing:
        return False, f"{artifact_path.name}: header lacks {', '.join(missing)}"

    for key in ("tool_version", "config_hash", "revision", "command"):
        if not str(header.get(key, "")).strip():
            return False, f"{artifact_path.name}: header field {key} is blank"

    return True, ""


def validate_directory(output_dir: Path) -> Tuple[int, List[str]]:
    artifacts = list(find_artifacts(output_dir))
    failures = []
    for artifact in artifacts:
        ok, reason = validate_metadata_file(artifact)
        if not ok:
            failures.append(reason)
    return len(artifacts), failures


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(description="Check provenance headers of FluctNet results")
    parser.add_argument(
        "--output",
        type=Path,
        default=Path("output"),
        help="Directory holding steady/cgf/rate/sim/scan results",
    )
    args = parser.parse_args(argv)

    count, failures = validate_directory(args.output)
    if not count:
        print(f"No results found under {args.output}. Nothing to validate.")
        return 0

    if failures:
        print(f"\n{len(failures)} of {count} result file(s) lack provenance:")
        for failure in failures:
            print(f" - {failure}")
        return 1

    print(f"Validated metadata for {count} file(s) in {args.output}.")
    return 0


if __name__ == "__main__":
    sys.exit(main())
