"""
Metadata utilities for FluctNet outputs.

Every table and JSON document written by the command line carries the tool
version, a digest of the result-determining configuration, the seed, the git
revision and the command. No wall-clock time is recorded, so a rerun with the
same configuration produces byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import subprocess
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

from config import RunConfig, __version__

REQUIRED_FIELDS = (
    "tool_version",
    "config_hash",
    "seed",
    "revision",
    "command",
)


def _serialize_config(run_config: RunConfig) -> str:
    """Serialize the configuration deterministically for hashing."""
    return json.dumps(run_config.digest_payload(), default=str, sort_keys=True)


def compute_config_hash(run_config: RunConfig) -> str:
    """Return a stable hash of everything in the configuration that shapes results."""
    payload = _serialize_config(run_config).encode("utf-8")
    return hashlib.sha256(payload).hexdigest()


def get_git_revision() -> str:
    """Return the current git revision or a placeholder when unavailable."""
    try:
        result = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"],
            check=True,
            capture_output=True,
            text=True,
            cwd=Path(__file__).resolve().parent,
        )
        revision = result.stdout.strip()
        return revision or "unknown"
    except Exception:
        return "unknown"


@dataclass
class ArtifactMetadata:
    """Provenance header shared by every output file of one run."""

    tool_version: str
    config_hash: str
    seed: Optional[int]
    revision: str
    command: str
    extra: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def for_run(
        cls, run_config: RunConfig, command: str, revision: Optional[str] = None
    ) -> "ArtifactMetadata":
        return cls(
            tool_version=__version__,
            config_hash=compute_config_hash(run_config),
            seed=run_config.simulation.seed,
            revision=revision or get_git_revision(),
            command=command,
        )

    def with_extra(self, **values: Any) -> "ArtifactMetadata":
        return ArtifactMetadata(
            tool_version=self.tool_version,
            config_hash=self.config_hash,
            seed=self.seed,
            revision=self.revision,
            command=self.command,
            extra={**self.extra, **values},
        )

    def to_dict(self) -> Dict[str, Any]:
        payload: Dict[str, Any] = {
            "tool_version": self.tool_version,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "revision": self.revision,
            "command": self.command,
        }
        payload.update(self.extra)
        return payload


def format_number(value: Any) -> str:
    """17 significant digits with inf/-inf/nan sentinels; other values via str()."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    try:
        number = float(value)
    except (TypeError, ValueError):
        return "" if value is None else str(value)
    if math.isnan(number):
        return "nan"
    if math.isinf(number):
        return "inf" if number > 0 else "-inf"
    return f"{number:.17g}"


def _json_safe(value: Any) -> Any:
    """Replace non-finite floats with their string sentinels; numpy scalars to Python."""
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if hasattr(value, "tolist"):
        return _json_safe(value.tolist())
    if isinstance(value, float) and not math.isfinite(value):
        return format_number(value)
    return value


def _atomic_write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def render_csv(
    columns: Sequence[str], rows: Iterable[Sequence[Any]], metadata: ArtifactMetadata
) -> str:
    buffer = io.StringIO()
    for key, value in metadata.to_dict().items():
        buffer.write(f"# {key}: {format_number(value) if value is not None else 'none'}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_number(v) for v in row])
    return buffer.getvalue()


def write_table(
    path: Path,
    columns: Sequence[str],
    rows: Iterable[Sequence[Any]],
    metadata: ArtifactMetadata,
    fmt: str = "csv",
) -> Path:
    """Write a table as CSV with '# key: value' header lines, or as a JSON document."""
    rows = [list(r) for r in rows]
    if fmt == "json":
        payload = {
            "metadata": metadata.to_dict(),
            "columns": list(columns),
            "rows": rows,
        }
        return write_json(path.with_suffix(".json"), payload)
    return _atomic_write(path.with_suffix(".csv"), render_csv(columns, rows, metadata))


def write_json(
    path: Path, payload: Dict[str, Any], metadata: Optional[ArtifactMetadata] = None
) -> Path:
    document = dict(payload)
    if metadata is not None:
        document = {"metadata": metadata.to_dict(), **document}
    text = json.dumps(_json_safe(document), indent=2, sort_keys=False) + "\n"
    return _atomic_write(path, text)


def read_csv_metadata(path: Path) -> Dict[str, str]:
    """Header key/value pairs of a CSV written by ``write_table``."""
    header: Dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            if not line.startswith("#"):
                break
            key, _, value = line[1:].strip().partition(":")
            header[key.strip()] = value.strip()
    return header


def read_csv_rows(path: Path) -> List[Dict[str, str]]:
    """Data rows of a CSV written by ``write_table``, keyed by column."""
    with open(path, "r", encoding="utf-8") as handle:
        lines = [line for line in handle if not line.startswith("#")]
    return list(csv.DictReader(lines))
