from __future__ import annotations

import json
from pathlib import Path

from ...domain.errors import ArtifactIOError, ReportSchemaError
from ...domain.reports import RunReport


def report_text(report: RunReport) -> str:
    """Canonical JSON: sorted keys, two-space indent, trailing newline."""
    return json.dumps(report.to_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def save_report(report: RunReport, path: Path) -> Path:
    path = Path(path)
    text = report_text(report)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8", newline="\n")
    except OSError as exc:
        raise ArtifactIOError("cannot write report {0}: {1}".format(path, exc)) from exc
    return path


def load_report(path: Path) -> RunReport:
    """
    Read a report written by ``save_report``.

    Raises
    ------
    ArtifactIOError
        The file cannot be read.
    ReportSchemaError
        Not JSON, or not a report of the supported schema.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ArtifactIOError("cannot read report {0}: {1}".format(path, exc)) from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ReportSchemaError("report {0} is not valid JSON: {1}".format(path, exc)) from exc
    return RunReport.from_dict(data)
