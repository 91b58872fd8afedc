from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Any, Iterable, List, Sequence

from ...domain.errors import ArtifactIOError


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def table_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    """CSV text with ``,`` separators and ``\\n`` line ends."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(header))
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def write_table(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    """Write a UTF-8 CSV table. Cells are written as given, never re-rounded."""
    path = Path(path)
    text = table_text(header, rows)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8", newline="")
    except OSError as exc:
        raise ArtifactIOError("cannot write table {0}: {1}".format(path, exc)) from exc
    return path


def read_table(path: Path) -> List[List[str]]:
    try:
        with Path(path).open("r", encoding="utf-8", newline="") as f:
            return [row for row in csv.reader(f)]
    except OSError as exc:
        raise ArtifactIOError("cannot read table {0}: {1}".format(path, exc)) from exc


def aligned(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    """Plain-text columns for stdout."""
    body = [[_cell(v) for v in row] for row in rows]
    widths = [len(h) for h in header]
    for row in body:
        for i, cell in enumerate(row):
            if i < len(widths):
                widths[i] = max(widths[i], len(cell))
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip()]
    for row in body:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
    return "\n".join(lines)
