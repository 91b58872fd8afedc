from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import IO, Any, List, Optional

import numpy as np

from ...core.field import DOUBLE, GridField, Rect, sample
from ...core.numeric import PrecisionContext, format_real, fraction_text, to_fraction
from ...domain.errors import ArtifactIOError, ConfigurationError

FORMATS = ("obj", "csv")
POINTS_PER_PERIOD = 10


@dataclass
class MeshArtifact:
    path: Path
    fmt: str
    vertices: int
    warning: str = ""


def samples_per_period(h: Any, finest_lambda: Any) -> Fraction:
    """Grid nodes per period 1/λ of the finest corrugation."""
    return 1 / (to_fraction(h) * to_fraction(finest_lambda))


def resolution_warning(h: Any, finest_lambda: Any, points: int = POINTS_PER_PERIOD) -> str:
    """Empty when ``h`` resolves the finest corrugation with ``points`` nodes per period."""
    if finest_lambda is None or to_fraction(finest_lambda) <= 0:
        return ""
    per = samples_per_period(h, finest_lambda)
    if per >= points:
        return ""
    return "h={0} gives {1:.3g} samples per period of lambda={2}, want at least {3}".format(
        h, float(per), finest_lambda, points
    )


def _header(g: GridField, ctx: PrecisionContext) -> List[str]:
    rows, cols = g.shape
    return [
        "corrugator heightfield",
        "origin x={0} y={1} z={2}".format(
            fraction_text(g.rect.x_min), fraction_text(g.rect.y_min), _origin_text(g.origin_value, ctx)
        ),
        "step h={0}".format(fraction_text(g.h)),
        "shape rows={0} cols={1}".format(rows, cols),
        "coordinates and values are offsets from the origin",
    ]


def _origin_text(value: Any, ctx: PrecisionContext) -> str:
    if isinstance(value, (int, Fraction)):
        return fraction_text(value)
    return format_real(value, ctx)


def _columns(g: GridField) -> np.ndarray:
    """(x, y, value) offsets in row-major node order; +0.0 folds negative zeros."""
    gx, gy = np.meshgrid(g.x_offsets, g.y_offsets)
    return np.column_stack([gx.ravel(), gy.ravel(), g.values.ravel()]) + 0.0


def _faces(rows: int, cols: int) -> np.ndarray:
    """Two triangles per grid quad, 1-based vertex indices."""
    idx = np.arange(rows * cols).reshape(rows, cols) + 1
    a = idx[:-1, :-1].ravel()
    b = idx[:-1, 1:].ravel()
    c = idx[1:, 1:].ravel()
    d = idx[1:, :-1].ravel()
    return np.column_stack([np.column_stack([a, b, c]), np.column_stack([a, c, d])]).reshape(-1, 3)


def _write_obj(out: IO[str], g: GridField, decimals: int, ctx: PrecisionContext) -> None:
    for line in _header(g, ctx):
        out.write("# " + line + "\n")
    fmt = "v %.{0}g %.{0}g %.{0}g".format(decimals)
    np.savetxt(out, _columns(g), fmt=fmt, newline="\n")
    rows, cols = g.shape
    np.savetxt(out, _faces(rows, cols), fmt="f %d %d %d", newline="\n")


def _write_csv(out: IO[str], g: GridField, decimals: int, ctx: PrecisionContext) -> None:
    for line in _header(g, ctx):
        out.write("# " + line + "\n")
    out.write("x,y,value\n")
    cols = _columns(g)
    rows_n, cols_n = g.shape
    # lexicographic in (x, y): x outer, y inner
    order = np.arange(rows_n * cols_n).reshape(rows_n, cols_n).T.ravel()
    np.savetxt(out, cols[order], fmt="%.{0}g".format(decimals), delimiter=",", newline="\n")


def write_grid(g: GridField, path: Path, fmt: str, decimals: int = 17, ctx: Optional[PrecisionContext] = None) -> MeshArtifact:
    """
    Write a sampled heightfield as Wavefront OBJ or CSV.

    The header declares the origin (x_min, y_min, value at the first node);
    every number in the body is an offset from it, formatted with ``decimals``
    significant digits. Identical grids give identical bytes.

    Raises
    ------
    ConfigurationError
        Unknown format.
    ArtifactIOError
        The file cannot be written.
    """
    if fmt not in FORMATS:
        raise ConfigurationError("mesh format must be one of {0}, got {1!r}".format(", ".join(FORMATS), fmt))
    ctx = ctx or DOUBLE
    path = Path(path)
    writer = _write_obj if fmt == "obj" else _write_csv
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="\n") as out:
            writer(out, g, decimals, ctx)
    except OSError as exc:
        raise ArtifactIOError("cannot write mesh {0}: {1}".format(path, exc)) from exc
    rows, cols = g.shape
    return MeshArtifact(path, fmt, rows * cols)


def export_mesh(
    f: Any,
    rect: Rect,
    h: Any,
    fmt: str,
    path: Path,
    ctx: Optional[PrecisionContext] = None,
    decimals: int = 17,
    finest_lambda: Any = None,
    points_per_period: int = POINTS_PER_PERIOD,
) -> MeshArtifact:
    """
    Sample ``f`` on the h-grid over ``rect`` and write it.

    A grid too coarse for ``points_per_period`` nodes per period of
    ``finest_lambda`` is still written; the artifact carries the warning.
    """
    g = sample(f, rect, h, ctx)
    artifact = write_grid(g, path, fmt, decimals, ctx)
    artifact.warning = resolution_warning(h, finest_lambda, points_per_period)
    return artifact


def read_header(path: Path) -> dict:
    """The ``key=value`` pairs of a mesh header, values as text."""
    out = {}
    try:
        with Path(path).open("r", encoding="utf-8") as f:
            for line in f:
                if not line.startswith("#"):
                    break
                for token in line[1:].split():
                    if "=" in token:
                        key, value = token.split("=", 1)
                        out[key] = value
    except OSError as exc:
        raise ArtifactIOError("cannot read mesh {0}: {1}".format(path, exc)) from exc
    return out
