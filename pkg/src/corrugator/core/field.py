"""
Fields over rectangles: analytic (Expr) or sampled (GridField), plus the
fourth-order difference stencils and the defect of a pair (v, w).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Iterator, List, Optional, Sequence, Tuple, Union

import mpmath
import numpy as np
from scipy.interpolate import RegularGridInterpolator

from ..domain.errors import ConfigurationError, DomainError, GridTooSmallError, ShapeError
from .expr import Expr, as_expr, partials_on, values_on
from .expr.nodes import Const, Diff
from .numeric import PointSet, PrecisionContext, make_context, to_fraction, to_mpf

DOUBLE = make_context(15, 0)


# ---------- rectangles ----------


@dataclass(frozen=True)
class Rect:
    """Closed axis-aligned rectangle with exact bounds."""

    x_min: Fraction
    x_max: Fraction
    y_min: Fraction
    y_max: Fraction

    def __post_init__(self) -> None:
        for name in ("x_min", "x_max", "y_min", "y_max"):
            object.__setattr__(self, name, to_fraction(getattr(self, name)))
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise DomainError(
                "degenerate rectangle [{0}, {1}] x [{2}, {3}]".format(
                    self.x_min, self.x_max, self.y_min, self.y_max
                )
            )

    @classmethod
    def parse(cls, text: str) -> "Rect":
        """``"x0,x1,y0,y1"`` as used by --subwindow."""
        parts = [p.strip() for p in str(text).split(",")]
        if len(parts) != 4:
            raise ConfigurationError("rectangle needs x0,x1,y0,y1, got {0!r}".format(text))
        try:
            return cls(*(Fraction(p) for p in parts))
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigurationError("bad rectangle {0!r}".format(text)) from exc

    @property
    def width(self) -> Fraction:
        return self.x_max - self.x_min

    @property
    def height(self) -> Fraction:
        return self.y_max - self.y_min

    @property
    def diameter(self) -> float:
        return float(np.hypot(float(self.width), float(self.height)))

    def contains_origin(self) -> bool:
        return self.x_min <= 0 <= self.x_max and self.y_min <= 0 <= self.y_max

    def contains(self, other: "Rect") -> bool:
        return (
            self.x_min <= other.x_min
            and other.x_max <= self.x_max
            and self.y_min <= other.y_min
            and other.y_max <= self.y_max
        )

    def expand(self, r: Any) -> "Rect":
        r = to_fraction(r)
        return Rect(self.x_min - r, self.x_max + r, self.y_min - r, self.y_max + r)

    def as_list(self) -> List[str]:
        return [str(self.x_min), str(self.x_max), str(self.y_min), str(self.y_max)]


# ---------- grids ----------


def grid_shape(rect: Rect, h: Any) -> Tuple[int, int]:
    """(rows, cols) = (round(height/h)+1, round(width/h)+1)."""
    h = to_fraction(h)
    if h <= 0:
        raise DomainError("grid step must be positive, got {0}".format(h))
    if h > rect.width or h > rect.height:
        raise DomainError("grid step {0} exceeds the rectangle side".format(h))
    return int(round(rect.height / h)) + 1, int(round(rect.width / h)) + 1


def _common(a: Any, b: Any) -> Tuple[Any, Any]:
    if isinstance(a, mpmath.mpf) or isinstance(b, mpmath.mpf):
        return to_mpf(a), to_mpf(b)
    if isinstance(a, float) or isinstance(b, float):
        return float(a), float(b)
    return a, b


def _exact_sum(a: Any, b: Any) -> Any:
    a, b = _common(a, b)
    return a + b


def _exact_product(a: Any, b: Any) -> Any:
    a, b = _common(a, b)
    return a * b


class GridField:
    """
    Scalar samples on a uniform grid, row-major with rows along y.

    Values are float64 offsets from ``origin_value``; coordinates are offsets
    from (rect.x_min, rect.y_min). Both keep tiny windows far from the origin
    representable.
    """

    def __init__(self, rect: Rect, h: Any, values: np.ndarray, origin_value: Any = 0) -> None:
        self.rect = rect
        self.h = to_fraction(h)
        self.values = np.asarray(values, dtype=float)
        self.origin_value = origin_value
        expected = grid_shape(rect, self.h)
        if self.values.shape != expected:
            raise ShapeError(
                "grid values of shape {0} do not match {1} for h={2}".format(
                    self.values.shape, expected, self.h
                )
            )

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape

    @property
    def x_offsets(self) -> np.ndarray:
        return np.arange(self.shape[1]) * float(self.h)

    @property
    def y_offsets(self) -> np.ndarray:
        return np.arange(self.shape[0]) * float(self.h)

    def same_grid(self, other: "GridField") -> bool:
        return self.rect == other.rect and self.h == other.h

    def _check(self, other: "GridField") -> None:
        if not self.same_grid(other):
            raise ShapeError(
                "incompatible grids: h={0} on {1} vs h={2} on {3}".format(
                    self.h, self.rect.as_list(), other.h, other.rect.as_list()
                )
            )

    def absolute(self) -> np.ndarray:
        """Values including the origin value, in float64."""
        return self.values + float(self.origin_value)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.absolute())))

    # ----- arithmetic -----

    def _like(self, values: np.ndarray, origin_value: Any = 0) -> "GridField":
        return GridField(self.rect, self.h, values, origin_value)

    def __add__(self, other: Any) -> "GridField":
        if isinstance(other, GridField):
            self._check(other)
            return self._like(self.values + other.values, _exact_sum(self.origin_value, other.origin_value))
        return self._like(self.values, _exact_sum(self.origin_value, other))

    __radd__ = __add__

    def __neg__(self) -> "GridField":
        return self._like(-self.values, -self.origin_value)

    def __sub__(self, other: Any) -> "GridField":
        return self + (-other)

    def __rsub__(self, other: Any) -> "GridField":
        return (-self) + other

    def __mul__(self, other: Any) -> "GridField":
        if isinstance(other, GridField):
            self._check(other)
            o1, o2 = float(self.origin_value), float(other.origin_value)
            values = o1 * other.values + o2 * self.values + self.values * other.values
            return self._like(values, _exact_product(self.origin_value, other.origin_value))
        return self._like(self.values * float(other), _exact_product(self.origin_value, other))

    __rmul__ = __mul__

    def apply(self, fn: Any) -> "GridField":
        """Elementwise numpy function of the absolute values."""
        return self._like(fn(self.absolute()))

    # ----- sampling protocol -----

    def components_at(self, points: PointSet, ctx: PrecisionContext):
        interp = RegularGridInterpolator(
            (self.y_offsets, self.x_offsets), self.values, method="linear", bounds_error=False, fill_value=None
        )
        if points.double:
            px = np.asarray(points.xs, dtype=float) - float(self.rect.x_min)
            py = np.asarray(points.ys, dtype=float) - float(self.rect.y_min)
            return [interp(np.column_stack([py, px])) + float(self.origin_value)], (1,)
        with ctx.workdps():
            x0, y0 = to_mpf(self.rect.x_min), to_mpf(self.rect.y_min)
            rel = np.array([[float(py - y0), float(px - x0)] for px, py in points])
            base = to_mpf(self.origin_value)
            return [[base + float(v) for v in interp(rel)]], (1,)


def grid_points(rect: Rect, h: Any, ctx: PrecisionContext) -> PointSet:
    """Every node of the grid over ``rect``, row-major, coordinates at context precision."""
    rows, cols = grid_shape(rect, h)
    h = to_fraction(h)
    if ctx.is_double:
        xs = np.array([float(rect.x_min + i * h) for i in range(cols)])
        ys = np.array([float(rect.y_min + j * h) for j in range(rows)])
        gx, gy = np.meshgrid(xs, ys)
        return PointSet(gx.ravel(), gy.ravel(), True)
    with ctx.workdps():
        xs = [to_mpf(rect.x_min + i * h) for i in range(cols)]
        ys = [to_mpf(rect.y_min + j * h) for j in range(rows)]
        return PointSet(
            tuple(x for _ in ys for x in xs), tuple(y for y in ys for _ in xs), False
        )


def sample(f: Any, rect: Rect, h: Any, ctx: Optional[PrecisionContext] = None) -> GridField:
    """Pointwise values of ``f`` on the uniform grid over ``rect``."""
    ctx = ctx or DOUBLE
    shape = grid_shape(rect, h)
    if isinstance(f, GridField):
        if f.rect == rect and f.h == to_fraction(h):
            return f
        raise ShapeError("cannot resample a grid field onto another grid")
    e = as_expr(f)
    if isinstance(e, Const):
        return GridField(rect, h, np.zeros(shape), e.value)
    points = grid_points(rect, h, ctx)
    values = values_on(e, points, ctx)
    if ctx.is_double:
        return GridField(rect, h, np.asarray(values).reshape(shape))
    with ctx.workdps():
        origin = values[0]
        rel = np.array([float(v - origin) for v in values]).reshape(shape)
    return GridField(rect, h, rel, origin)


# ---------- finite differences ----------

_LEFT_EDGE = np.array([-25.0, 48.0, -36.0, 16.0, -3.0])
_LEFT_NEAR = np.array([-3.0, -10.0, 18.0, -6.0, 1.0])


def _stencil_along_last(a: np.ndarray, h: float) -> np.ndarray:
    n = a.shape[-1]
    out = np.empty_like(a)
    out[..., 2:-2] = a[..., :-4] - 8.0 * a[..., 1:-3] + 8.0 * a[..., 3:-1] - a[..., 4:]
    out[..., 0] = a[..., 0:5] @ _LEFT_EDGE
    out[..., 1] = a[..., 0:5] @ _LEFT_NEAR
    out[..., n - 1] = -(a[..., n - 5 :][..., ::-1] @ _LEFT_EDGE)
    out[..., n - 2] = -(a[..., n - 5 :][..., ::-1] @ _LEFT_NEAR)
    return out / (12.0 * h)


def fd_partial(g: GridField, axis: str) -> GridField:
    """
    Fourth-order ∂/∂axis of a grid field.

    Interior nodes use the centered five-point stencil; the two boundary
    layers on each side use one-sided fourth-order stencils.
    """
    if axis not in ("x", "y"):
        raise ValueError("axis must be 'x' or 'y', got {0!r}".format(axis))
    along = 1 if axis == "x" else 0
    if g.shape[along] < 5:
        raise GridTooSmallError(
            "need at least 5 points along {0}, grid has {1}".format(axis, g.shape[along])
        )
    h = float(g.h)
    if axis == "x":
        out = _stencil_along_last(g.values, h)
    else:
        out = _stencil_along_last(g.values.T, h).T
    return GridField(g.rect, g.h, np.ascontiguousarray(out))


# ---------- matrix and vector fields ----------


class SymMat:
    """
    Symmetric 2x2 matrix [[b11, b12], [b12, b22]].

    Entries are scalars (Fraction, mpf, float), Exprs or GridFields; the
    off-diagonal entry is stored once.
    """

    __slots__ = ("b11", "b12", "b22")

    def __init__(self, b11: Any, b12: Any, b22: Any) -> None:
        self.b11 = b11
        self.b12 = b12
        self.b22 = b22

    def __iter__(self) -> Iterator[Any]:
        return iter((self.b11, self.b12, self.b22))

    def __repr__(self) -> str:
        return "SymMat({0!r}, {1!r}, {2!r})".format(self.b11, self.b12, self.b22)

    def __add__(self, other: "SymMat") -> "SymMat":
        return SymMat(self.b11 + other.b11, self.b12 + other.b12, self.b22 + other.b22)

    def __sub__(self, other: "SymMat") -> "SymMat":
        return SymMat(self.b11 - other.b11, self.b12 - other.b12, self.b22 - other.b22)

    def __neg__(self) -> "SymMat":
        return SymMat(-self.b11, -self.b12, -self.b22)

    def scale(self, c: Any) -> "SymMat":
        return SymMat(self.b11 * c, self.b12 * c, self.b22 * c)

    def map(self, fn: Any) -> "SymMat":
        return SymMat(fn(self.b11), fn(self.b12), fn(self.b22))

    def trace(self) -> Any:
        return self.b11 + self.b22

    def frobenius(self) -> Any:
        """|B| for scalar entries (off-diagonal counted twice)."""
        sq = self.b11 * self.b11 + 2 * self.b12 * self.b12 + self.b22 * self.b22
        if isinstance(sq, mpmath.mpf):
            return mpmath.sqrt(sq)
        if isinstance(sq, Fraction):
            return mpmath.sqrt(to_mpf(sq))
        return float(np.sqrt(sq))

    def min_eigenvalue(self) -> Any:
        half_tr = (self.b11 + self.b22) / 2
        rad = ((self.b11 - self.b22) / 2) ** 2 + self.b12 * self.b12
        if isinstance(rad, (mpmath.mpf, Fraction)):
            return to_mpf(half_tr) - mpmath.sqrt(to_mpf(rad))
        return half_tr - np.sqrt(rad)

    def components_at(self, points: PointSet, ctx: PrecisionContext):
        comps = [as_sampleable(b).components_at(points, ctx)[0][0] for b in self]
        return comps, (1, 2, 1)


class Vec2:
    """A pair of scalar fields (w¹, w²)."""

    __slots__ = ("first", "second")

    def __init__(self, first: Any, second: Any) -> None:
        self.first = first
        self.second = second

    def __iter__(self) -> Iterator[Any]:
        return iter((self.first, self.second))

    def __repr__(self) -> str:
        return "Vec2({0!r}, {1!r})".format(self.first, self.second)

    def __add__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.first + other.first, self.second + other.second)

    def __sub__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.first - other.first, self.second - other.second)

    def scale(self, c: Any) -> "Vec2":
        return Vec2(self.first * c, self.second * c)

    def components_at(self, points: PointSet, ctx: PrecisionContext):
        comps = [as_sampleable(c).components_at(points, ctx)[0][0] for c in self]
        return comps, (1, 1)


class _Gradient:
    """Sampleable ∇f of an Expr (Euclidean norm)."""

    def __init__(self, e: Expr) -> None:
        self.e = e

    def components_at(self, points: PointSet, ctx: PrecisionContext):
        d = partials_on(self.e, points, ctx, [(1, 0), (0, 1)])
        return [d[(1, 0)], d[(0, 1)]], (1, 1)


class _Derivatives:
    """Sampleable ∇^m f of an Expr as the full symmetric tensor (Frobenius norm)."""

    def __init__(self, e: Expr, m: int) -> None:
        self.e = e
        self.m = m

    def components_at(self, points: PointSet, ctx: PrecisionContext):
        from math import comb

        wanted = [(self.m - j, j) for j in range(self.m + 1)]
        d = partials_on(self.e, points, ctx, wanted)
        return [d[k] for k in wanted], tuple(comb(self.m, j) for j in range(self.m + 1))


def derivatives_of(e: Any, m: int) -> Any:
    """Sampleable ∇^m of a scalar Expr, or of each component of a Vec2 stacked."""
    if isinstance(e, Vec2):
        return _Stacked([derivatives_of(c, m) for c in e])
    if m == 0:
        return as_sampleable(e)
    if m == 1:
        return _Gradient(as_expr(e))
    return _Derivatives(as_expr(e), m)


class _Stacked:
    def __init__(self, parts: Sequence[Any]) -> None:
        self.parts = list(parts)

    def components_at(self, points: PointSet, ctx: PrecisionContext):
        comps: List[Any] = []
        weights: List[int] = []
        for p in self.parts:
            c, w = p.components_at(points, ctx)
            comps.extend(c)
            weights.extend(w)
        return comps, tuple(weights)


def as_sampleable(f: Any) -> Any:
    if hasattr(f, "components_at"):
        return f
    if isinstance(f, tuple) and len(f) == 2:
        return Vec2(*f)
    return as_expr(f)


# ---------- defect ----------


@dataclass
class Defect:
    """D = A − (½∇v⊗∇v + sym∇w), with its frame coefficients."""

    matrix: SymMat

    @property
    def coefficients(self) -> Any:
        from .basis import decompose

        return decompose(self.matrix)

    def components_at(self, points: PointSet, ctx: PrecisionContext):
        return self.matrix.components_at(points, ctx)


Field = Union[Expr, GridField]


def _grid_of(items: Sequence[Any]) -> Optional[GridField]:
    grids = [g for g in items if isinstance(g, GridField)]
    if not grids:
        return None
    first = grids[0]
    for g in grids[1:]:
        if not first.same_grid(g):
            raise ShapeError(
                "incompatible grids: h={0} on {1} vs h={2} on {3}".format(
                    first.h, first.rect.as_list(), g.h, g.rect.as_list()
                )
            )
    return first


def assemble_defect(
    A: SymMat, v: Any, w: Vec2, ctx: Optional[PrecisionContext] = None
) -> Defect:
    """
    D(x) = A(x) − ½∇v(x)⊗∇v(x) − sym∇w(x).

    With only analytic inputs the result is analytic (derivatives are Diff
    nodes). If any input is a GridField, every input must live on that grid
    or be analytic; analytic ones are sampled onto it and derivatives come
    from fd_partial.
    """
    items = [A.b11, A.b12, A.b22, v, w.first, w.second]
    grid = _grid_of(items)
    if grid is None:
        ve = as_expr(v)
        w1, w2 = as_expr(w.first), as_expr(w.second)
        vx, vy = Diff(ve, 1, 0), Diff(ve, 0, 1)
        half = Fraction(1, 2)
        d11 = as_expr(A.b11) - half * vx * vx - Diff(w1, 1, 0)
        d12 = as_expr(A.b12) - half * vx * vy - half * (Diff(w1, 0, 1) + Diff(w2, 1, 0))
        d22 = as_expr(A.b22) - half * vy * vy - Diff(w2, 0, 1)
        return Defect(SymMat(d11, d12, d22))

    def on_grid(f: Any) -> GridField:
        return sample(f, grid.rect, grid.h, ctx)

    a11, a12, a22 = (on_grid(b) for b in A)
    vg, w1g, w2g = on_grid(v), on_grid(w.first), on_grid(w.second)
    vx, vy = fd_partial(vg, "x"), fd_partial(vg, "y")
    d11 = a11 - 0.5 * (vx * vx) - fd_partial(w1g, "x")
    d12 = a12 - 0.5 * (vx * vy) - 0.5 * (fd_partial(w1g, "y") + fd_partial(w2g, "x"))
    d22 = a22 - 0.5 * (vy * vy) - fd_partial(w2g, "y")
    return Defect(SymMat(d11, d12, d22))
