"""
Forward-mode evaluation of expression trees.

One pass per batch: required derivative orders are propagated from the root
down (Diff nodes ask more of their argument), then every node is evaluated
once, children first, as a truncated Taylor series at the batch points.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Sequence, Tuple

import mpmath
import numpy as np

from ...domain.errors import CorrugatorError, EvaluationError, SingularityError
from ...infrastructure.system.workers import map_chunks
from ..numeric import PointSet, PrecisionContext, backend_for, to_mpf
from .nodes import Expr
from .series import Series

MAX_JET_ORDER = 3

_FLOAT_ERRSTATE = dict(divide="raise", invalid="raise", over="raise", under="ignore")


class Evaluator:
    """Series of every node of one tree at one point (mp) or one batch (float)."""

    def __init__(self, ctx: PrecisionContext, x: Any, y: Any) -> None:
        self.ctx = ctx
        self.bk = backend_for(ctx)
        self.x = x
        self.y = y
        self._memo: Dict[int, Series] = {}

    def point_at(self, idx: int) -> Tuple[float, float]:
        if isinstance(self.x, np.ndarray):
            xs = np.atleast_1d(self.x)
            ys = np.atleast_1d(self.y)
            return float(xs[idx]), float(ys[idx])
        return self.x, self.y

    def get(self, node: Expr) -> Series:
        return self._memo[id(node)]

    def run(self, root: Expr, order: int) -> Series:
        orders = _required_orders(root, order)
        for node in _post_order(root):
            key = id(node)
            if key not in self._memo:
                self._memo[key] = node.series(self, orders[key])
        return self._memo[id(root)]


def _required_orders(root: Expr, order: int) -> Dict[int, int]:
    orders: Dict[int, int] = {}
    stack: List[Tuple[Expr, int]] = [(root, order)]
    while stack:
        node, k = stack.pop()
        if orders.get(id(node), -1) >= k:
            continue
        orders[id(node)] = k
        stack.extend(node.children_orders(k))
    return orders


def _post_order(root: Expr) -> List[Expr]:
    out: List[Expr] = []
    seen = set()
    stack: List[Tuple[Expr, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            out.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for child, _ in node.children_orders(0):
            if id(child) not in seen:
                stack.append((child, False))
    return out


@dataclass(frozen=True)
class Jet:
    """
    Value and partial derivatives at one point.

    ``hessian`` is (f_xx, f_xy, f_yy) and ``third`` is (f_xxx, f_xxy, f_xyy,
    f_yyy); entries above the requested order are None.
    """

    value: Any
    gradient: Tuple[Any, Any]
    hessian: Tuple[Any, Any, Any]
    third: Tuple[Any, Any, Any, Any]
    order: int

    def partial(self, i: int, j: int) -> Any:
        k = i + j
        if k == 0:
            return self.value
        if k > self.order:
            raise ValueError("jet of order {0} has no ∂^{1}".format(self.order, k))
        return (self.gradient, self.hessian, self.third)[k - 1][j]


def _jet_from_series(s: Series, order: int, scalar: Any) -> Jet:
    def at(i: int, j: int) -> Any:
        if i + j > order:
            return None
        return scalar(s.partial(i, j))

    return Jet(
        value=at(0, 0),
        gradient=(at(1, 0), at(0, 1)),
        hessian=(at(2, 0), at(1, 1), at(0, 2)),
        third=(at(3, 0), at(2, 1), at(1, 2), at(0, 3)),
        order=order,
    )


def _wrap(exc: Exception, point: Any) -> CorrugatorError:
    if isinstance(exc, (SingularityError, EvaluationError)):
        return exc
    return EvaluationError("{0}: {1}".format(type(exc).__name__, exc), point)


def eval_jet(e: Expr, p: Sequence[Any], order: int, ctx: PrecisionContext) -> Jet:
    """Jet of ``e`` at ``p`` up to ``order`` (0..3)."""
    if not 0 <= order <= MAX_JET_ORDER:
        raise ValueError("jet order must be in 0..{0}, got {1}".format(MAX_JET_ORDER, order))
    px, py = p
    if ctx.is_double:
        x = np.array([float(px)])
        y = np.array([float(py)])
        try:
            with np.errstate(**_FLOAT_ERRSTATE):
                s = Evaluator(ctx, x, y).run(e, order)
        except Exception as exc:
            raise _wrap(exc, (float(px), float(py))) from exc
        return _jet_from_series(s, order, lambda c: float(np.asarray(c).reshape(-1)[0]))
    with ctx.workdps():
        x, y = to_mpf(px), to_mpf(py)
        try:
            s = Evaluator(ctx, x, y).run(e, order)
        except Exception as exc:
            raise _wrap(exc, (x, y)) from exc
        return _jet_from_series(s, order, lambda c: +mpmath.mpf(c))


def _broadcast(value: Any, n: int) -> np.ndarray:
    return np.broadcast_to(np.asarray(value, dtype=float), (n,)).copy()


def partials_on(
    e: Expr,
    points: PointSet,
    ctx: PrecisionContext,
    wanted: Iterable[Tuple[int, int]],
) -> Dict[Tuple[int, int], Any]:
    """
    Selected partial derivatives of ``e`` at every point of ``points``.

    Returns
    -------
    {(i, j): values}; values are float64 arrays on the double path and
    lists of mpf otherwise, in point order.

    Notes
    -----
    - Float batches are split into chunks evaluated on worker threads; a
      failing chunk is re-run point by point to name the offending point.
    - mpmath evaluation is sequential.
    """
    wanted = list(wanted)
    order = max((i + j for i, j in wanted), default=0)
    n = len(points)
    if ctx.is_double:
        xs = np.asarray(points.xs, dtype=float)
        ys = np.asarray(points.ys, dtype=float)

        def run_chunk(start: int, stop: int) -> Dict[Tuple[int, int], np.ndarray]:
            try:
                with np.errstate(**_FLOAT_ERRSTATE):
                    s = Evaluator(ctx, xs[start:stop], ys[start:stop]).run(e, order)
                return {k: _broadcast(s.partial(*k), stop - start) for k in wanted}
            except Exception as exc:
                for i in range(start, stop):
                    _single_float(e, xs[i], ys[i], order, ctx)
                raise _wrap(exc, (float(xs[start]), float(ys[start]))) from exc

        parts = map_chunks(run_chunk, n)
        if not parts:
            return {k: np.zeros(0) for k in wanted}
        return {k: np.concatenate([p[k] for p in parts]) for k in wanted}

    out: Dict[Tuple[int, int], List[Any]] = {k: [] for k in wanted}
    with ctx.workdps():
        for px, py in points:
            x, y = to_mpf(px), to_mpf(py)
            try:
                s = Evaluator(ctx, x, y).run(e, order)
            except Exception as exc:
                raise _wrap(exc, (x, y)) from exc
            for k in wanted:
                out[k].append(+mpmath.mpf(s.partial(*k)))
    return out


def _single_float(e: Expr, x: float, y: float, order: int, ctx: PrecisionContext) -> None:
    try:
        with np.errstate(**_FLOAT_ERRSTATE):
            Evaluator(ctx, np.array([x]), np.array([y])).run(e, order)
    except Exception as exc:
        raise _wrap(exc, (float(x), float(y))) from exc


def values_on(e: Expr, points: PointSet, ctx: PrecisionContext) -> Any:
    return partials_on(e, points, ctx, [(0, 0)])[(0, 0)]
