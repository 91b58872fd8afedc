"""Recording inequalities into reports and re-checking them from the stored numbers."""

from __future__ import annotations

from typing import Any, Iterable, List, Optional, Tuple

import numpy as np

from ..domain.reports import BoundCheck, RunReport, ScalarCheck, StageReport
from .numeric import (
    PointSet,
    PrecisionContext,
    argmax_of,
    format_real,
    make_context,
    parse_real,
    tolerance,
)


def _holds(measured: Any, bound: Any, scale: Any, tol: Any) -> bool:
    return bool(measured <= bound + tol * (abs(bound) + abs(scale)))


def pointwise_check(
    name: str,
    measured: np.ndarray,
    bound: np.ndarray,
    ctx: PrecisionContext,
    points: Optional[PointSet] = None,
    scale: Optional[np.ndarray] = None,
    note: str = "",
    keep: Optional[int] = None,
) -> BoundCheck:
    """
    Record ``measured <= bound`` at every sample.

    Notes
    -----
    - A sample passes when measured <= bound + tol·(|bound| + |scale|); the
      scale is the magnitude of the terms that cancelled in ``measured``.
    - The worst point is the one with the largest measured − bound excess.
    - With ``keep`` only the ``keep`` tightest samples are stored; the flag
      still covers all of them.
    """
    n = len(measured)
    tol = tolerance(ctx)
    if scale is None:
        scale = measured
    with ctx.workdps():
        ok = all(_holds(m, b, s, tol) for m, b, s in zip(measured, bound, scale))
        worst_ratio = "0"
        worst_point: List[str] = []
        if n:
            excess = measured - bound
            i = argmax_of(excess)
            if bound[i] != 0:
                worst_ratio = format_real(measured[i] / bound[i], ctx)
            elif measured[i] != 0:
                worst_ratio = "inf"
            if points is not None:
                px, py = points.point(i)
                worst_point = [format_real(px, ctx), format_real(py, ctx)]
            if keep is not None and n > keep:
                idx = _tightest(excess, keep)
                measured, bound, scale = measured[idx], bound[idx], scale[idx]
                note = (note + " " if note else "") + "tightest {0} of {1} samples".format(keep, n)
        return BoundCheck(
            name=name,
            passed=ok,
            count=len(measured),
            measured=[format_real(m, ctx) for m in measured],
            bound=[format_real(b, ctx) for b in bound],
            scale=[format_real(s, ctx) for s in scale],
            tolerance=format_real(tol, ctx),
            worst_ratio=worst_ratio,
            worst_point=worst_point,
            note=note,
        )


def _tightest(excess: np.ndarray, keep: int) -> np.ndarray:
    if excess.dtype == object:
        order = sorted(range(len(excess)), key=lambda i: excess[i])
        return np.array(sorted(order[-keep:]), dtype=int)
    return np.sort(np.argsort(excess, kind="stable")[-keep:])


def scalar_check(name: str, lhs: Any, rhs: Any, ctx: PrecisionContext, slack: Any = 0) -> ScalarCheck:
    """Record ``lhs <= rhs`` (with relative ``slack`` of rhs)."""
    with ctx.workdps():
        ok = bool(lhs <= rhs + slack * abs(rhs))
        return ScalarCheck(
            name=name,
            lhs=format_real(lhs, ctx),
            rhs=format_real(rhs, ctx),
            passed=ok,
            tolerance=format_real(slack, ctx),
        )


def recheck_bound(check: BoundCheck, ctx: PrecisionContext) -> bool:
    if not (len(check.measured) == len(check.bound) == len(check.scale) == check.count):
        return False
    with ctx.workdps():
        tol = parse_real(check.tolerance, ctx)
        return all(
            _holds(parse_real(m, ctx), parse_real(b, ctx), parse_real(s, ctx), tol)
            for m, b, s in zip(check.measured, check.bound, check.scale)
        )


def recheck_scalar(check: ScalarCheck, ctx: PrecisionContext) -> bool:
    with ctx.workdps():
        lhs = parse_real(check.lhs, ctx)
        rhs = parse_real(check.rhs, ctx)
        slack = parse_real(check.tolerance, ctx)
        return bool(lhs <= rhs + slack * abs(rhs))


def recheck_stage(stage: StageReport, ctx: PrecisionContext) -> List[Tuple[str, bool, bool]]:
    """(name, recorded flag, recomputed flag) for every check of one stage."""
    rows = []
    for c in stage.checks:
        rows.append(("stage{0}.{1}".format(stage.index, c.name), c.passed, recheck_scalar(c, ctx)))
    for b in stage.bounds:
        rows.append(("stage{0}.{1}".format(stage.index, b.name), b.passed, recheck_bound(b, ctx)))
    for step in stage.steps:
        for b in step.checks:
            rows.append(
                ("stage{0}.step{1}.{2}".format(stage.index, step.k, b.name), b.passed, recheck_bound(b, ctx))
            )
    return rows


def recheck_report(report: RunReport) -> List[Tuple[str, bool, bool]]:
    """
    Recompute every flag of a report.

    A row fails when the recomputed flag is False or disagrees with the
    recorded one.
    """
    ctx = make_context(report.metadata.digits, report.metadata.seed)
    rows: List[Tuple[str, bool, bool]] = []
    for stage in report.stages:
        rows.extend(recheck_stage(stage, ctx))
    return rows


def all_passed(rows: Iterable[Tuple[str, bool, bool]]) -> bool:
    return all(recorded and recomputed for _, recorded, recomputed in rows)
