"""
One corrugation step.

    v_λ = v + V(x, λx·η)/λ
    w_λ = w − V(x, λx·η)/λ ∇v + W(x, λx·η)/λ η

with V = (a/π) sin(2πt) and W = −(a²/4π) sin(4πt), so that
½(∂tV)² + ∂tW = a² and the defect drops by a²η⊗η up to O(1/λ).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Dict, List, Optional, Tuple

import mpmath
import numpy as np

from ..domain.errors import ConfigurationError
from ..domain.reports import BoundCheck
from .basis import FRAME, frame_vector, frame_vector_float, frame_vector_mp
from .expr import PI, X, Y, Diff, Expr, as_expr, eval_jet, is_zero, partials_on, sin
from .field import GridField, Vec2, fd_partial, grid_points, sample
from .numeric import (
    PointSet,
    PrecisionContext,
    as_array,
    const_of,
    pi_of,
    to_fraction,
    vsqrt,
)
from .verify import pointwise_check


@dataclass(frozen=True)
class StepParams:
    """Amplitude a (expression or constant), frame index k and frequency λ."""

    a: Any
    k: int
    lam: Fraction

    def __post_init__(self) -> None:
        if self.k not in (1, 2, 3):
            raise ConfigurationError("frame index must be 1, 2 or 3, got {0}".format(self.k))
        lam = to_fraction(self.lam)
        if lam <= 0:
            raise ConfigurationError("frequency must be positive, got {0}".format(lam))
        object.__setattr__(self, "lam", lam)


# ---------- profiles ----------


@dataclass(frozen=True)
class Profiles:
    V: Any
    dV_dt: Any
    grad_V: Tuple[Any, Any]
    W: Any
    dW_dt: Any
    grad_W: Tuple[Any, Any]


def profiles(a_val: Any, grad_a: Tuple[Any, Any], t: Any) -> Profiles:
    """V, W and their t- and x-derivatives at one (a, ∇a, t)."""
    if any(isinstance(v, mpmath.mpf) for v in (a_val, grad_a[0], grad_a[1], t)):
        pi, s2, c2, s4, c4 = (
            +mpmath.pi,
            mpmath.sin(2 * mpmath.pi * t),
            mpmath.cos(2 * mpmath.pi * t),
            mpmath.sin(4 * mpmath.pi * t),
            mpmath.cos(4 * mpmath.pi * t),
        )
    else:
        pi = math.pi
        s2, c2 = np.sin(2 * pi * t), np.cos(2 * pi * t)
        s4, c4 = np.sin(4 * pi * t), np.cos(4 * pi * t)
    ax, ay = grad_a
    return Profiles(
        V=a_val / pi * s2,
        dV_dt=2 * a_val * c2,
        grad_V=(ax / pi * s2, ay / pi * s2),
        W=-(a_val * a_val) / (4 * pi) * s4,
        dW_dt=-(a_val * a_val) * c4,
        grad_W=(-(a_val * ax) / (2 * pi) * s4, -(a_val * ay) / (2 * pi) * s4),
    )


# ---------- the step ----------


def phase(p: StepParams) -> Expr:
    """t = λ x·η_k."""
    eta1, eta2 = frame_vector(p.k)
    lam = as_expr(p.lam)
    if FRAME[p.k - 1][1] == 0:
        return lam * X
    return lam * (eta1 * X + eta2 * Y)


def one_step(v: Any, w: Vec2, p: StepParams, ctx: Optional[PrecisionContext] = None) -> Tuple[Any, Vec2]:
    """
    (v_λ, w_λ) for amplitude p.a along η_k at frequency λ.

    Analytic inputs give analytic outputs whose derivatives come from AD.
    A GridField v (with grid w) is updated by sampling the closed-form
    increment on the grid and differentiating v with fd_partial.
    """
    if is_zero(p.a):
        return v, w
    if isinstance(v, GridField):
        return _one_step_grid(v, w, p, ctx)
    a = as_expr(p.a)
    v = as_expr(v)
    t = phase(p)
    lam = as_expr(p.lam)
    eta1, eta2 = frame_vector(p.k)
    V_over = a / PI * sin(2 * PI * t) / lam
    W_over = -(a * a) / (4 * PI) * sin(4 * PI * t) / lam
    vx, vy = Diff(v, 1, 0), Diff(v, 0, 1)
    v_new = v + V_over
    w1 = as_expr(w.first) - V_over * vx + W_over * eta1
    w2 = as_expr(w.second) - V_over * vy + W_over * eta2
    return v_new, Vec2(w1, w2)


def _one_step_grid(v: GridField, w: Vec2, p: StepParams, ctx: Optional[PrecisionContext]) -> Tuple[GridField, Vec2]:
    rect, h = v.rect, v.h
    a = sample(p.a, rect, h, ctx).absolute()
    pts = grid_points(rect, h, ctx or _double())
    xs = np.asarray(pts.xs, dtype=float).reshape(v.shape)
    ys = np.asarray(pts.ys, dtype=float).reshape(v.shape)
    e1, e2 = frame_vector_float(p.k)
    lam = float(p.lam)
    t = lam * (e1 * xs + e2 * ys)
    V_over = a / math.pi * np.sin(2 * math.pi * t) / lam
    W_over = -(a * a) / (4 * math.pi) * np.sin(4 * math.pi * t) / lam
    vx, vy = fd_partial(v, "x"), fd_partial(v, "y")
    w1 = sample(w.first, rect, h, ctx)
    w2 = sample(w.second, rect, h, ctx)
    dv = GridField(rect, h, V_over)
    v_new = v + dv
    w1_new = w1 - dv * vx + GridField(rect, h, W_over * e1)
    w2_new = w2 - dv * vy + GridField(rect, h, W_over * e2)
    return v_new, Vec2(w1_new, w2_new)


def _double() -> PrecisionContext:
    from .field import DOUBLE

    return DOUBLE


# ---------- pointwise bounds ----------
#
# Arguments are arrays (float64 or object mpf) of a, |∇a|, |∇²a|, |∇v|,
# |∇²v| at sample points; lam and pi are constants of the same arithmetic.


def err_est_eta(a, grad_a, hess_v, lam, pi):
    """(1/λ)(a|∇a|/2π + a|∇²v|/π) + |∇a|²/(2λ²π²)."""
    return (a * grad_a / (2 * pi) + a * hess_v / pi) / lam + grad_a * grad_a / (2 * lam * lam * pi * pi)


def v_shift_bound(a, lam, pi):
    """|v_λ − v| <= a/(λπ)."""
    return a / (lam * pi)


def w_shift_bound(a, grad_v, lam, pi):
    """|w_λ − w| <= (a/(λπ))(|∇v| + a/4)."""
    return a / (lam * pi) * (grad_v + a / 4)


def grad_v_bound(a, grad_a, lam, pi):
    """|∇v_λ − ∇v| <= |∇a|/(λπ) + 2a."""
    return grad_a / (lam * pi) + 2 * a


def grad_w_bound(a, grad_a, grad_v, hess_v, lam, pi):
    """|∇w_λ − ∇w| <= 2a|∇v| + a² + (1/λ)(|∇v||∇a|/π + a|∇²v|/π + a|∇a|/2π)."""
    return 2 * a * grad_v + a * a + (grad_v * grad_a / pi + a * hess_v / pi + a * grad_a / (2 * pi)) / lam


def hess_v_bound(a, grad_a, hess_a, lam, pi):
    """|∇²v_λ − ∇²v| <= |∇²a|/(λπ) + 4|∇a| + 4λπa."""
    return hess_a / (lam * pi) + 4 * grad_a + 4 * lam * pi * a


def pointwise_norm(parts, weights=None):
    """Weighted Euclidean magnitude of component arrays."""
    weights = weights or [1] * len(parts)
    acc = None
    for p, wt in zip(parts, weights):
        term = wt * p * p
        acc = term if acc is None else acc + term
    return vsqrt(acc)


def step_error_bound(v: Any, p: StepParams, pt: Tuple[Any, Any], ctx: PrecisionContext) -> Any:
    """Right-hand side of the defect-error estimate of one step at ``pt``."""
    if is_zero(p.a):
        return const_of(0, ctx)
    ja = eval_jet(as_expr(p.a), pt, 1, ctx)
    jv = eval_jet(as_expr(v), pt, 2, ctx)
    with ctx.workdps():
        a = as_array([ja.value], ctx)
        ga = pointwise_norm([as_array([g], ctx) for g in ja.gradient])
        hv = pointwise_norm([as_array([h], ctx) for h in jv.hessian], [1, 2, 1])
        out = err_est_eta(a, ga, hv, const_of(p.lam, ctx), pi_of(ctx))
        return out[0]


class StepJets:
    """Jets of a, v and the increments of one step at a point set."""

    def __init__(self, v: Any, w: Vec2, v_new: Any, w_new: Vec2, p: StepParams, points: PointSet, ctx: PrecisionContext) -> None:
        order2 = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
        order1 = [(0, 0), (1, 0), (0, 1)]
        v = as_expr(v)
        a = as_expr(p.a)
        self.ctx = ctx
        self.points = points
        with ctx.workdps():
            self.a = {k: as_array(x, ctx) for k, x in partials_on(a, points, ctx, order2).items()}
            self.v = {k: as_array(x, ctx) for k, x in partials_on(v, points, ctx, order2).items()}
            self.dv = {
                k: as_array(x, ctx)
                for k, x in partials_on(as_expr(v_new) - v, points, ctx, order2).items()
            }
            self.dw1 = {
                k: as_array(x, ctx)
                for k, x in partials_on(as_expr(w_new.first) - as_expr(w.first), points, ctx, order1).items()
            }
            self.dw2 = {
                k: as_array(x, ctx)
                for k, x in partials_on(as_expr(w_new.second) - as_expr(w.second), points, ctx, order1).items()
            }


def measure_step(
    v: Any,
    w: Vec2,
    v_new: Any,
    w_new: Vec2,
    p: StepParams,
    points: PointSet,
    ctx: PrecisionContext,
) -> Tuple[List[BoundCheck], Dict[str, np.ndarray]]:
    """
    Every pointwise estimate of one step at ``points``, measured with AD.

    Returns
    -------
    (checks, rhs): checks for the defect error, |v_λ − v|, |w_λ − w|,
    |∇(v_λ − v)|, |∇(w_λ − w)| and |∇²(v_λ − v)| against their right-hand
    sides, and the right-hand-side arrays keyed by check name so that a
    stage can sum them over its steps.
    """
    names = ("defect_error", "v_shift", "w_shift", "grad_v", "grad_w", "hess_v")
    if is_zero(p.a):
        zeros = as_array([0] * len(points), ctx)
        return [pointwise_check(n, zeros, zeros, ctx, points) for n in names], {n: zeros for n in names}
    j = StepJets(v, w, v_new, w_new, p, points, ctx)
    with ctx.workdps():
        pi = pi_of(ctx)
        lam = const_of(p.lam, ctx)
        a = j.a[(0, 0)]
        abs_a = np.abs(a)
        ga = pointwise_norm([j.a[(1, 0)], j.a[(0, 1)]])
        ha = pointwise_norm([j.a[(2, 0)], j.a[(1, 1)], j.a[(0, 2)]], [1, 2, 1])
        g1, g2 = j.v[(1, 0)], j.v[(0, 1)]
        gv = pointwise_norm([g1, g2])
        hv = pointwise_norm([j.v[(2, 0)], j.v[(1, 1)], j.v[(0, 2)]], [1, 2, 1])
        d1, d2 = j.dv[(1, 0)], j.dv[(0, 1)]

        if ctx.is_double:
            e1, e2 = frame_vector_float(p.k)
        else:
            e1, e2 = frame_vector_mp(p.k)
        half = const_of(Fraction(1, 2), ctx)
        a2 = a * a
        c11 = g1 * d1 + half * d1 * d1 + j.dw1[(1, 0)] - a2 * e1 * e1
        c12 = half * (g1 * d2 + g2 * d1 + d1 * d2) + half * (j.dw1[(0, 1)] + j.dw2[(1, 0)]) - a2 * e1 * e2
        c22 = g2 * d2 + half * d2 * d2 + j.dw2[(0, 1)] - a2 * e2 * e2
        defect_err = pointwise_norm([c11, c12, c22], [1, 2, 1])
        defect_scale = a2 + gv * pointwise_norm([d1, d2]) + pointwise_norm([d1, d2]) ** 2

        measured = {
            "defect_error": defect_err,
            "v_shift": np.abs(j.dv[(0, 0)]),
            "w_shift": pointwise_norm([j.dw1[(0, 0)], j.dw2[(0, 0)]]),
            "grad_v": pointwise_norm([d1, d2]),
            "grad_w": pointwise_norm([j.dw1[(1, 0)], j.dw1[(0, 1)], j.dw2[(1, 0)], j.dw2[(0, 1)]]),
            "hess_v": pointwise_norm([j.dv[(2, 0)], j.dv[(1, 1)], j.dv[(0, 2)]], [1, 2, 1]),
        }
        rhs = {
            "defect_error": err_est_eta(abs_a, ga, hv, lam, pi),
            "v_shift": v_shift_bound(abs_a, lam, pi),
            "w_shift": w_shift_bound(abs_a, gv, lam, pi),
            "grad_v": grad_v_bound(abs_a, ga, lam, pi),
            "grad_w": grad_w_bound(abs_a, ga, gv, hv, lam, pi),
            "hess_v": hess_v_bound(abs_a, ga, ha, lam, pi),
        }
        checks = [
            pointwise_check(
                n, measured[n], rhs[n], ctx, points, defect_scale if n == "defect_error" else None
            )
            for n in names
        ]
        return checks, rhs
