"""
The C^{1,α} stage and its scheduler.

One stage at scale l = ‖D‖^{1/2}/M and ratio σ:

    1. mollify v, w and A at l
    2. shift w̃ = 𝔴 − (‖D‖ + ‖𝔇‖)·((√2+9)/4·x, (√2+9/5)·y), a_k = √φ_k
    3. three corrugations with l_k = l/σ^{k−1}, λ_k = 1/l_{k+1} = σ^k/l,
       δ_{k+1} = 124·δ_k

Every constant of the stage estimates is re-measured on the sample set
afterwards. The scheduler chains stages over shrinking rectangles with
M_k = M₀𝔠^k Πσ_j³ and tracks the defect decay ‖D_k‖ <= ‖D₀‖/Πσ_j^s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple

import mpmath
import numpy as np

from ..domain.errors import ConfigurationError, CorrugatorError, PreconditionError, StageVerificationError
from ..domain.events import (
    BoundChecked,
    StageFinished,
    StageStarted,
    StepCompleted,
    StepFields,
    SweepRowFinished,
    emit,
)
from ..domain.reports import BoundCheck, ScalarCheck, StageReport, StepRecord
from .basis import frame_vector_float, frame_vector_mp, w_shift_field
from .corrugation import StepParams, one_step, pointwise_norm
from .expr import as_expr, is_zero, partials_on, sqrt
from .field import Rect, SymMat, Vec2, as_sampleable, assemble_defect, derivatives_of
from .mollify import DEFAULT_QUADRATURE_N, DEFAULT_TOL, METHODS, mollify
from .numeric import (
    PointSet,
    PrecisionContext,
    as_array,
    const_of,
    format_real,
    fraction_text,
    holder_seminorm_estimate,
    magnitudes,
    make_context,
    max_of,
    min_of,
    sample_points,
    to_fraction,
    to_mpf,
)
from .stage_c1 import VERIFY_STREAM, round_sig
from .verify import pointwise_check, scalar_check

# Largest admissible ‖D‖ entering a stage.
DELTA0_CAP = Fraction(54, 10 ** 17)

# Schedules need δ₀ strictly below the cap.
DEFAULT_DELTA0 = Fraction(5, 10 ** 16)

DELTA_GROWTH = 124

OUTER_STREAM = 30

_ORDER3 = [(n - i, i) for n in range(4) for i in range(n + 1)]
_ORDER2 = [key for key in _ORDER3 if sum(key) <= 2]

# one-step estimates
_V_SHIFT = Fraction(2, 5)
_GRAD_SHIFT = Fraction(12, 5)
_HESS_V = Fraction(169, 10)
_THIRD_V = Fraction(123)
_HESS_W = Fraction(219, 10)

# stage estimates
_DEFECT_SIGMA = Fraction(19, 10) * 10 ** 15
_NORM0 = Fraction(18, 10) * 10 ** 7
_NORM0_DIAM = Fraction(126, 10)
_NORM1 = Fraction(11, 10) * 10 ** 8
_NORM2_V = Fraction(73, 10) * 10 ** 8
_NORM2_W = Fraction(95, 10) * 10 ** 8

# scheduler
_C_FACTOR = Fraction(209, 10) * 10 ** 8
_SIGMA_S = Fraction(16, 9)
_SIGMA_1S = Fraction(37, 10) * 10 ** 15
_GRADIENT_CEILING = Fraction(22, 10)


@dataclass(frozen=True)
class MollifySettings:
    method: str = "auto"
    quadrature_n: int = DEFAULT_QUADRATURE_N
    tol: Fraction = DEFAULT_TOL

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ConfigurationError(
                "mollify.method must be one of {0}, got {1!r}".format(", ".join(METHODS), self.method)
            )
        if self.quadrature_n < 8:
            raise ConfigurationError("mollify.quadrature_n must be >= 8, got {0}".format(self.quadrature_n))
        object.__setattr__(self, "tol", to_fraction(self.tol))
        if not 0 < self.tol < 1:
            raise ConfigurationError("mollify.tol must lie in (0, 1), got {0}".format(self.tol))


@dataclass(frozen=True)
class HolderStageConfig:
    """
    Parameters of one C^{1,α} stage.

    Exactly one of ``M`` and ``lam1`` may be set; with neither, M is the
    smallest power of 2 above max{‖D‖^{1/2}/r, ‖∇²v‖, ‖∇²w‖, 1}. With
    ``lam1`` the scale is l = σ/λ₁ so that λ₁ stays fixed across a σ sweep.
    """

    sigma: Fraction
    M: Optional[Fraction] = None
    lam1: Optional[Fraction] = None
    r: Fraction = Fraction(1, 1000)
    delta0: Fraction = DELTA0_CAP
    beta: Fraction = Fraction(1, 2)
    mollify: MollifySettings = field(default_factory=MollifySettings)
    samples: int = 1000
    holder_pairs: int = 1000
    keep: Optional[int] = 1000

    def __post_init__(self) -> None:
        for name in ("sigma", "r", "delta0", "beta"):
            object.__setattr__(self, name, to_fraction(getattr(self, name)))
        for name in ("M", "lam1"):
            value = getattr(self, name)
            if value is not None:
                value = to_fraction(value)
                if value <= 0:
                    raise ConfigurationError("{0} must be positive, got {1}".format(name, value))
                object.__setattr__(self, name, value)
        if self.M is not None and self.lam1 is not None:
            raise ConfigurationError("set either M or lam1, not both")
        if self.sigma <= 1:
            raise ConfigurationError("sigma must be > 1, got {0}".format(fraction_text(self.sigma)))
        if not 0 < self.r < 1:
            raise ConfigurationError("inset width r must lie in (0, 1), got {0}".format(self.r))
        if not 0 < self.delta0 <= DELTA0_CAP:
            raise ConfigurationError(
                "delta0 must lie in (0, {0}], got {1}".format(float(DELTA0_CAP), float(self.delta0))
            )
        if not 0 < self.beta < 1:
            raise ConfigurationError("beta must lie in (0, 1), got {0}".format(self.beta))
        if self.samples < 1 or self.holder_pairs < 1:
            raise ConfigurationError("samples and holder_pairs must be >= 1")


@dataclass(frozen=True)
class StageScales:
    """l, M and the per-step scales; λ_k·l_k = σ exactly."""

    l: Fraction
    M: Any
    sigma: Fraction
    ls: Tuple[Fraction, ...]
    lams: Tuple[Fraction, ...]


# ---------- sampling helpers ----------


def _magnitudes(f: Any, points: PointSet, ctx: PrecisionContext) -> np.ndarray:
    comps, weights = as_sampleable(f).components_at(points, ctx)
    with ctx.workdps():
        return as_array(magnitudes(comps, weights, points.double), ctx)


def _sup(f: Any, points: PointSet, ctx: PrecisionContext) -> Any:
    with ctx.workdps():
        return max_of(_magnitudes(f, points, ctx))


def _jets(e: Any, points: PointSet, ctx: PrecisionContext, wanted: Sequence[Tuple[int, int]]) -> Dict[Tuple[int, int], np.ndarray]:
    with ctx.workdps():
        return {k: as_array(x, ctx) for k, x in partials_on(as_expr(e), points, ctx, wanted).items()}


def _tensor(j: Dict[Tuple[int, int], np.ndarray], m: int) -> np.ndarray:
    """|∇^m f| from its partials (binomial weights)."""
    return pointwise_norm([j[(m - i, i)] for i in range(m + 1)], [math.comb(m, i) for i in range(m + 1)])


def _const_array(value: Any, n: int, ctx: PrecisionContext) -> np.ndarray:
    return as_array([value] * n, ctx)


def _sqrt(x: Any, ctx: PrecisionContext) -> Any:
    return math.sqrt(x) if ctx.is_double else mpmath.sqrt(x)


def _sub(a: Vec2, b: Vec2) -> Vec2:
    return Vec2(as_expr(a.first) - as_expr(b.first), as_expr(a.second) - as_expr(b.second))


def holder_norm(f: Any, domain: Rect, beta: Any, ctx: PrecisionContext, samples: int, pairs: int) -> Any:
    """‖f‖_{C^{0,β}} = sup|f| + [f]_β, both from seeded samples."""
    with ctx.workdps():
        sup = _sup(f, sample_points(domain, samples, ctx, stream=OUTER_STREAM), ctx)
        semi = holder_seminorm_estimate(f, domain, const_of(beta, ctx), pairs, ctx)
        return sup + semi


def check_frequency_precision(lam: Fraction, domain: Rect, ctx: PrecisionContext) -> None:
    """Refuse frequencies whose phase λx·η cannot be resolved at the context precision."""
    extent = max(abs(domain.x_min), abs(domain.x_max), abs(domain.y_min), abs(domain.y_max))
    phase = 3 * lam * max(extent, Fraction(1))
    decades = math.log10(phase.numerator) - math.log10(phase.denominator)
    if decades > ctx.digits - 10:
        raise PreconditionError(
            "phases up to 1e{0:.0f} need precision.digits >= {1}, got {2}".format(
                decades, int(math.ceil(decades)) + 10, ctx.digits
            )
        )


def stage_scales(cfg: HolderStageConfig, d_norm: Any, hess_v: Any, hess_w: Any, ctx: PrecisionContext) -> StageScales:
    """
    Scale l and frequencies of one stage.

    λ₁ is either given or σM/‖D‖^{1/2} rounded up to 6 digits; then
    l = σ/λ₁, l_k = l/σ^{k−1} and λ_k = σ^{k−1}λ₁.

    Raises
    ------
    PreconditionError
        The effective M = ‖D‖^{1/2}/l is not above max{‖D‖^{1/2}/r, ‖∇²v‖, ‖∇²w‖, 1},
        or l >= 1.
    """
    sigma = cfg.sigma
    with ctx.workdps():
        sqrt_d = _sqrt(d_norm, ctx)
        ceiling = max(sqrt_d / const_of(cfg.r, ctx), hess_v, hess_w, const_of(1, ctx))
        if cfg.lam1 is not None:
            lam1 = cfg.lam1
        else:
            if cfg.M is not None:
                M = cfg.M
            else:
                M = Fraction(2) ** (int(math.floor(math.log2(float(ceiling)))) + 1)
            lam1 = round_sig(to_fraction(const_of(sigma * M, ctx) / sqrt_d), 6, up=True)
        l = sigma / lam1
        M_eff = sqrt_d / const_of(l, ctx)
        if not l < 1:
            raise PreconditionError("stage scale l={0} must be below 1".format(float(l)))
        if not M_eff > ceiling:
            raise PreconditionError(
                "M={0} must exceed max(|D|^1/2/r, |hess v|, |hess w|, 1) = {1}".format(
                    format_real(M_eff, ctx), format_real(ceiling, ctx)
                )
            )
    ls = tuple(l / sigma ** (k - 1) for k in range(1, 5))
    lams = tuple(1 / ls[k] for k in range(1, 4))
    return StageScales(l=l, M=M_eff, sigma=sigma, ls=ls, lams=lams)


# ---------- one modified step ----------


@dataclass
class ModStep:
    v: Any
    w: Vec2
    conditions: List[BoundCheck]
    bounds: List[BoundCheck]

    @property
    def checks(self) -> List[BoundCheck]:
        return self.conditions + self.bounds

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def one_step_mod_check(
    v: Any,
    w: Vec2,
    p: StepParams,
    delta: Any,
    l: Fraction,
    points: PointSet,
    ctx: PrecisionContext,
    keep: Optional[int] = None,
) -> ModStep:
    """
    One corrugation under the scale conditions ‖∇^m a‖ <= δ/l^m (m = 0..3) and
    ‖∇^{m+1}v‖ <= δ/l^m (m = 1, 2), with the estimates that follow from them:

        defect error   <= δ²/(λl)
        |v_λ − v|      <= 0.4δ/λ           |w_λ − w|     <= 0.4(δ/λ)(1 + ‖∇v‖)
        |∇(v_λ − v)|   <= 2.4δ             |∇(w_λ − w)|  <= 2.4δ(1 + ‖∇v‖)
        |∇²(v_λ − v)|  <= 16.9δλ           |∇²(w_λ − w)| <= 21.9δλ(1 + ‖∇v‖)
        |∇³(v_λ − v)|  <= 123δλ²

    Raises
    ------
    PreconditionError
        λ < 1/l.
    """
    l = to_fraction(l)
    if p.lam * l < 1:
        raise PreconditionError("frequency {0} is below 1/l = {1}".format(fraction_text(p.lam), float(1 / l)))
    n = len(points)
    if is_zero(p.a):
        zeros = _const_array(0, n, ctx)
        names = ["scale_a{0}".format(m) for m in range(4)] + ["scale_v2", "scale_v3"]
        conds = [pointwise_check(nm, zeros, zeros, ctx, points) for nm in names]
        bnames = ("defect_error", "v_shift", "grad_v", "hess_v", "third_v", "w_shift", "grad_w", "hess_w")
        return ModStep(v, w, conds, [pointwise_check(nm, zeros, zeros, ctx, points) for nm in bnames])

    ja = _jets(p.a, points, ctx, _ORDER3)
    jv = _jets(v, points, ctx, _ORDER3)
    v_new, w_new = one_step(v, w, p)
    jdv = _jets(as_expr(v_new) - as_expr(v), points, ctx, _ORDER3)
    dw = _sub(w_new, w)
    jw1 = _jets(dw.first, points, ctx, _ORDER2)
    jw2 = _jets(dw.second, points, ctx, _ORDER2)

    with ctx.workdps():
        d = const_of(delta, ctx)
        lc = const_of(l, ctx)
        lam = const_of(p.lam, ctx)
        one = const_of(1, ctx)
        conditions = []
        for m in range(4):
            conditions.append(
                pointwise_check(
                    "scale_a{0}".format(m), _tensor(ja, m), _const_array(d / lc ** m, n, ctx), ctx, points, keep=keep
                )
            )
        for m in (1, 2):
            conditions.append(
                pointwise_check(
                    "scale_v{0}".format(m + 1),
                    _tensor(jv, m + 1),
                    _const_array(d / lc ** m, n, ctx),
                    ctx,
                    points,
                    keep=keep,
                )
            )

        g1, g2 = jv[(1, 0)], jv[(0, 1)]
        grad_v = pointwise_norm([g1, g2])
        grad_sup = max_of(grad_v)
        d1, d2 = jdv[(1, 0)], jdv[(0, 1)]
        e1, e2 = frame_vector_float(p.k) if ctx.is_double else frame_vector_mp(p.k)
        half = const_of(Fraction(1, 2), ctx)
        a2 = ja[(0, 0)] * ja[(0, 0)]
        c11 = g1 * d1 + half * d1 * d1 + jw1[(1, 0)] - a2 * e1 * e1
        c12 = half * (g1 * d2 + g2 * d1 + d1 * d2) + half * (jw1[(0, 1)] + jw2[(1, 0)]) - a2 * e1 * e2
        c22 = g2 * d2 + half * d2 * d2 + jw2[(0, 1)] - a2 * e2 * e2
        grad_dv = pointwise_norm([d1, d2])
        defect_scale = a2 + grad_v * grad_dv + grad_dv * grad_dv

        growth = one + grad_sup
        rows = [
            ("defect_error", pointwise_norm([c11, c12, c22], [1, 2, 1]), d * d / (lam * lc), defect_scale),
            ("v_shift", np.abs(jdv[(0, 0)]), const_of(_V_SHIFT, ctx) * d / lam, None),
            ("grad_v", grad_dv, const_of(_GRAD_SHIFT, ctx) * d, None),
            ("hess_v", _tensor(jdv, 2), const_of(_HESS_V, ctx) * d * lam, None),
            ("third_v", _tensor(jdv, 3), const_of(_THIRD_V, ctx) * d * lam * lam, None),
            (
                "w_shift",
                pointwise_norm([jw1[(0, 0)], jw2[(0, 0)]]),
                const_of(_V_SHIFT, ctx) * d / lam * growth,
                None,
            ),
            (
                "grad_w",
                pointwise_norm([jw1[(1, 0)], jw1[(0, 1)], jw2[(1, 0)], jw2[(0, 1)]]),
                const_of(_GRAD_SHIFT, ctx) * d * growth,
                None,
            ),
            (
                "hess_w",
                vec_hessian(jw1, jw2),
                const_of(_HESS_W, ctx) * d * lam * growth,
                None,
            ),
        ]
        bounds = [
            pointwise_check(name, measured, _const_array(rhs, n, ctx), ctx, points, scale, keep=keep)
            for name, measured, rhs, scale in rows
        ]
    return ModStep(v_new, w_new, conditions, bounds)


def vec_hessian(j1: Dict[Tuple[int, int], np.ndarray], j2: Dict[Tuple[int, int], np.ndarray]) -> np.ndarray:
    """|∇²w| of a vector field from the partials of its two components."""
    keys = [(2, 0), (1, 1), (0, 2)]
    return pointwise_norm([j1[k] for k in keys] + [j2[k] for k in keys], [1, 2, 1, 1, 2, 1])


# ---------- the stage ----------


def _emit_checks(hub: Any, index: int, k: int, checks: Sequence[BoundCheck]) -> None:
    for c in checks:
        emit(hub, BoundChecked("holder", index, k, c.name, c.passed, c.worst_ratio))


def run_stage_holder(
    v: Any,
    w: Vec2,
    A: SymMat,
    cfg: HolderStageConfig,
    domain: Rect,
    ctx: PrecisionContext,
    index: int = 1,
    hub: Any = None,
    strict: bool = True,
) -> Tuple[Any, Vec2, StageReport]:
    """
    Mollify, shift and corrugate three times; ``domain`` is Ω and the data
    live on Ω_r = ``domain.expand(cfg.r)``.

    Raises
    ------
    PreconditionError
        ‖D‖ on Ω_r is numerically zero or above δ₀, or the scale conditions on M fail.
    StageVerificationError
        A re-measured estimate fails and ``strict`` is set.
    """
    v = as_expr(v)
    w = Vec2(as_expr(w.first), as_expr(w.second))
    A = SymMat(*(as_expr(b) for b in A))
    outer = domain.expand(cfg.r)
    outer_pts = sample_points(outer, cfg.samples, ctx, stream=OUTER_STREAM)
    pts = sample_points(domain, cfg.samples, ctx)
    vpts = sample_points(domain, cfg.samples, ctx, stream=VERIFY_STREAM)

    D = assemble_defect(A, v, w).matrix
    d_norm = _sup(D, outer_pts, ctx)
    with ctx.workdps():
        if d_norm <= ctx.floor:
            raise PreconditionError("the defect is numerically zero on the outer rectangle")
        if d_norm > const_of(cfg.delta0, ctx):
            raise PreconditionError(
                "|D| = {0} exceeds delta0 = {1}".format(format_real(d_norm, ctx), float(cfg.delta0))
            )
    hess_v = _sup(derivatives_of(v, 2), outer_pts, ctx)
    hess_w = _sup(derivatives_of(w, 2), outer_pts, ctx)
    grad_v = _sup(derivatives_of(v, 1), outer_pts, ctx)
    scales = stage_scales(cfg, d_norm, hess_v, hess_w, ctx)
    check_frequency_precision(scales.lams[-1], outer, ctx)
    emit(hub, StageStarted("holder", index, format_real(d_norm, ctx)))

    ms = cfg.mollify
    mv = mollify(v, scales.l, ctx, cfg.r, ms.method, ms.quadrature_n, ms.tol)
    mw = mollify(w, scales.l, ctx, cfg.r, ms.method, ms.quadrature_n, ms.tol)
    mA = mollify(A, scales.l, ctx, cfg.r, ms.method, ms.quadrature_n, ms.tol)
    md_norm = _sup(assemble_defect(mA, mv, mw).matrix, pts, ctx)
    shift_bound = round_sig(to_fraction(d_norm) + to_fraction(md_norm), 12, up=True)
    shift = w_shift_field(shift_bound)
    mw_shifted = _sub(mw, shift)
    phi = assemble_defect(mA, mv, mw_shifted).coefficients
    amplitudes = [sqrt(phi[k], shift_bound / 4) for k in (1, 2, 3)]

    with ctx.workdps():
        min_phi_in = [min_of(as_array(_signed(phi[k], pts, ctx), ctx)) for k in (1, 2, 3)]
        amp_jets = [_jets(a, vpts, ctx, _ORDER3) for a in amplitudes]
        a_floor = _sqrt(d_norm / 2, ctx)
        bounds = [
            pointwise_check(
                "amplitude_floor_{0}".format(k + 1),
                _const_array(a_floor, len(vpts), ctx),
                amp_jets[k][(0, 0)],
                ctx,
                vpts,
                keep=cfg.keep,
            )
            for k in range(3)
        ]
        lc = const_of(scales.l, ctx)
        jv = _jets(mv, vpts, ctx, _ORDER3)
        term_v = max(lc ** m * max_of(_tensor(jv, m + 1)) for m in (1, 2))
        term_a = max(lc ** m * max_of(_tensor(j, m)) for j in amp_jets for m in range(4))
        delta1 = term_v + term_a
        deltas = [delta1 * DELTA_GROWTH ** k for k in range(3)]

    steps: List[StepRecord] = []
    cur_v, cur_w = mv, mw_shifted
    for k in (1, 2, 3):
        p = StepParams(amplitudes[k - 1], k, scales.lams[k - 1])
        step = one_step_mod_check(cur_v, cur_w, p, deltas[k - 1], scales.ls[k - 1], vpts, ctx, cfg.keep)
        _emit_checks(hub, index, k, step.checks)
        cur_v, cur_w = step.v, step.w
        emit(hub, StepCompleted("holder", index, k, fraction_text(p.lam)))
        emit(hub, StepFields("holder", index, k, cur_v, cur_w))
        steps.append(
            StepRecord(
                k=k,
                lam=fraction_text(p.lam),
                region="samples",
                min_phi=[format_real(min_phi_in[k - 1], ctx)],
                checks=step.checks,
                extra={"l": fraction_text(scales.ls[k - 1]), "delta": format_real(deltas[k - 1], ctx)},
            )
        )

    report = _finish(
        v, w, A, cur_v, cur_w, cfg, scales, domain, outer, pts, ctx, index,
        d_norm=d_norm, md_norm=md_norm, grad_v=grad_v, shift_bound=shift_bound,
        deltas=deltas, steps=steps, bounds=bounds, min_phi_in=min_phi_in,
    )
    emit(hub, StageFinished("holder", index, report.passed, report.d_norm, report.d_tilde_norm))
    if strict and not report.passed:
        raise StageVerificationError(
            "holder stage {0} failed: {1}".format(index, ", ".join(report.failed_checks())), report
        )
    return cur_v, cur_w, report


def _finish(
    v: Any,
    w: Vec2,
    A: SymMat,
    v3: Any,
    w3: Vec2,
    cfg: HolderStageConfig,
    scales: StageScales,
    domain: Rect,
    outer: Rect,
    pts: PointSet,
    ctx: PrecisionContext,
    index: int,
    **state: Any,
) -> StageReport:
    d_norm, grad_v = state["d_norm"], state["grad_v"]
    D3 = assemble_defect(A, v3, w3)
    dv = as_expr(v3) - v
    dw = _sub(w3, w)
    a_holder = holder_norm(A, outer, cfg.beta, ctx, cfg.samples, cfg.holder_pairs)
    with ctx.workdps():
        d3_norm = _sup(D3.matrix, pts, ctx)
        min_phi_out = [min_of(as_array(_signed(D3.coefficients[k], pts, ctx), ctx)) for k in (1, 2, 3)]
        norms = {
            "d3": d3_norm,
            "v3": _sup(v3, pts, ctx),
            "grad_v3": _sup(derivatives_of(v3, 1), pts, ctx),
            "grad_w3": _sup(derivatives_of(w3, 1), pts, ctx),
            "hess_v3": _sup(derivatives_of(v3, 2), pts, ctx),
            "hess_w3": _sup(derivatives_of(w3, 2), pts, ctx),
            "v_change": _sup(dv, pts, ctx),
            "w_change": _sup(dw, pts, ctx),
            "grad_v_change": _sup(derivatives_of(dv, 1), pts, ctx),
            "grad_w_change": _sup(derivatives_of(dw, 1), pts, ctx),
        }
        M = scales.M
        sigma = const_of(scales.sigma, ctx)
        beta = const_of(cfg.beta, ctx)
        sqrt_d = _sqrt(d_norm, ctx)
        growth = 1 + grad_v

        def c(q: Any) -> Any:
            return const_of(q, ctx)

        checks: List[ScalarCheck] = [
            scalar_check(
                "defect_stage",
                d3_norm,
                a_holder / M ** beta * d_norm ** (beta / 2) + c(_DEFECT_SIGMA) / sigma * d_norm,
                ctx,
            ),
            scalar_check("v_change", norms["v_change"], c(_NORM0) / M * d_norm, ctx),
            scalar_check(
                "w_change",
                norms["w_change"],
                (c(_NORM0) / M + c(_NORM0_DIAM) * c(to_fraction(outer.diameter))) * d_norm * growth,
                ctx,
            ),
            scalar_check("grad_v_change", norms["grad_v_change"], c(_NORM1) * sqrt_d, ctx),
            scalar_check("grad_w_change", norms["grad_w_change"], c(_NORM1) * growth * sqrt_d, ctx),
            scalar_check("hess_v3", norms["hess_v3"], c(_NORM2_V) * M * sigma ** 3, ctx),
            scalar_check("hess_w3", norms["hess_w3"], c(_NORM2_W) * growth * M * sigma ** 3, ctx),
        ]
        steps, bounds = state["steps"], state["bounds"]
        passed = (
            all(ch.passed for ch in checks)
            and all(b.passed for b in bounds)
            and all(b.passed for s in steps for b in s.checks)
        )
        return StageReport(
            pipeline="holder",
            index=index,
            mode="holder",
            d_norm=format_real(d_norm, ctx),
            d_tilde_norm=format_real(d3_norm, ctx),
            lambdas=[fraction_text(lam) for lam in scales.lams],
            v_change=format_real(norms["v_change"], ctx),
            passed=passed,
            steps=steps,
            checks=checks,
            bounds=bounds,
            min_phi_in=[format_real(m, ctx) for m in state["min_phi_in"]],
            min_phi_out=[format_real(m, ctx) for m in min_phi_out],
            norms={k: format_real(x, ctx) for k, x in norms.items()},
            extra={
                "sigma": fraction_text(scales.sigma),
                "l": fraction_text(scales.l),
                "M": format_real(M, ctx),
                "mollified_defect": format_real(state["md_norm"], ctx),
                "shift": fraction_text(state["shift_bound"]),
                "deltas": " ".join(format_real(d, ctx) for d in state["deltas"]),
                "a_holder_norm": format_real(a_holder, ctx),
                "grad_v": format_real(grad_v, ctx),
                "ratio_to_d": format_real(d3_norm / d_norm, ctx),
                "mollify": cfg.mollify.method,
            },
        )


def _signed(e: Any, points: PointSet, ctx: PrecisionContext) -> Any:
    return partials_on(as_expr(e), points, ctx, [(0, 0)])[(0, 0)]


# ---------- σ sweep and sampling variation ----------

SWEEP_COLUMNS = ("sigma", "d3", "grad_v3", "grad_w3", "hess_v3", "hess_w3")


@dataclass
class SweepRow:
    sigma: Fraction
    report: Optional[StageReport] = None
    error: str = ""

    def cells(self) -> List[str]:
        if self.report is None:
            return [fraction_text(self.sigma)] + ["error"] * (len(SWEEP_COLUMNS) - 1)
        return [fraction_text(self.sigma)] + [self.report.norms[c] for c in SWEEP_COLUMNS[1:]]


def sweep_sigma(
    v: Any,
    w: Vec2,
    A: SymMat,
    cfg: HolderStageConfig,
    sigmas: Sequence[Any],
    domain: Rect,
    ctx: PrecisionContext,
    hub: Any = None,
) -> List[SweepRow]:
    """One non-strict holder stage per σ; failures become rows carrying the error text."""
    rows: List[SweepRow] = []
    for s in sigmas:
        sigma = to_fraction(s)
        try:
            _, _, report = run_stage_holder(v, w, A, replace(cfg, sigma=sigma), domain, ctx, hub=hub, strict=False)
            row = SweepRow(sigma, report, "" if report.passed else "failed: " + ", ".join(report.failed_checks()))
        except CorrugatorError as exc:
            row = SweepRow(sigma, None, str(exc))
        rows.append(row)
        emit(hub, SweepRowFinished(fraction_text(sigma), row.report.norms["d3"] if row.report else "", row.error))
    return rows


def sampling_variation(
    v3: Any,
    w3: Vec2,
    A: SymMat,
    domain: Rect,
    ctx: PrecisionContext,
    seeds: int,
    samples: int,
) -> List[Dict[str, str]]:
    """‖D̃‖, ‖v₃‖ and ‖∇w₃‖ re-measured with ``seeds`` consecutive sample seeds."""
    D = assemble_defect(A, v3, w3).matrix
    rows = []
    for i in range(seeds):
        sctx = make_context(ctx.digits, ctx.rng_seed + i)
        pts = sample_points(domain, samples, sctx)
        rows.append(
            {
                "seed": str(sctx.rng_seed),
                "d3": format_real(_sup(D, pts, sctx), sctx),
                "v3": format_real(_sup(v3, pts, sctx), sctx),
                "grad_w3": format_real(_sup(derivatives_of(w3, 1), pts, sctx), sctx),
            }
        )
    return rows


def interpolation_ratio(v: Any, domain: Rect, alpha: Any, ctx: PrecisionContext, samples: int, pairs: int) -> Optional[Any]:
    """[∇v]_α / (‖∇v‖^{1−α}‖∇²v‖^α), or None when the denominator vanishes."""
    pts = sample_points(domain, samples, ctx)
    grad = derivatives_of(v, 1)
    with ctx.workdps():
        a = const_of(alpha, ctx)
        g = _sup(grad, pts, ctx)
        h = _sup(derivatives_of(v, 2), pts, ctx)
        if g == 0 or h == 0:
            return None
        return holder_seminorm_estimate(grad, domain, a, pairs, ctx) / (g ** (1 - a) * h ** a)


# ---------- the scheduler ----------


@dataclass(frozen=True)
class Schedule:
    """
    Parameters of the chained stages.

    ``admissible`` records whether σ satisfies the growth conditions; desk
    runs override σ and then only monitor the decay and gradient bounds.
    """

    alpha: Fraction
    beta: Fraction
    s: Fraction
    C: Any
    sigma_min: Any
    sigma_max: Any
    ramp_stages: int
    M0: Any
    N: int
    r: Fraction
    delta0: Fraction
    d0_norm: Any
    grad_v0: Any
    admissible: bool

    def sigma(self, k: int) -> Any:
        if self.ramp_stages <= 0 or k >= self.ramp_stages:
            return self.sigma_max
        return self.sigma_min * (self.sigma_max / self.sigma_min) ** (mpmath.mpf(k) / self.ramp_stages)

    def M(self, k: int) -> Any:
        out = self.M0 * self.C ** k
        for j in range(k):
            out *= self.sigma(j) ** 3
        return out

    def inset(self, k: int) -> Fraction:
        return self.r - self.delta0 * (1 - Fraction(1, 2 ** k))

    def decay_bound(self, k: int) -> Any:
        out = self.d0_norm
        for j in range(k):
            out /= self.sigma(j) ** to_mpf(self.s)
        return out


def _pow2_at_least(x: Any) -> int:
    n = 1
    while n < x:
        n *= 2
    return n


def build_schedule(
    alpha: Any,
    beta: Any,
    v0: Any,
    w0: Vec2,
    A: SymMat,
    domain: Rect,
    ctx: PrecisionContext,
    r: Any = Fraction(1, 1000),
    delta0: Any = DEFAULT_DELTA0,
    N: Optional[int] = None,
    sigma: Any = None,
    ramp_stages: int = 0,
    samples: int = 1000,
    pairs: int = 1000,
) -> Schedule:
    """
    s, 𝔠, σ and M₀ for the chained stages.

    s is the midpoint of (6α/(1−α), 6β/(2−β)) ∩ (0, 1); 𝔠 = 20.9·10⁸(1 + ‖∇v₀‖);
    σ_max is the smallest value above both σ_min (σ^s >= 16/9,
    σ^{1−s} > 3.7·10¹⁵) and 𝔠^{α/e} with e = (s/2)(1−α) − 3α;
    M₀ = N·(2σ_max)^{1/β}‖A‖_{C^{0,β}}^{1/β}‖D₀‖^{1/2−1/β} (N alone when A
    vanishes) with N the smallest power of 2 making M₀ dominate
    ‖∇²v₀‖, ‖∇²w₀‖ and 2δ₀^{−1/2}.

    ``sigma`` replaces the computed σ with a constant (not admissible unless it
    happens to satisfy the conditions).
    """
    alpha, beta, r, delta0 = (to_fraction(x) for x in (alpha, beta, r, delta0))
    if not 0 < beta < 1:
        raise ConfigurationError("beta must lie in (0, 1), got {0}".format(beta))
    if not 0 < alpha < 1:
        raise ConfigurationError("alpha must lie in (0, 1), got {0}".format(alpha))
    lo = max(6 * alpha / (1 - alpha), Fraction(0))
    hi = min(6 * beta / (2 - beta), Fraction(1))
    if not lo < hi:
        raise ConfigurationError(
            "no admissible s: 6a/(1-a) = {0:.4f} is not below min(6b/(2-b), 1) = {1:.4f}".format(float(lo), float(hi))
        )
    if not alpha < min(Fraction(1, 7), beta / 2):
        raise ConfigurationError("alpha must be below min(1/7, beta/2), got {0}".format(alpha))
    if not 0 < delta0 < min(r / 2, DELTA0_CAP):
        raise ConfigurationError(
            "delta0 must lie below min(r/2, {0}), got {1}".format(float(DELTA0_CAP), float(delta0))
        )
    s = (lo + hi) / 2
    outer = domain.expand(r)
    pts = sample_points(outer, samples, ctx, stream=OUTER_STREAM)
    v0, w0 = as_expr(v0), Vec2(as_expr(w0.first), as_expr(w0.second))
    A = SymMat(*(as_expr(b) for b in A))
    grad_v0 = _sup(derivatives_of(v0, 1), pts, ctx)
    hess_v0 = _sup(derivatives_of(v0, 2), pts, ctx)
    hess_w0 = _sup(derivatives_of(w0, 2), pts, ctx)
    d0 = _sup(assemble_defect(A, v0, w0).matrix, pts, ctx)
    a_sup = _sup(A, pts, ctx)
    a_norm = holder_norm(A, outer, beta, ctx, samples, pairs) if a_sup > 0 else 0

    with mpmath.workdps(max(30, ctx.digits + 5)):
        sm, am, bm = to_mpf(s), to_mpf(alpha), to_mpf(beta)
        C = to_mpf(_C_FACTOR) * (1 + to_mpf(grad_v0))
        sigma_min = max(to_mpf(_SIGMA_S) ** (1 / sm), to_mpf(_SIGMA_1S) ** (1 / (1 - sm))) * (1 + mpmath.mpf(10) ** -6)
        e = sm / 2 * (1 - am) - 3 * am
        if e <= 0:
            raise ConfigurationError("alpha={0} leaves no room for sigma_max at s={1}".format(alpha, float(s)))
        sigma_max = max(sigma_min, C ** (am / e) * 2)
        admissible = True
        if sigma is not None:
            sigma_min = sigma_max = to_mpf(to_fraction(sigma))
            ramp_stages = 0
            admissible = bool(
                sigma_max ** sm >= to_mpf(_SIGMA_S)
                and sigma_max ** (1 - sm) > to_mpf(_SIGMA_1S)
                and sigma_max ** e > C ** am
            )
        d0m = to_mpf(d0)
        if a_norm and d0m > 0:
            base = (2 * sigma_max * to_mpf(a_norm)) ** (1 / bm) * d0m ** (mpmath.mpf(1) / 2 - 1 / bm)
        else:
            base = mpmath.mpf(1)
        need = max(to_mpf(hess_v0), to_mpf(hess_w0), 2 / mpmath.sqrt(to_mpf(delta0)), mpmath.mpf(1))
        if N is None:
            N = _pow2_at_least(need / base)
        M0 = N * base
        if M0 < 2 / mpmath.sqrt(to_mpf(delta0)):
            raise ConfigurationError("M0 = {0} is below 2/sqrt(delta0)".format(mpmath.nstr(M0, 6)))
        return Schedule(
            alpha=alpha,
            beta=beta,
            s=s,
            C=C,
            sigma_min=sigma_min,
            sigma_max=sigma_max,
            ramp_stages=ramp_stages,
            M0=M0,
            N=int(N),
            r=r,
            delta0=delta0,
            d0_norm=d0m,
            grad_v0=to_mpf(grad_v0),
            admissible=admissible,
        )


@dataclass
class HolderRun:
    v: Any
    w: Vec2
    stages: List[StageReport]
    trace: List[Dict[str, str]]
    status: str


def run_holder(
    v: Any,
    w: Vec2,
    A: SymMat,
    schedule: Schedule,
    stage_budget: int,
    domain: Rect,
    ctx: PrecisionContext,
    cfg: HolderStageConfig,
    hub: Any = None,
) -> HolderRun:
    """
    Chain holder stages on Ω^k = Ω expanded by r − δ₀Σ_{i<=k}2^{−i}.

    Stage k runs with σ_k, M_k and inset width δ₀2^{−(k+1)}. Each trace row
    records ‖D_{k+1}‖ against ‖D₀‖/Πσ_j^s and 1 + ‖∇v_{k+1}‖ against
    2.2(1 + ‖∇v₀‖); these two are binding only for an admissible schedule.
    Statuses: zero_defect, budget_exhausted, stage_failed.
    """
    v = as_expr(v)
    w = Vec2(as_expr(w.first), as_expr(w.second))
    A = SymMat(*(as_expr(b) for b in A))
    stages: List[StageReport] = []
    trace: List[Dict[str, str]] = []
    status = "budget_exhausted"
    for k in range(stage_budget):
        outer = domain.expand(schedule.inset(k))
        inner = domain.expand(schedule.inset(k + 1))
        pts = sample_points(outer, cfg.samples, ctx, stream=OUTER_STREAM)
        d_k = _sup(assemble_defect(A, v, w).matrix, pts, ctx)
        with ctx.workdps():
            if d_k <= ctx.floor:
                status = "zero_defect"
                break
        stage_cfg = replace(
            cfg,
            sigma=to_fraction(schedule.sigma(k)),
            M=to_fraction(schedule.M(k)),
            lam1=None,
            r=schedule.inset(k) - schedule.inset(k + 1),
        )
        row: Dict[str, str] = {"stage": str(k + 1), "d_in": format_real(d_k, ctx)}
        try:
            v_next, w_next, report = run_stage_holder(v, w, A, stage_cfg, inner, ctx, index=k + 1, hub=hub, strict=False)
        except CorrugatorError as exc:
            row["error"] = str(exc)
            trace.append(row)
            status = "stage_failed"
            break
        with ctx.workdps():
            d_out = _sup(assemble_defect(A, v_next, w_next).matrix, sample_points(inner, cfg.samples, ctx), ctx)
            grad = _sup(derivatives_of(v_next, 1), sample_points(inner, cfg.samples, ctx), ctx)
            decay = scalar_check("decay", d_out, const_of(to_fraction(schedule.decay_bound(k + 1)), ctx), ctx)
            ceiling = scalar_check(
                "gradient_ceiling",
                1 + grad,
                const_of(_GRADIENT_CEILING, ctx) * (1 + const_of(to_fraction(schedule.grad_v0), ctx)),
                ctx,
            )
            ratio = interpolation_ratio(v_next, inner, schedule.alpha, ctx, cfg.samples, cfg.holder_pairs)
        report.checks.extend([decay, ceiling])
        if schedule.admissible:
            report.passed = report.passed and decay.passed and ceiling.passed
        row.update(
            {
                "sigma": format_real(const_of(to_fraction(schedule.sigma(k)), ctx), ctx),
                "M": report.extra["M"],
                "d_out": format_real(d_out, ctx),
                "decay_bound": decay.rhs,
                "decay_passed": str(decay.passed).lower(),
                "grad_v": format_real(grad, ctx),
                "vk_passed": str(ceiling.passed).lower(),
                "hess_v": report.norms["hess_v3"],
                "hess_w": report.norms["hess_w3"],
                "interpolation": format_real(ratio, ctx) if ratio is not None else "",
                "passed": str(report.passed).lower(),
            }
        )
        trace.append(row)
        stages.append(report)
        if not report.passed:
            status = "stage_failed"
            break
        v, w = v_next, w_next
    return HolderRun(v=v, w=w, stages=stages, trace=trace, status=status)
