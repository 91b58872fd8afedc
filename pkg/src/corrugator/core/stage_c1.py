"""
The C¹ stage: three corrugations along η₁, η₂, η₃ that take the defect D of
(v, w) to D̃ = δD − ΣB̃_k, and the outer iteration chaining such stages.

Frequencies come from one of two modes:

    search    smallest λ_k on a geometric grid whose measured
              B̃_k = D_k − D_{k−1} + ã_k²η_k⊗η_k passes
                A: ‖B̃_k‖ <= ‖D‖/12
                B: |B̃_k| < (8/(15√3))(δφ_i − margin) for i = 1, 2, 3
    apriori   smallest λ_k making every term of the pointwise estimate of
              |B_k| at most δφ/18 after the (5√3/8) coefficient bound, and
              λ_k >= ‖D‖^{1/2}/ε

B̃_k is measured on the full-domain grid while it has at most
``max_points`` nodes and on the subwindow otherwise; on a subwindow the
a-priori estimate over the full domain (with |∇²v_{k−1}| bounded from the
earlier steps) must pass A and B as well.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

import mpmath
import numpy as np

from ..domain.errors import (
    ConfigurationError,
    PreconditionError,
    SearchExhaustedError,
    StageVerificationError,
)
from ..domain.events import (
    BoundChecked,
    LambdaCandidateRejected,
    LambdaSelected,
    StageFinished,
    StageStarted,
    StepCompleted,
    StepFields,
    emit,
)
from ..domain.reports import BoundCheck, LambdaCandidate, ScalarCheck, StageReport, StepRecord
from .basis import COEFFICIENT_BOUND, decompose, frame_matrix, w_shift_field
from .corrugation import (
    StepParams,
    err_est_eta,
    hess_v_bound,
    measure_step,
    one_step,
    pointwise_norm,
)
from .expr import as_expr, is_zero, partials_on, sqrt, values_on
from .field import DOUBLE, Rect, SymMat, Vec2, assemble_defect, grid_points, grid_shape, sample
from .numeric import (
    PointSet,
    PrecisionContext,
    as_array,
    const_of,
    format_real,
    fraction_text,
    max_of,
    min_of,
    pi_of,
    sample_points,
    to_fraction,
    vsqrt,
)
from .verify import pointwise_check, scalar_check

MODES = ("search", "apriori")
METHODS = ("fd", "ad")

# Verification samples are drawn from their own stream so that changing the
# measurement method never moves them.
VERIFY_STREAM = 20

_ORDER1 = [(0, 0), (1, 0), (0, 1)]
_ORDER2 = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]


# ---------- settings ----------


@dataclass(frozen=True)
class SearchSettings:
    """The geometric λ grid: start·factor^j rounded to ``significant`` digits, up to lam_max."""

    start: Fraction = Fraction(1)
    factor: Fraction = Fraction(11, 10)
    lam_max: Fraction = Fraction(10 ** 6)
    margin: Fraction = Fraction(1, 10)
    significant: int = 3

    def __post_init__(self) -> None:
        for name in ("start", "factor", "lam_max", "margin"):
            object.__setattr__(self, name, to_fraction(getattr(self, name)))
        if self.start <= 0:
            raise ConfigurationError("search.lambdaStart must be positive, got {0}".format(self.start))
        if self.factor <= 1:
            raise ConfigurationError("search.factor must be > 1, got {0}".format(self.factor))
        if self.lam_max < self.start:
            raise ConfigurationError(
                "search.lambdaMax {0} is below search.lambdaStart {1}".format(self.lam_max, self.start)
            )
        if self.margin < 0:
            raise ConfigurationError("search.margin must be >= 0, got {0}".format(self.margin))
        if self.significant < 1:
            raise ConfigurationError("search.significant must be >= 1, got {0}".format(self.significant))


@dataclass(frozen=True)
class MeasureSettings:
    """
    Where and how B̃_k and the stage norms are measured.

    ``fd`` samples (v_k, w_k) on a grid of step h/q, q the smallest integer
    giving ``points_per_period`` nodes per period 1/λ, and differentiates
    with fourth-order stencils; ``ad`` evaluates exact derivatives at
    ``samples`` random points.
    """

    method: str = "fd"
    h: Fraction = Fraction(1, 500)
    points_per_period: int = 10
    max_points: int = 400_000
    subwindow: Optional[Rect] = None
    samples: int = 1000
    keep: int = 1000

    def __post_init__(self) -> None:
        object.__setattr__(self, "h", to_fraction(self.h))
        if self.method not in METHODS:
            raise ConfigurationError(
                "measure.method must be one of {0}, got {1!r}".format(", ".join(METHODS), self.method)
            )
        if self.h <= 0:
            raise ConfigurationError("grid.h must be positive, got {0}".format(self.h))
        if self.points_per_period < 1 or self.samples < 1 or self.keep < 1:
            raise ConfigurationError("grid.pointsPerPeriod, sampling.n and keep must be >= 1")
        if self.max_points < 25:
            raise ConfigurationError("grid.maxPoints must be >= 25, got {0}".format(self.max_points))


@dataclass(frozen=True)
class StagePlanC1:
    """
    Settings of one C¹ stage.

    Notes
    -----
    - ``delta`` is δ of the search mode and must be 1/2 there, so that
      ã_k = √(φ_k/2). The apriori mode uses δ(x) = ξ/(2|D(x)|).
    - ``xi`` defaults to 0.9·min|D|; both modes certify min φ̃_k ≥ ξd/(4‖D‖).
    - ``lambdas`` fixes the three frequencies; ``amplitudes`` replaces the
      amplitudes built from D.
    """

    mode: str = "search"
    eps: Fraction = Fraction(1, 10)
    delta: Fraction = Fraction(1, 2)
    xi: Optional[Fraction] = None
    lambdas: Optional[Tuple[Fraction, Fraction, Fraction]] = None
    amplitudes: Optional[Tuple[Any, Any, Any]] = None
    safety: Fraction = Fraction(1)
    search: SearchSettings = field(default_factory=SearchSettings)
    measure: MeasureSettings = field(default_factory=MeasureSettings)

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ConfigurationError(
                "stage mode must be one of {0}, got {1!r}".format(", ".join(MODES), self.mode)
            )
        object.__setattr__(self, "eps", to_fraction(self.eps))
        object.__setattr__(self, "delta", to_fraction(self.delta))
        object.__setattr__(self, "safety", to_fraction(self.safety))
        if self.eps <= 0:
            raise ConfigurationError("epsilon must be positive, got {0}".format(self.eps))
        if not 0 < self.delta < 1:
            raise ConfigurationError("delta must lie in (0, 1), got {0}".format(self.delta))
        if self.mode == "search" and self.delta != Fraction(1, 2):
            raise ConfigurationError("search mode uses delta = 0.5, got {0}".format(self.delta))
        if self.safety <= 0:
            raise ConfigurationError("safety factor must be positive, got {0}".format(self.safety))
        if self.xi is not None:
            object.__setattr__(self, "xi", to_fraction(self.xi))
            if self.xi <= 0:
                raise ConfigurationError("xi must be positive, got {0}".format(self.xi))
        if self.lambdas is not None:
            lams = tuple(to_fraction(l) for l in self.lambdas)
            if len(lams) != 3 or any(l <= 0 for l in lams):
                raise ConfigurationError("lambdas must be three positive numbers")
            if not lams[0] <= lams[1] <= lams[2]:
                raise ConfigurationError("lambdas must be nondecreasing, got {0}".format(
                    ", ".join(fraction_text(l) for l in lams)))
            object.__setattr__(self, "lambdas", lams)
        if self.amplitudes is not None and len(self.amplitudes) != 3:
            raise ConfigurationError("amplitudes must have three entries")


# ---------- the search grid ----------


def round_sig(value: Any, digits: int = 3, up: bool = False) -> Fraction:
    """``value`` rounded (or rounded up) to ``digits`` significant decimal digits, exactly."""
    value = to_fraction(value)
    if value <= 0:
        raise ValueError("can only round positive values, got {0}".format(value))
    m = len(str(value.numerator)) - len(str(value.denominator))
    while Fraction(10) ** m > value:
        m -= 1
    while Fraction(10) ** (m + 1) <= value:
        m += 1
    q = Fraction(10) ** (m - digits + 1)
    n = value / q
    return (math.ceil(n) if up else round(n)) * q


def search_grid(settings: SearchSettings, start: Optional[Fraction] = None) -> Iterator[Fraction]:
    """Strictly increasing rounded values start·factor^j not exceeding lam_max."""
    base = to_fraction(start) if start is not None else settings.start
    last: Optional[Fraction] = None
    j = 0
    while True:
        lam = round_sig(base * settings.factor ** j, settings.significant)
        j += 1
        if lam > settings.lam_max:
            return
        if last is not None and lam <= last:
            continue
        last = lam
        yield lam


# ---------- measurement regions ----------


@dataclass
class Region:
    name: str
    rect: Rect
    h: Optional[Fraction]
    points: PointSet


def default_subwindow(domain: Rect) -> Rect:
    """The square [0.8, 0.82] in relative coordinates of ``domain``."""
    w, h = domain.width, domain.height
    return Rect(
        domain.x_min + w * Fraction(4, 5),
        domain.x_min + w * Fraction(41, 50),
        domain.y_min + h * Fraction(4, 5),
        domain.y_min + h * Fraction(41, 50),
    )


def norm_points(domain: Rect, measure: MeasureSettings, ctx: PrecisionContext) -> PointSet:
    """Base grid nodes when the base grid fits in max_points (fd mode), random samples otherwise."""
    if measure.method == "fd":
        rows, cols = grid_shape(domain, measure.h)
        if rows * cols <= measure.max_points:
            return grid_points(domain, measure.h, ctx)
    return sample_points(domain, measure.samples, ctx)


def _flat(g: Any) -> np.ndarray:
    return g.values.ravel() + float(g.origin_value)


def _values(e: Any, points: PointSet, ctx: PrecisionContext) -> np.ndarray:
    with ctx.workdps():
        return as_array(values_on(as_expr(e), points, ctx), ctx)


def _matrix_values(M: SymMat, points: PointSet, ctx: PrecisionContext) -> SymMat:
    return M.map(lambda e: _values(e, points, ctx))


def _jets(e: Any, points: PointSet, ctx: PrecisionContext, wanted=_ORDER2) -> Dict[Tuple[int, int], np.ndarray]:
    with ctx.workdps():
        return {k: as_array(x, ctx) for k, x in partials_on(as_expr(e), points, ctx, wanted).items()}


def _frame(k: int, ctx: PrecisionContext) -> Tuple[Any, Any, Any]:
    return tuple(const_of(c, ctx) for c in frame_matrix(k))


def _sqrt(x: Any, ctx: PrecisionContext) -> Any:
    return math.sqrt(x) if ctx.is_double else mpmath.sqrt(x)


def _min3(phis: Sequence[np.ndarray]) -> np.ndarray:
    return np.minimum(np.minimum(phis[0], phis[1]), phis[2])


# ---------- stage state ----------


@dataclass
class Candidate:
    """One evaluated frequency of one step."""

    lam: Fraction
    accepted: bool
    reasons: List[str]
    b_norm: Any
    region: Region
    v_new: Any
    w_new: Vec2
    min_phi: List[Any]
    arrays: Dict[str, Any] = field(default_factory=dict)

    def record(self, ctx: PrecisionContext) -> LambdaCandidate:
        return LambdaCandidate(
            lam=fraction_text(self.lam),
            accepted=self.accepted,
            reasons=list(self.reasons),
            b_norm=format_real(self.b_norm, ctx),
            region=self.region.name,
        )


class StageState:
    """
    Everything one C¹ stage measures and decides, step by step.

    The input defect D, its frame coefficients φ_k and the amplitudes stay
    analytic; (v, w) advance through the accepted steps.
    """

    def __init__(
        self,
        v: Any,
        w: Vec2,
        A: SymMat,
        domain: Rect,
        plan: StagePlanC1,
        ctx: PrecisionContext,
        index: int = 1,
        hub: Any = None,
    ) -> None:
        self.plan = plan
        self.ctx = ctx
        self.mctx = DOUBLE if plan.measure.method == "fd" else ctx
        self.domain = domain
        self.index = index
        self.hub = hub
        self.A = SymMat(*(as_expr(b) for b in A))
        self.v0 = as_expr(v)
        self.w0 = Vec2(as_expr(w.first), as_expr(w.second))
        self.v, self.w = self.v0, self.w0
        self.defect = assemble_defect(self.A, self.v0, self.w0)
        self.phi = self.defect.coefficients
        self.norm_points = norm_points(domain, plan.measure, ctx)
        self.verify_points = sample_points(domain, plan.measure.samples, ctx, stream=VERIFY_STREAM)

        with ctx.workdps():
            d_vals = _matrix_values(self.defect.matrix, self.norm_points, ctx)
            self.d_abs = pointwise_norm(list(d_vals), [1, 2, 1])
            self.d_norm = max_of(self.d_abs)
            self.phi_vals = list(decompose(d_vals))
            self.min_phi_in = [min_of(p) for p in self.phi_vals]
            self.d_floor = min(self.min_phi_in)
            self.xi = self._resolve_xi()
        self.amplitudes = self._amplitudes()
        self.lambdas: List[Fraction] = []
        self.steps: List[StepRecord] = []
        self.b_norms: List[Any] = []
        self._rhs_sums: Dict[str, np.ndarray] = {}
        self._amp_jets: Dict[int, Dict[Tuple[int, int], np.ndarray]] = {}
        self._v0_hessian: Optional[np.ndarray] = None
        self._step_cache: Dict[Tuple[Any, ...], Dict[str, Any]] = {}

    # ---------- setup ----------

    def _resolve_xi(self) -> Any:
        min_abs = min_of(self.d_abs)
        if self.plan.xi is None:
            return min_abs * const_of(Fraction(9, 10), self.ctx)
        xi = const_of(self.plan.xi, self.ctx)
        if xi > min_abs:
            raise PreconditionError(
                "xi={0} exceeds the sampled minimum of |D| ({1})".format(
                    fraction_text(self.plan.xi), format_real(min_abs, self.ctx)
                )
            )
        return xi

    def _amplitudes(self) -> List[Any]:
        if self.plan.amplitudes is not None:
            return [as_expr(a) for a in self.plan.amplitudes]
        if self.d_floor <= 0:
            raise PreconditionError(
                "stage needs positive frame coefficients, sampled min phi = {0}".format(
                    ", ".join(format_real(p, self.ctx) for p in self.min_phi_in)
                )
            )
        out = []
        if self.plan.mode == "search":
            weight = 1 - self.plan.delta
            for k in (1, 2, 3):
                floor = to_fraction(self.min_phi_in[k - 1]) * weight / 2
                out.append(sqrt(self.phi[k] * weight, floor))
            return out
        m = self.defect.matrix
        abs_floor = (to_fraction(min_of(self.d_abs)) / 2) ** 2
        d_abs = sqrt(m.b11 * m.b11 + 2 * m.b12 * m.b12 + m.b22 * m.b22, abs_floor)
        delta = as_expr(to_fraction(self.xi)) / (2 * d_abs)
        for k in (1, 2, 3):
            floor = to_fraction(self.min_phi_in[k - 1]) / 4
            out.append(sqrt((1 - delta) * self.phi[k], floor))
        return out

    def all_zero(self) -> bool:
        return all(is_zero(a) for a in self.amplitudes)

    # ---------- regions ----------

    def region_for(self, lam: Fraction) -> Region:
        ms = self.plan.measure
        if ms.method == "ad":
            return Region("samples", self.domain, None, self.norm_points)
        q = max(1, math.ceil(ms.h * ms.points_per_period * lam))
        h = ms.h / q
        rows, cols = grid_shape(self.domain, h)
        if rows * cols <= ms.max_points:
            return Region("full", self.domain, h, grid_points(self.domain, h, DOUBLE))
        sub = ms.subwindow or default_subwindow(self.domain)
        if not self.domain.contains(sub):
            raise ConfigurationError("subwindow {0} lies outside the domain".format(sub.as_list()))
        rows, cols = grid_shape(sub, h)
        if rows * cols > ms.max_points:
            raise ConfigurationError(
                "subwindow grid at h={0} has {1} nodes, more than grid.maxPoints={2}".format(
                    fraction_text(h), rows * cols, ms.max_points
                )
            )
        return Region("subwindow", sub, h, grid_points(sub, h, DOUBLE))

    def _defect_on(self, v: Any, w: Vec2, region: Region) -> SymMat:
        if region.h is None:
            return _matrix_values(assemble_defect(self.A, v, w).matrix, region.points, self.mctx)
        vg = sample(v, region.rect, region.h)
        return assemble_defect(self.A, vg, w).matrix.map(_flat)

    def _region_data(self, k: int, region: Region) -> Dict[str, Any]:
        key = (k, region.name, region.h)
        data = self._step_cache.get(key)
        if data is not None:
            return data
        mctx = self.mctx
        with mctx.workdps():
            data = {
                "d_prev": self._defect_on(self.v, self.w, region),
                "phi_in": list(decompose(_matrix_values(self.defect.matrix, region.points, mctx))),
                "a2": _values(self.amplitudes[k - 1] * self.amplitudes[k - 1], region.points, mctx),
            }
        self._step_cache = {key: data}
        return data

    # ---------- a-priori estimates on the norm points ----------

    def amplitude_jets(self, k: int) -> Dict[str, np.ndarray]:
        if k not in self._amp_jets:
            j = _jets(self.amplitudes[k - 1], self.norm_points, self.ctx)
            with self.ctx.workdps():
                self._amp_jets[k] = {
                    "a": np.abs(j[(0, 0)]),
                    "grad_a": pointwise_norm([j[(1, 0)], j[(0, 1)]]),
                    "hess_a": pointwise_norm([j[(2, 0)], j[(1, 1)], j[(0, 2)]], [1, 2, 1]),
                }
        return self._amp_jets[k]

    def hessian_ceiling(self, k: int) -> np.ndarray:
        """Upper bound of |∇²v_{k−1}| at the norm points: |∇²v₀| plus the per-step second-derivative bounds."""
        ctx = self.ctx
        if self._v0_hessian is None:
            j = _jets(self.v0, self.norm_points, ctx, [(2, 0), (1, 1), (0, 2)])
            with ctx.workdps():
                self._v0_hessian = pointwise_norm([j[(2, 0)], j[(1, 1)], j[(0, 2)]], [1, 2, 1])
        out = self._v0_hessian
        with ctx.workdps():
            pi = pi_of(ctx)
            for i, lam in enumerate(self.lambdas[: k - 1], start=1):
                aj = self.amplitude_jets(i)
                out = out + hess_v_bound(aj["a"], aj["grad_a"], aj["hess_a"], const_of(lam, ctx), pi)
        return out

    def help_bound(self, k: int, lam: Fraction) -> np.ndarray:
        """Pointwise a-priori bound of |B_k| at the norm points."""
        aj = self.amplitude_jets(k)
        ceiling = self.hessian_ceiling(k)
        with self.ctx.workdps():
            return err_est_eta(aj["a"], aj["grad_a"], ceiling, const_of(lam, self.ctx), pi_of(self.ctx))

    def condition_b_limit(self, phis: Sequence[np.ndarray], ctx: PrecisionContext) -> np.ndarray:
        """(8/(15√3))(δ·min_i φ_i − margin) pointwise."""
        c = 1 / (3 * const_of(COEFFICIENT_BOUND, ctx)) if ctx.is_double else 8 / (15 * mpmath.sqrt(3))
        return c * (const_of(self.plan.delta, ctx) * _min3(phis) - const_of(self.plan.search.margin, ctx))

    def apriori_terms(self, k: int, lam: Fraction) -> Tuple[List[np.ndarray], np.ndarray]:
        """The three scaled terms of the pointwise |B_k| estimate and their common limit δφ/18."""
        ctx = self.ctx
        aj = self.amplitude_jets(k)
        ceiling = self.hessian_ceiling(k)
        with ctx.workdps():
            c = const_of(COEFFICIENT_BOUND, ctx) if ctx.is_double else 5 * mpmath.sqrt(3) / 8
            pi = pi_of(ctx)
            lam_c = const_of(lam, ctx)
            a, ga = aj["a"], aj["grad_a"]
            terms = [
                c * a * ga / (2 * pi * lam_c),
                c * a * ceiling / (pi * lam_c),
                c * ga * ga / (2 * pi * pi * lam_c * lam_c),
            ]
            return terms, self._delta_field() * _min3(self.phi_vals) / 18

    def _delta_field(self) -> np.ndarray:
        return self.xi / (2 * self.d_abs)

    def apriori_lambda(self, k: int) -> Fraction:
        """Smallest λ_k satisfying the three term limits and λ_k >= ‖D‖^{1/2}/ε, times the safety factor."""
        ctx = self.ctx
        aj = self.amplitude_jets(k)
        ceiling = self.hessian_ceiling(k)
        with ctx.workdps():
            c = const_of(COEFFICIENT_BOUND, ctx) if ctx.is_double else 5 * mpmath.sqrt(3) / 8
            pi = pi_of(ctx)
            r = self._delta_field() * _min3(self.phi_vals) / 18
            a, ga = aj["a"], aj["grad_a"]
            need = [
                max_of(c * a * ga / (2 * pi * r)),
                max_of(c * a * ceiling / (pi * r)),
                max_of(ga * vsqrt(c / (2 * r)) / pi),
                _sqrt(self.d_norm, ctx) / const_of(self.plan.eps, ctx),
            ]
            lam = max(need) * const_of(self.plan.safety, ctx)
        floor = self.lambdas[-1] if self.lambdas else Fraction(0)
        return max(floor, round_sig(to_fraction(lam), self.plan.search.significant, up=True))

    # ---------- candidates ----------

    def try_lambda(self, k: int, lam: Fraction) -> Candidate:
        """Corrugate (v_{k−1}, w_{k−1}) at λ and test the measured B̃_k against conditions A and B."""
        p = StepParams(self.amplitudes[k - 1], k, lam)
        v_new, w_new = one_step(self.v, self.w, p)
        region = self.region_for(lam)
        data = self._region_data(k, region)
        mctx = self.mctx
        reasons: List[str] = []
        with mctx.workdps():
            d_new = self._defect_on(v_new, w_new, region)
            e11, e12, e22 = _frame(k, mctx)
            d_prev, a2 = data["d_prev"], data["a2"]
            b = SymMat(
                d_new.b11 - d_prev.b11 + a2 * e11,
                d_new.b12 - d_prev.b12 + a2 * e12,
                d_new.b22 - d_prev.b22 + a2 * e22,
            )
            b_abs = pointwise_norm(list(b), [1, 2, 1])
            b_norm = max_of(b_abs)
            limit_a = const_of(self.d_norm, mctx) / 12
            limit_b = self.condition_b_limit(data["phi_in"], mctx)
            if not b_norm <= limit_a:
                reasons.append("A")
            if not bool(np.all(b_abs < limit_b)):
                reasons.append("B")
            min_phi = [min_of(p_) for p_ in decompose(d_new)]
        arrays: Dict[str, Any] = {"b_abs": b_abs, "limit_b": limit_b, "limit_a": limit_a}
        if region.name == "subwindow":
            help_abs = self.help_bound(k, lam)
            with self.ctx.workdps():
                help_limit_b = self.condition_b_limit(self.phi_vals, self.ctx)
                if not max_of(help_abs) <= self.d_norm / 12:
                    reasons.append("apriori-A")
                if not bool(np.all(help_abs < help_limit_b)):
                    reasons.append("apriori-B")
            arrays.update(help_abs=help_abs, help_limit_b=help_limit_b)
        return Candidate(lam, not reasons, reasons, b_norm, region, v_new, w_new, min_phi, arrays)

    def condition_checks(self, cand: Candidate) -> List[BoundCheck]:
        mctx, keep = self.mctx, self.plan.measure.keep
        arr = cand.arrays
        with mctx.workdps():
            checks = [
                pointwise_check(
                    "condition_a",
                    as_array([cand.b_norm], mctx),
                    as_array([arr["limit_a"]], mctx),
                    mctx,
                    note="region {0}".format(cand.region.name),
                ),
                pointwise_check(
                    "condition_b", arr["b_abs"], arr["limit_b"], mctx, cand.region.points, keep=keep
                ),
            ]
        if "help_abs" in arr:
            ctx = self.ctx
            with ctx.workdps():
                checks.append(
                    pointwise_check(
                        "apriori_a",
                        as_array([max_of(arr["help_abs"])], ctx),
                        as_array([self.d_norm / 12], ctx),
                        ctx,
                    )
                )
                checks.append(
                    pointwise_check(
                        "apriori_b", arr["help_abs"], arr["help_limit_b"], ctx, self.norm_points, keep=keep
                    )
                )
        return checks

    def apriori_checks(self, k: int, lam: Fraction) -> List[BoundCheck]:
        terms, limit = self.apriori_terms(k, lam)
        with self.ctx.workdps():
            return [
                pointwise_check(
                    "apriori_term{0}".format(i), t, limit, self.ctx, self.norm_points, keep=self.plan.measure.keep
                )
                for i, t in enumerate(terms, start=1)
            ]

    # ---------- accepting a step ----------

    def accept(self, k: int, cand: Candidate, candidates: List[Candidate]) -> StepRecord:
        ctx = self.ctx
        p = StepParams(self.amplitudes[k - 1], k, cand.lam)
        checks, rhs = measure_step(self.v, self.w, cand.v_new, cand.w_new, p, self.verify_points, ctx)
        checks.extend(self.condition_checks(cand))
        if self.plan.mode == "apriori":
            checks.extend(self.apriori_checks(k, cand.lam))
        with ctx.workdps():
            for name, arr in rhs.items():
                self._rhs_sums[name] = arr if name not in self._rhs_sums else self._rhs_sums[name] + arr
            dv = np.abs(_values(as_expr(cand.v_new) - self.v, self.verify_points, ctx))
            v_change = max_of(dv)
        for c in checks:
            emit(self.hub, BoundChecked("c1", self.index, k, c.name, c.passed, c.worst_ratio))
        record = StepRecord(
            k=k,
            lam=fraction_text(cand.lam),
            h=fraction_text(cand.region.h) if cand.region.h is not None else "",
            region=cand.region.name,
            b_norm=format_real(cand.b_norm, self.mctx),
            min_phi=[format_real(m, self.mctx) for m in cand.min_phi],
            v_change=format_real(v_change, ctx),
            candidates=[c.record(self.mctx) for c in candidates],
            checks=checks,
        )
        self.v, self.w = cand.v_new, cand.w_new
        self.lambdas.append(cand.lam)
        self.b_norms.append(cand.b_norm)
        self.steps.append(record)
        self._step_cache = {}
        emit(self.hub, StepCompleted("c1", self.index, k, record.lam, record.v_change))
        emit(self.hub, StepFields("c1", self.index, k, self.v, self.w))
        return record


# ---------- frequency selection ----------


def plan_lambda_search(state: StageState, k: int, D_norm: Any = None) -> Tuple[Candidate, List[Candidate]]:
    """
    Select λ_k for step k of ``state``.

    Returns
    -------
    (chosen, evaluated): the accepted candidate and every candidate tried,
    in order. Fixed and apriori frequencies are evaluated once and kept
    even when conditions A/B fail; the failure then shows in the step checks.

    Raises
    ------
    SearchExhaustedError
        No grid value up to lam_max passes both conditions.
    """
    if D_norm is not None:
        state.d_norm = D_norm
    plan = state.plan
    if plan.lambdas is not None or plan.mode == "apriori":
        lam = plan.lambdas[k - 1] if plan.lambdas is not None else state.apriori_lambda(k)
        cand = state.try_lambda(k, lam)
        emit(state.hub, LambdaSelected(state.index, k, fraction_text(lam), cand.region.name,
                                       format_real(cand.b_norm, state.mctx)))
        return cand, [cand]

    start = max(plan.search.start, state.lambdas[-1]) if state.lambdas else plan.search.start
    tried: List[Candidate] = []
    for lam in search_grid(plan.search, start):
        cand = state.try_lambda(k, lam)
        tried.append(cand)
        if cand.accepted:
            emit(state.hub, LambdaSelected(state.index, k, fraction_text(lam), cand.region.name,
                                           format_real(cand.b_norm, state.mctx)))
            return cand, tried
        emit(state.hub, LambdaCandidateRejected(state.index, k, fraction_text(lam), list(cand.reasons),
                                                format_real(cand.b_norm, state.mctx)))
    raise SearchExhaustedError(
        "no frequency up to {0} satisfies conditions A and B in step {1} of stage {2}".format(
            fraction_text(plan.search.lam_max), k, state.index
        ),
        {
            "stage": state.index,
            "step": k,
            "lambda_max": fraction_text(plan.search.lam_max),
            "candidates": [c.record(state.mctx).__dict__ for c in tried[-10:]],
        },
    )


# ---------- the stage ----------


def run_stage_c1(
    v: Any,
    w: Vec2,
    A: SymMat,
    plan: StagePlanC1,
    domain: Rect,
    ctx: PrecisionContext,
    index: int = 1,
    hub: Any = None,
    strict: bool = True,
) -> Tuple[Any, Vec2, StageReport]:
    """
    Three corrugations (ã_k, η_k, λ_k), k = 1, 2, 3, and the stage report.

    The report re-measures every certified claim: the defect reduction, the
    coefficient floor, ‖ṽ − v‖ against ε and against 3‖D‖^{1/2}/(π min λ),
    ‖∇ṽ − ∇v‖ against 7‖D‖^{1/2}, and pointwise the accumulated per-step
    bounds for v, w and their gradients.

    Raises
    ------
    StageVerificationError
        A recorded check fails and ``strict`` is set; the report is attached.
    """
    state = StageState(v, w, A, domain, plan, ctx, index, hub)
    emit(hub, StageStarted("c1", index, format_real(state.d_norm, ctx)))
    if state.all_zero():
        report = _identity_stage(state)
    else:
        for k in (1, 2, 3):
            cand, tried = plan_lambda_search(state, k)
            state.accept(k, cand, tried)
        report = _finish(state)
    emit(hub, StageFinished("c1", index, report.passed, report.d_norm, report.d_tilde_norm))
    if strict and not report.passed:
        raise StageVerificationError(
            "stage {0} failed: {1}".format(index, ", ".join(report.failed_checks())), report
        )
    return state.v, state.w, report


def _identity_stage(state: StageState) -> StageReport:
    ctx = state.ctx
    lams = state.plan.lambdas or (state.plan.search.start,) * 3
    for k in (1, 2, 3):
        p = StepParams(state.amplitudes[k - 1], k, lams[k - 1])
        checks, _ = measure_step(state.v, state.w, state.v, state.w, p, state.verify_points, ctx)
        state.steps.append(StepRecord(k=k, lam=fraction_text(p.lam), region="none", checks=checks))
        state.lambdas.append(p.lam)
    with ctx.workdps():
        d_tilde = state.d_norm
        checks = [
            scalar_check("defect_unchanged", d_tilde, state.d_norm, ctx),
            scalar_check("v_change", const_of(0, ctx), const_of(state.plan.eps, ctx), ctx),
        ]
        return StageReport(
            pipeline="c1",
            index=state.index,
            mode=state.plan.mode,
            d_norm=format_real(state.d_norm, ctx),
            d_tilde_norm=format_real(d_tilde, ctx),
            lambdas=[fraction_text(l) for l in state.lambdas],
            v_change=format_real(const_of(0, ctx), ctx),
            passed=all(c.passed for c in checks) and all(b.passed for s in state.steps for b in s.checks),
            steps=state.steps,
            checks=checks,
            min_phi_in=[format_real(m, ctx) for m in state.min_phi_in],
            min_phi_out=[format_real(m, ctx) for m in state.min_phi_in],
            extra={"identity": "true"},
        )


def _finish(state: StageState) -> StageReport:
    ctx = state.ctx
    plan = state.plan
    pts, vpts = state.norm_points, state.verify_points
    d_tilde = assemble_defect(state.A, state.v, state.w).matrix
    dv = as_expr(state.v) - state.v0
    dw1 = as_expr(state.w.first) - state.w0.first
    dw2 = as_expr(state.w.second) - state.w0.second
    gdv = _jets(dv, vpts, ctx, _ORDER1)
    gw1 = _jets(dw1, vpts, ctx, _ORDER1)
    gw2 = _jets(dw2, vpts, ctx, _ORDER1)
    with ctx.workdps():
        dt_vals = _matrix_values(d_tilde, pts, ctx)
        d_tilde_norm = max_of(pointwise_norm(list(dt_vals), [1, 2, 1]))
        min_phi_out = [min_of(p) for p in decompose(dt_vals)]
        v_change = max_of(np.abs(_values(dv, pts, ctx)))
        grad_dv = pointwise_norm([gdv[(1, 0)], gdv[(0, 1)]])
        sqrt_d = _sqrt(state.d_norm, ctx)
        pi = pi_of(ctx)
        three_quarters = const_of(Fraction(3, 4), ctx)
        eps = const_of(plan.eps, ctx)
        min_lam = const_of(min(state.lambdas), ctx)

        checks: List[ScalarCheck] = []
        extra: Dict[str, str] = {
            "ratio_to_d": format_real(d_tilde_norm / state.d_norm, ctx),
            "b_ratio_12": format_real(sum(const_of(b, ctx) for b in state.b_norms[:2]) / state.d_norm, ctx),
            "d": format_real(state.d_floor, ctx),
        }
        d_tilde_floor = state.xi * state.d_floor / (4 * state.d_norm)
        extra["xi"] = format_real(state.xi, ctx)
        extra["d_tilde"] = format_real(d_tilde_floor, ctx)
        if state.xi > 0:
            extra["ratio_to_xi"] = format_real(d_tilde_norm / state.xi, ctx)
        if plan.mode == "apriori":
            checks.append(scalar_check("defect_xi", d_tilde_norm, three_quarters * state.xi, ctx))
        else:
            checks.append(scalar_check("defect_ratio", d_tilde_norm, three_quarters * state.d_norm, ctx))
            checks.append(scalar_check("min_phi_out", const_of(plan.search.margin, ctx), min(min_phi_out), ctx))
        checks.extend(
            [
                scalar_check("min_phi_dtilde", d_tilde_floor, min(min_phi_out), ctx),
                scalar_check("v_change", v_change, eps, ctx),
                scalar_check("v_change_apriori", v_change, 3 * sqrt_d / (pi * min_lam), ctx),
                scalar_check("grad_v_change", max_of(grad_dv), 7 * sqrt_d, ctx),
            ]
        )
        sums = state._rhs_sums
        bounds = [
            pointwise_check("v_change_sum", np.abs(gdv[(0, 0)]), sums["v_shift"], ctx, vpts),
            pointwise_check("w_change_sum", pointwise_norm([gw1[(0, 0)], gw2[(0, 0)]]), sums["w_shift"], ctx, vpts),
            pointwise_check("grad_v_change_sum", grad_dv, sums["grad_v"], ctx, vpts),
            pointwise_check(
                "grad_w_change_sum",
                pointwise_norm([gw1[(1, 0)], gw1[(0, 1)], gw2[(1, 0)], gw2[(0, 1)]]),
                sums["grad_w"],
                ctx,
                vpts,
            ),
        ]
        passed = (
            all(c.passed for c in checks)
            and all(b.passed for b in bounds)
            and all(b.passed for s in state.steps for b in s.checks)
        )
        return StageReport(
            pipeline="c1",
            index=state.index,
            mode=plan.mode,
            d_norm=format_real(state.d_norm, ctx),
            d_tilde_norm=format_real(d_tilde_norm, ctx),
            lambdas=[fraction_text(l) for l in state.lambdas],
            v_change=format_real(v_change, ctx),
            passed=passed,
            steps=state.steps,
            checks=checks,
            bounds=bounds,
            min_phi_in=[format_real(m, ctx) for m in state.min_phi_in],
            min_phi_out=[format_real(m, ctx) for m in min_phi_out],
            norms={
                "v_change": format_real(v_change, ctx),
                "grad_v_change": format_real(max_of(grad_dv), ctx),
            },
            extra=extra,
        )


# ---------- iteration ----------


@dataclass(frozen=True)
class C1Schedule:
    """Stop once the sampled ‖D‖ is at most ``target`` or after ``stage_budget`` stages."""

    target: Fraction = Fraction(0)
    stage_budget: int = 1
    shift_if_needed: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "target", to_fraction(self.target))
        if self.target < 0:
            raise ConfigurationError("target must be >= 0, got {0}".format(self.target))
        if self.stage_budget < 0:
            raise ConfigurationError("stage budget must be >= 0, got {0}".format(self.stage_budget))


@dataclass
class C1Iteration:
    v: Any
    w: Vec2
    stages: List[Tuple[Any, Vec2, StageReport]]
    status: str
    shifted: bool = False


def iterate_c1(
    v0: Any,
    w0: Vec2,
    A: SymMat,
    eps: Any,
    schedule: C1Schedule,
    domain: Rect,
    plan: StagePlanC1,
    ctx: PrecisionContext,
    hub: Any = None,
) -> C1Iteration:
    """
    Chain C¹ stages until the defect reaches the target or the budget runs out.

    Each stage receives what is left of ε after the measured ‖v_k − v₀‖, so
    the cumulative distance never exceeds ε. Stages after the first start
    their search at the previous stage's last frequency; fixed ``lambdas``
    apply to the first stage only. A failed stage ends the iteration with
    its report kept.
    """
    eps = to_fraction(eps)
    if eps <= 0:
        raise ConfigurationError("epsilon must be positive, got {0}".format(eps))
    v, w = as_expr(v0), Vec2(as_expr(w0.first), as_expr(w0.second))
    A = SymMat(*(as_expr(b) for b in A))
    pts = norm_points(domain, plan.measure, ctx)
    shifted = False

    def measured(v_: Any, w_: Any) -> Tuple[Any, List[Any]]:
        vals = _matrix_values(assemble_defect(A, v_, w_).matrix, pts, ctx)
        with ctx.workdps():
            return max_of(pointwise_norm(list(vals), [1, 2, 1])), [min_of(p) for p in decompose(vals)]

    d_norm, min_phi = measured(v, w)
    if schedule.shift_if_needed and min(min_phi) <= 0:
        bound = to_fraction(d_norm) * Fraction(101, 100)
        shift = w_shift_field(bound)
        w = Vec2(w.first - shift.first, w.second - shift.second)
        shifted = True
        d_norm, _ = measured(v, w)

    stages: List[Tuple[Any, Vec2, StageReport]] = []
    status = "budget_exhausted"
    current = plan
    for i in range(schedule.stage_budget):
        if to_fraction(d_norm) <= schedule.target:
            status = "target_reached"
            break
        with ctx.workdps():
            spent = max_of(np.abs(_values(as_expr(v) - as_expr(v0), pts, ctx)))
        remaining = eps - to_fraction(spent)
        if remaining <= 0:
            status = "eps_exhausted"
            break
        current = replace(current, eps=remaining)
        v, w, report = run_stage_c1(v, w, A, current, domain, ctx, index=i + 1, hub=hub, strict=False)
        stages.append((v, w, report))
        if not report.passed:
            status = "stage_failed"
            break
        last = max(Fraction(l) for l in report.lambdas)
        current = replace(
            current,
            lambdas=None,
            amplitudes=None,
            search=replace(current.search, start=max(current.search.start, last)),
        )
        d_norm, _ = measured(v, w)
    else:
        if to_fraction(d_norm) <= schedule.target:
            status = "target_reached"
    return C1Iteration(v=v, w=w, stages=stages, status=status, shifted=shifted)
