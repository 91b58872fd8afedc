"""
The compactly supported mollifier

    φ(x) = exp(−1/(1 − |x|²)) / A  for |x| < 1,  0 otherwise,
    A = π(1/e + Ei(−1)),  φ_l(x) = φ(x/l)/l²,

its L¹ derivative norms, convolution of fields with φ_l and the smoothing
estimates that come with it.

Mollified analytic fields stay lazy: ``Mollified`` is an expression node
whose jets come either from a tensor-product midpoint rule over the support
square or, for scales far below the sampling resolution, from the kernel
moments, f∗φ_l = Σ_{i,j even} l^{i+j} μ_ij ∂^{ij}f / (i! j!).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Any, Dict, List, Optional, Tuple

import mpmath
import numpy as np
from scipy.integrate import simpson
from scipy.signal import convolve2d

from ..domain.errors import ConfigurationError, DomainError, GridTooSmallError, QuadratureError
from ..domain.reports import ScalarCheck
from .expr import Const, Expr, as_expr
from .expr.evaluate import Evaluator
from .expr.series import Series
from .field import GridField, Rect, SymMat, Vec2
from .numeric import GUARD_DIGITS, PrecisionContext, const_of, to_fraction, to_mpf
from .verify import scalar_check

METHODS = ("auto", "quadrature", "moments")

# L¹ bounds of φ, ∇φ, ∇²φ, ∇³φ used throughout the stage estimates.
KERNEL_NORM_BOUNDS = (Fraction(1), Fraction(31, 10), Fraction(159, 10), Fraction(210))

# ‖∇^m((fg)∗φ_l − (f∗φ_l)(g∗φ_l))‖ <= C_m l^{2α−m} [f]_α [g]_α, m = 0..3
COMMUTATOR_CONSTANTS = (Fraction(2), Fraction(93, 10), Fraction(67), Fraction(9258, 10))

# Largest even moment order the lazy node accepts before quadrature is used.
MAX_MOMENT_ORDER = 8

DEFAULT_QUADRATURE_N = 64
DEFAULT_TOL = Fraction(1, 10 ** 8)
MAX_DOUBLINGS = 5

# float64 batch size of one quadrature block (points × nodes)
_BLOCK = 1 << 18


# ---------- the kernel ----------


@lru_cache(maxsize=16)
def _kernel_constant(dps: int) -> mpmath.mpf:
    with mpmath.workdps(dps):
        return mpmath.pi * (1 / mpmath.e + mpmath.ei(-1))


def kernel_constant(ctx: PrecisionContext) -> mpmath.mpf:
    """A = π(1/e + Ei(−1)) ≈ 0.46651 at the context precision."""
    return _kernel_constant(ctx.digits + GUARD_DIGITS)


def _check_scale(l: Any) -> None:
    if not 0 < l < 1:
        raise DomainError("mollification scale must lie in (0, 1), got {0}".format(l))


def kernel_value(x: Tuple[Any, Any], l: Any, ctx: PrecisionContext) -> Any:
    """φ_l(x) = (1/l²)(1/A) exp(−1/(1 − |x/l|²)) inside the disk of radius l, 0 outside."""
    _check_scale(l)
    with ctx.workdps():
        lm = to_mpf(l)
        r2 = (to_mpf(x[0]) ** 2 + to_mpf(x[1]) ** 2) / (lm * lm)
        if r2 >= 1:
            out = mpmath.mpf(0)
        else:
            out = mpmath.exp(-1 / (1 - r2)) / (kernel_constant(ctx) * lm * lm)
        return float(out) if ctx.is_double else out


# ---------- L¹ norms of the derivatives ----------


def _radial_profile(r: np.ndarray) -> Dict[str, np.ndarray]:
    """
    g = A·φ(r) and what the derivative norms need, on 0 <= r < 1.

    With u = 1 − r², g = exp(−1/u), g' = g·p, p = −2r/u²:
        |∇²φ|² ∝ g''² + (g'/r)²
        |∇³φ|² ∝ g'''² + 3((g'' − g'/r)/r)²
    Points with u below 1/60 contribute less than 1e−13 and are dropped.
    """
    out = {k: np.zeros_like(r) for k in ("g", "g1", "g2", "g3", "t1", "t2")}
    u = 1.0 - r * r
    m = u > 1.0 / 60.0
    r, u = r[m], u[m]
    with np.errstate(under="ignore"):
        g = np.exp(-1.0 / u)
    p = -2.0 * r / u ** 2
    dp = -2.0 / u ** 2 - 8.0 * r * r / u ** 3
    ddp = -24.0 * r / u ** 3 - 48.0 * r ** 3 / u ** 4
    q = dp + p * p
    dq = ddp + 2.0 * p * dp
    out["g"][m] = g
    out["g1"][m] = g * p
    out["g2"][m] = g * q
    out["g3"][m] = g * (dq + q * p)
    out["t1"][m] = g * (-2.0 / u ** 2)
    out["t2"][m] = g * r * (-8.0 / u ** 3 + 4.0 / u ** 4)
    return out


def _norm_integrands(r: np.ndarray) -> List[np.ndarray]:
    f = _radial_profile(r)
    return [
        r * f["g"],
        r * np.abs(f["g1"]),
        r * np.sqrt(f["g2"] ** 2 + f["t1"] ** 2),
        r * np.sqrt(f["g3"] ** 2 + 3.0 * f["t2"] ** 2),
    ]


@dataclass(frozen=True)
class KernelNorms:
    """‖∇^mφ‖_{L¹(ℝ²)} for m = 0..3 (Frobenius norm of the derivative tensor) and the rule used."""

    values: Tuple[float, float, float, float]
    nodes: int

    def __getitem__(self, m: int) -> float:
        return self.values[m]

    def checks(self, ctx: PrecisionContext) -> List[ScalarCheck]:
        """Each norm against its bound; the first one to quadrature tolerance."""
        out = []
        for m, (value, bound) in enumerate(zip(self.values, KERNEL_NORM_BOUNDS)):
            slack = Fraction(1, 10 ** 8) if m == 0 else 0
            out.append(scalar_check("kernel_norm_{0}".format(m), value, float(bound), ctx, slack))
        return out


def kernel_norms(quadrature_n: int = 1000, tol: Any = DEFAULT_TOL, max_doublings: int = 10) -> KernelNorms:
    """
    L¹ norms of φ and its first three derivatives by radial Simpson integration.

    The node count starts at ``quadrature_n`` and doubles until two successive
    results agree to ``tol`` relative in every norm.

    Raises
    ------
    QuadratureError
        No agreement after ``max_doublings`` doublings.
    """
    if quadrature_n < 1000:
        raise ConfigurationError("kernel_norms needs at least 1000 nodes, got {0}".format(quadrature_n))
    tol = float(tol)
    A = float(_kernel_constant(30))
    n = quadrature_n + quadrature_n % 2
    previous: Optional[List[float]] = None
    for _ in range(max_doublings + 1):
        r = np.linspace(0.0, 1.0, n + 1)
        current = [2.0 * math.pi * float(simpson(f, x=r)) / A for f in _norm_integrands(r)]
        if previous is not None and all(
            abs(c - p) <= tol * abs(c) for c, p in zip(current, previous)
        ):
            return KernelNorms(tuple(current), n)
        previous = current
        n *= 2
    raise QuadratureError(
        "kernel norms did not settle to {0:g} with {1} nodes".format(tol, n // 2)
    )


# ---------- moments ----------


@lru_cache(maxsize=64)
def _radial_moment(m: int, dps: int) -> mpmath.mpf:
    with mpmath.workdps(dps):
        integral = mpmath.quad(lambda r: r ** (m + 1) * mpmath.exp(-1 / (1 - r * r)), [0, 1])
        return integral / _kernel_constant(dps)


def kernel_moment(i: int, j: int, ctx: PrecisionContext) -> mpmath.mpf:
    """μ_ij = ∫ y₁^i y₂^j φ(y) dy; zero unless i and j are both even."""
    if i % 2 or j % 2:
        return mpmath.mpf(0)
    dps = ctx.digits + GUARD_DIGITS
    with mpmath.workdps(dps):
        angular = 2 * mpmath.gamma(mpmath.mpf(i + 1) / 2) * mpmath.gamma(mpmath.mpf(j + 1) / 2) / mpmath.gamma(
            mpmath.mpf(i + j) / 2 + 1
        )
        return _radial_moment(i + j, dps) * angular


def moment_order(l: Any, ctx: PrecisionContext) -> int:
    """Smallest even K >= 2 with l^{K+2} below the working precision."""
    _check_scale(l)
    digits = ctx.digits + GUARD_DIGITS
    with mpmath.workdps(30):
        decades = -mpmath.log10(to_mpf(l))
        k = int(mpmath.ceil(digits / decades)) - 2
    k = max(2, k)
    return k + k % 2


def choose_method(l: Any, ctx: PrecisionContext, method: str = "auto") -> str:
    if method not in METHODS:
        raise ConfigurationError(
            "mollify.method must be one of {0}, got {1!r}".format(", ".join(METHODS), method)
        )
    if method != "auto":
        return method
    return "moments" if moment_order(l, ctx) <= MAX_MOMENT_ORDER else "quadrature"


# ---------- the lazy node ----------


class Mollified(Expr):
    """
    f∗φ_l for an analytic f.

    Notes
    -----
    - ``moments`` asks its argument for ``terms`` extra orders in the same
      evaluation pass.
    - ``quadrature`` evaluates the argument separately at the shifted nodes
      and doubles the node count until the value settles to ``tol``.
    """

    __slots__ = ("arg", "l", "method", "terms", "quadrature_n", "tol", "_coeffs")

    def __init__(
        self,
        arg: Expr,
        l: Any,
        method: str,
        terms: int = 2,
        quadrature_n: int = DEFAULT_QUADRATURE_N,
        tol: Any = DEFAULT_TOL,
    ) -> None:
        _check_scale(l)
        if method not in ("quadrature", "moments"):
            raise ConfigurationError("Mollified needs quadrature or moments, got {0!r}".format(method))
        self.arg = arg
        self.l = l
        self.method = method
        self.terms = terms
        self.quadrature_n = quadrature_n
        self.tol = to_fraction(tol)
        self._coeffs: Dict[Tuple[int, str], Dict[Tuple[int, int], Any]] = {}

    def children_orders(self, order: int):
        if self.method == "moments":
            return ((self.arg, order + self.terms),)
        return ()

    def series(self, ev: Any, order: int) -> Series:
        if self.method == "moments":
            return self._moment_series(ev, order)
        return self._quadrature_series(ev, order)

    # ----- moments -----

    def _moment_coefficients(self, ev: Any) -> Dict[Tuple[int, int], Any]:
        key = (ev.ctx.digits, ev.bk.name)
        if key not in self._coeffs:
            ctx = ev.ctx
            out = {}
            with ctx.workdps():
                lm = to_mpf(self.l)
                for n in range(0, self.terms + 1, 2):
                    for i in range(0, n + 1, 2):
                        j = n - i
                        c = lm ** n * kernel_moment(i, j, ctx) / (math.factorial(i) * math.factorial(j))
                        out[(i, j)] = ev.bk.const(c)
            self._coeffs[key] = out
        return self._coeffs[key]

    def _moment_series(self, ev: Any, order: int) -> Series:
        s = ev.get(self.arg)
        out: Optional[Series] = None
        for (i, j), c in self._moment_coefficients(ev).items():
            term = s.shifted(i, j).truncate(order)
            if (i, j) != (0, 0):
                term = term.scale(c)
            out = term if out is None else out.add(term)
        return out.truncate(order)

    # ----- quadrature -----

    def _nodes(self, ev: Any, n: int) -> Tuple[List[Any], List[Any], List[Any]]:
        """Midpoint nodes of [−l, l]² inside the support, with weights φ_l(y)·(2l/n)²."""
        ctx = ev.ctx
        with ctx.workdps():
            lm = to_mpf(self.l)
            step = 2 * lm / n
            A = kernel_constant(ctx)
            y1: List[Any] = []
            y2: List[Any] = []
            wts: List[Any] = []
            for a in range(n):
                ua = -1 + (2 * mpmath.mpf(a) + 1) / n
                for b in range(n):
                    ub = -1 + (2 * mpmath.mpf(b) + 1) / n
                    r2 = ua * ua + ub * ub
                    if r2 >= 1:
                        continue
                    y1.append(ua * lm)
                    y2.append(ub * lm)
                    wts.append(mpmath.exp(-1 / (1 - r2)) / (A * lm * lm) * step * step)
        if ctx.is_double:
            return [float(v) for v in y1], [float(v) for v in y2], [float(v) for v in wts]
        return y1, y2, wts

    def _convolve(self, ev: Any, order: int, n: int) -> Dict[Tuple[int, int], Any]:
        y1, y2, wts = self._nodes(ev, n)
        if ev.ctx.is_double:
            return self._convolve_float(ev, order, np.asarray(y1), np.asarray(y2), np.asarray(wts))
        acc: Dict[Tuple[int, int], Any] = {}
        with ev.ctx.workdps():
            for a, b, wt in zip(y1, y2, wts):
                s = Evaluator(ev.ctx, ev.x - a, ev.y - b).run(self.arg, order)
                for key, c in s.terms.items():
                    acc[key] = acc.get(key, 0) + wt * c
        return acc

    def _convolve_float(
        self, ev: Any, order: int, y1: np.ndarray, y2: np.ndarray, wts: np.ndarray
    ) -> Dict[Tuple[int, int], Any]:
        xs = np.atleast_1d(np.asarray(ev.x, dtype=float))
        ys = np.atleast_1d(np.asarray(ev.y, dtype=float))
        count = len(xs)
        block = max(1, _BLOCK // max(1, count))
        acc: Dict[Tuple[int, int], np.ndarray] = {}
        for start in range(0, len(wts), block):
            b1, b2, bw = y1[start:start + block], y2[start:start + block], wts[start:start + block]
            px = (xs[:, None] - b1[None, :]).ravel()
            py = (ys[:, None] - b2[None, :]).ravel()
            s = Evaluator(ev.ctx, px, py).run(self.arg, order)
            for key, c in s.terms.items():
                vals = np.broadcast_to(np.asarray(c, dtype=float), px.shape).reshape(count, len(bw))
                part = vals @ bw
                acc[key] = acc[key] + part if key in acc else part
        return acc

    def _quadrature_series(self, ev: Any, order: int) -> Series:
        n = self.quadrature_n
        previous = self._convolve(ev, order, n)
        for _ in range(MAX_DOUBLINGS):
            n *= 2
            current = self._convolve(ev, order, n)
            if _settled(previous.get((0, 0), 0), current.get((0, 0), 0), self.tol, ev):
                return Series(order, current)
            previous = current
        raise QuadratureError(
            "mollification at l={0} did not settle to {1} with {2} nodes per side".format(
                self.l, float(self.tol), n
            )
        )


def _settled(a: Any, b: Any, tol: Fraction, ev: Any) -> bool:
    if ev.ctx.is_double:
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        return bool(np.all(np.abs(a - b) <= float(tol) * np.maximum(np.abs(a), np.abs(b))))
    with ev.ctx.workdps():
        return bool(abs(a - b) <= to_mpf(tol) * max(abs(a), abs(b)))


# ---------- mollifying fields ----------


def mollify(
    f: Any,
    l: Any,
    ctx: PrecisionContext,
    r: Any = None,
    method: str = "auto",
    quadrature_n: int = DEFAULT_QUADRATURE_N,
    tol: Any = DEFAULT_TOL,
) -> Any:
    """
    f∗φ_l on the domain shrunk by l.

    Analytic inputs (and SymMat/Vec2 of them) give lazy ``Mollified`` nodes;
    constants come back unchanged. A GridField gives the GridField of the
    direct discrete convolution on the nodes at distance >= l from the edge.

    Raises
    ------
    DomainError
        ``l`` outside (0, 1), or ``l >= r`` when the inset width r is given.
    """
    _check_scale(l)
    if r is not None and not l < r:
        raise DomainError("mollification scale {0} must be below the inset width {1}".format(l, r))
    if isinstance(f, SymMat):
        return f.map(lambda e: mollify(e, l, ctx, None, method, quadrature_n, tol))
    if isinstance(f, Vec2):
        return Vec2(*(mollify(e, l, ctx, None, method, quadrature_n, tol) for e in f))
    if isinstance(f, GridField):
        return mollify_grid(f, l)
    e = as_expr(f)
    if isinstance(e, Const):
        return e
    chosen = choose_method(l, ctx, method)
    terms = moment_order(l, ctx) if chosen == "moments" else 0
    return Mollified(e, l, chosen, terms, quadrature_n, tol)


def mollify_grid(g: GridField, l: Any) -> GridField:
    """Discrete convolution with φ_l sampled at the grid nodes, weights normalized to sum 1."""
    l = to_fraction(l)
    h = g.h
    m = int(math.floor(l / h))
    if m < 2:
        raise GridTooSmallError("grid step {0} leaves fewer than 2 nodes per kernel radius {1}".format(h, l))
    offsets = np.arange(-m, m + 1) * float(h / l)
    ux, uy = np.meshgrid(offsets, offsets)
    r2 = ux * ux + uy * uy
    kernel = np.zeros_like(r2)
    inside = r2 < 1.0
    kernel[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
    kernel /= kernel.sum()
    rows, cols = g.shape
    if rows <= 2 * m or cols <= 2 * m:
        raise GridTooSmallError("grid of {0}x{1} nodes is narrower than the kernel".format(rows, cols))
    values = convolve2d(g.values, kernel, mode="valid")
    inset = m * h
    rect = Rect(g.rect.x_min + inset, g.rect.x_max - inset, g.rect.y_min + inset, g.rect.y_max - inset)
    return GridField(rect, h, values, g.origin_value)


# ---------- smoothing estimates ----------


def derivative_bound(l: Any, k: int, f_norm: Any, norms: Any = KERNEL_NORM_BOUNDS) -> Any:
    """‖∇^{k+j}(f∗φ_l)‖ <= ‖∇^kφ‖_{L¹} ‖∇^j f‖ / l^k, given ‖∇^j f‖."""
    return norms[k] * f_norm / l ** k


def smoothing_bounds(l: Any, hess_f: Any) -> Tuple[Any, Any, Any]:
    """Bounds of ‖f∗φ_l − f‖, ‖∇(f∗φ_l − f)‖ and ‖∇²(f∗φ_l − f)‖ from ‖∇²f‖."""
    return l * l * hess_f / 2, l * hess_f, 2 * hess_f


def holder_smoothing_bounds(l: Any, alpha: Any, seminorm: Any) -> Tuple[Any, Any]:
    """‖f∗φ_l − f‖ <= l^α[f]_α and ‖∇(f∗φ_l)‖ <= 3.1 l^{α−1}[f]_α."""
    return l ** alpha * seminorm, const_of(KERNEL_NORM_BOUNDS[1], _like(l)) * l ** (alpha - 1) * seminorm


def commutator_bounds(l: Any, alpha: Any, f_seminorm: Any, g_seminorm: Any) -> List[Any]:
    """Bounds of ‖∇^m((fg)∗φ_l − (f∗φ_l)(g∗φ_l))‖ for m = 0..3."""
    ctx = _like(l)
    prod = f_seminorm * g_seminorm
    return [const_of(c, ctx) * l ** (2 * alpha - m) * prod for m, c in enumerate(COMMUTATOR_CONSTANTS)]


def _like(value: Any) -> PrecisionContext:
    from .field import DOUBLE
    from .numeric import make_context

    if isinstance(value, mpmath.mpf):
        return make_context(max(16, mpmath.mp.dps - GUARD_DIGITS), 0)
    return DOUBLE
