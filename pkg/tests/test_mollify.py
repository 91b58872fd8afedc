from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest

from corrugator.core.expr import X, Y, cos, eval_jet, parse, partials_on, sin, values_on
from corrugator.core.field import Rect, SymMat, sample
from corrugator.core.numeric import sample_points
from corrugator.core.mollify import (
    Mollified,
    choose_method,
    commutator_bounds,
    derivative_bound,
    holder_smoothing_bounds,
    kernel_constant,
    kernel_moment,
    kernel_norms,
    kernel_value,
    mollify,
    mollify_grid,
    moment_order,
    smoothing_bounds,
)
from corrugator.domain.errors import ConfigurationError, DomainError, GridTooSmallError


def test_kernel_constant(dctx, mctx):
    assert float(kernel_constant(dctx)) == pytest.approx(0.4665119, abs=1e-6)
    assert abs(kernel_constant(mctx) - kernel_constant(dctx)) < 1e-15


def test_kernel_value(dctx):
    A = float(kernel_constant(dctx))
    l = 0.5
    assert kernel_value((0, 0), l, dctx) == pytest.approx(math.exp(-1) / A / l ** 2)
    assert kernel_value((0.5, 0), l, dctx) == 0.0
    assert kernel_value((0.4, 0.4), l, dctx) == 0.0
    with pytest.raises(DomainError):
        kernel_value((0, 0), 1, dctx)


def test_kernel_norms():
    norms = kernel_norms()
    assert norms[0] == pytest.approx(1.0, abs=1e-7)
    assert norms[1] <= 3.1
    assert 13 <= norms[2] <= 17
    assert 150 <= norms[3] <= 260
    assert len(norms.values) == 4
    with pytest.raises(ConfigurationError):
        kernel_norms(quadrature_n=10)


def test_kernel_moments(dctx):
    assert float(kernel_moment(0, 0, dctx)) == pytest.approx(1.0, abs=1e-12)
    assert kernel_moment(1, 0, dctx) == 0
    assert kernel_moment(2, 1, dctx) == 0
    mu20 = kernel_moment(2, 0, dctx)
    assert mu20 == kernel_moment(0, 2, dctx)
    assert 0 < mu20 < 0.25


def test_moment_order_and_method(dctx):
    assert moment_order(Fraction(1, 1000), dctx) == 6
    assert choose_method(Fraction(1, 1000), dctx) == "moments"
    assert choose_method(Fraction(1, 10), dctx) == "quadrature"
    assert choose_method(Fraction(1, 10), dctx, "moments") == "moments"
    with pytest.raises(ConfigurationError):
        choose_method(Fraction(1, 10), dctx, "fft")


def test_mollify_by_moments(dctx):
    l = Fraction(1, 1000)
    m = mollify(X * X, l, dctx)
    assert isinstance(m, Mollified) and m.method == "moments"
    mu20 = float(kernel_moment(2, 0, dctx))
    jet = eval_jet(m, (0.3, 0), 1, dctx)
    assert jet.value == pytest.approx(0.09 + 1e-6 * mu20, rel=1e-12)
    assert jet.gradient[0] == pytest.approx(0.6)


def test_mollify_by_quadrature(dctx):
    l = Fraction(1, 10)
    m = mollify(X * X + Y, l, dctx, method="quadrature")
    mu20 = float(kernel_moment(2, 0, dctx))
    assert eval_jet(m, (0.3, 0.2), 0, dctx).value == pytest.approx(0.29 + 0.01 * mu20, rel=1e-6)


def test_mollify_structures(dctx):
    c = parse("5")
    assert mollify(c, Fraction(1, 100), dctx) is c
    out = mollify(SymMat(X, c, Y), Fraction(1, 100), dctx)
    assert isinstance(out.b11, Mollified) and out.b12 is c
    with pytest.raises(DomainError):
        mollify(X, Fraction(1, 2), dctx, r=Fraction(2, 5))
    with pytest.raises(DomainError):
        mollify(X, 1, dctx)


def test_mollify_grid_preserves_linear_fields(dctx, unit_square):
    g = sample(X + 2 * Y, unit_square, Fraction(1, 100))
    out = mollify_grid(g, Fraction(1, 20))
    assert out.rect == Rect("0.05", "0.95", "0.05", "0.95")
    assert out.shape == (91, 91)
    xx, yy = np.meshgrid(0.05 + out.x_offsets, 0.05 + out.y_offsets)
    np.testing.assert_allclose(out.absolute(), xx + 2 * yy, atol=1e-12)
    assert mollify(g, Fraction(1, 20), dctx).shape == (91, 91)


def test_mollify_grid_needs_resolution(unit_square):
    g = sample(X, unit_square, Fraction(1, 100))
    with pytest.raises(GridTooSmallError):
        mollify_grid(g, Fraction(1, 100))


def test_smoothing_estimates():
    assert smoothing_bounds(0.1, 2.0) == pytest.approx((0.01, 0.2, 4.0))
    assert float(derivative_bound(0.1, 1, 2.0)) == pytest.approx(62.0)
    bounds = commutator_bounds(0.1, 0.5, 1.0, 1.0)
    assert bounds == pytest.approx([0.2, 9.3, 670.0, 92580.0])


def test_holder_smoothing_estimates():
    assert holder_smoothing_bounds(0.01, 0.5, 2.0) == pytest.approx((0.2, 62.0))


SQUARE = Rect(-1, 1, -1, 1)
FINE = Fraction(1, 100)


def _grad(e, pts, ctx):
    d = partials_on(e, pts, ctx, [(1, 0), (0, 1)])
    return np.hypot(d[(1, 0)], d[(0, 1)])


def _commutator(f, g, l, ctx, **kw):
    return mollify(f * g, l, ctx, **kw) - mollify(f, l, ctx, **kw) * mollify(g, l, ctx, **kw)


def test_measured_smoothing_error(dctx):
    # sin(3x)cos(2y): |∇f| <= sqrt(13), |∇²f| <= 13
    f = sin(3 * X) * cos(2 * Y)
    m = mollify(f, FINE, dctx, method="moments")
    pts = sample_points(SQUARE, 200, dctx)
    diff = m - f
    value_bound, grad_bound, _ = smoothing_bounds(float(FINE), 13.0)
    assert np.max(np.abs(values_on(diff, pts, dctx))) <= value_bound
    assert np.max(_grad(diff, pts, dctx)) <= grad_bound
    assert np.max(_grad(m, pts, dctx)) <= float(derivative_bound(FINE, 0, 13 ** 0.5))


def test_mollify_is_linear_and_keeps_sign(dctx):
    f, g = sin(X) * Y, cos(X + Y)
    pts = sample_points(SQUARE, 100, dctx)
    both = values_on(mollify(2 * f + 3 * g, FINE, dctx, method="moments"), pts, dctx)
    mf, mg = (mollify(e, FINE, dctx, method="moments") for e in (f, g))
    each = values_on(2 * mf + 3 * mg, pts, dctx)
    np.testing.assert_allclose(both, each, rtol=1e-10, atol=1e-13)
    square = values_on(mollify((X - Y) ** 2, FINE, dctx, method="moments"), pts, dctx)
    xs, ys = np.asarray(pts.xs, dtype=float), np.asarray(pts.ys, dtype=float)
    mu = 2 * float(kernel_moment(2, 0, dctx)) * float(FINE) ** 2
    np.testing.assert_allclose(square, (xs - ys) ** 2 + mu, rtol=1e-10, atol=1e-14)
    assert square.min() > 0


def test_measured_commutator(dctx):
    # [sin x]_1 = 1, [cos 2y + x]_1 = sqrt(5)
    f, g = sin(X), cos(2 * Y) + X
    c = _commutator(f, g, FINE, dctx, method="moments")
    pts = sample_points(SQUARE, 200, dctx)
    bounds = commutator_bounds(float(FINE), 1.0, 1.0, 5 ** 0.5)
    assert np.max(np.abs(values_on(c, pts, dctx))) <= bounds[0]
    assert np.max(_grad(c, pts, dctx)) <= bounds[1]


@pytest.mark.slow
def test_measured_commutator_by_quadrature(dctx):
    l = Fraction(1, 20)
    c = _commutator(sin(X), cos(2 * Y) + X, l, dctx, method="quadrature")
    pts = sample_points(Rect("-0.5", "0.5", "-0.5", "0.5"), 5, dctx)
    bound = commutator_bounds(float(l), 1.0, 1.0, 5 ** 0.5)[0]
    assert np.max(np.abs(values_on(c, pts, dctx))) <= bound
