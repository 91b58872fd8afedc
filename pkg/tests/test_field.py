from __future__ import annotations

from fractions import Fraction

import mpmath
import numpy as np
import pytest

from corrugator.core.expr import X, Y, eval_jet, parse, partials_on
from corrugator.core.field import (
    GridField,
    Rect,
    SymMat,
    Vec2,
    assemble_defect,
    fd_partial,
    grid_points,
    grid_shape,
    sample,
)
from corrugator.core.numeric import PointSet
from corrugator.domain.errors import ConfigurationError, DomainError, GridTooSmallError, ShapeError


class TestRect:
    def test_bounds_are_exact(self):
        r = Rect("0.1", "0.3", -1, 1)
        assert r.x_min == Fraction(1, 10)
        assert r.width == Fraction(1, 5)
        assert r.height == 2
        assert r.as_list() == ["1/10", "3/10", "-1", "1"]

    def test_degenerate(self):
        with pytest.raises(DomainError):
            Rect(1, 0, 0, 1)
        with pytest.raises(DomainError):
            Rect(0, 1, 2, 2)

    def test_parse(self):
        assert Rect.parse("-0.5, 0.5, 0, 1e-3") == Rect("-0.5", "0.5", 0, "0.001")
        with pytest.raises(ConfigurationError):
            Rect.parse("0,1,0")
        with pytest.raises(ConfigurationError):
            Rect.parse("a,b,c,d")

    def test_contains_and_expand(self, unit_square):
        inner = Rect("0.25", "0.75", "0.25", "0.75")
        assert unit_square.contains(inner)
        assert not inner.contains(unit_square)
        assert inner.expand("0.25") == unit_square
        assert unit_square.contains_origin()


def test_grid_shape():
    assert grid_shape(Rect(0, 1, 0, 2), "0.1") == (21, 11)
    with pytest.raises(DomainError):
        grid_shape(Rect(0, 1, 0, 2), 2)
    with pytest.raises(DomainError):
        grid_shape(Rect(0, 1, 0, 1), 0)


def test_grid_field_checks_shape(unit_square):
    with pytest.raises(ShapeError):
        GridField(unit_square, "0.5", np.zeros((2, 3)))


def test_sample_constant_keeps_origin(unit_square):
    g = sample(parse("3"), unit_square, "0.25")
    assert g.shape == (5, 5)
    assert not g.values.any()
    assert g.origin_value == 3
    assert g.sup_norm() == 3.0


def test_sample_double_is_row_major(dctx, unit_square):
    g = sample(X + 2 * Y, unit_square, "0.25", dctx)
    np.testing.assert_allclose(g.x_offsets, [0, 0.25, 0.5, 0.75, 1.0])
    assert g.values[0, 4] == pytest.approx(1.0)
    assert g.values[4, 0] == pytest.approx(2.0)


def test_sample_extended_is_relative_to_first_node(mctx, unit_square):
    g = sample(parse("1e20 + x"), unit_square, "0.5", mctx)
    with mctx.workdps():
        assert g.origin_value == mpmath.mpf(10) ** 20
    np.testing.assert_allclose(g.values[0], [0.0, 0.5, 1.0])
    np.testing.assert_allclose(g.values[:, 0], [0.0, 0.0, 0.0])


def test_sample_refuses_other_grid(unit_square):
    g = sample(X, unit_square, "0.25")
    assert sample(g, unit_square, "0.25") is g
    with pytest.raises(ShapeError):
        sample(g, unit_square, "0.5")


def test_grid_arithmetic(unit_square):
    g = sample(X, unit_square, "0.25")
    one = sample(parse("1"), unit_square, "0.25")
    np.testing.assert_allclose((g + one).absolute(), g.values + 1)
    np.testing.assert_allclose((g * g).absolute(), g.values ** 2)
    np.testing.assert_allclose((2 - g).absolute(), 2 - g.values)
    with pytest.raises(ShapeError):
        g + sample(X, unit_square, "0.5")


def test_fd_partial_is_exact_on_quartics():
    rect = Rect(0, 1, 0, 1)
    g = sample(X ** 3 + X * Y ** 2 + Y ** 4, rect, "0.1")
    gx = fd_partial(g, "x")
    gy = fd_partial(g, "y")
    xs = np.arange(11) * 0.1
    xx, yy = np.meshgrid(xs, xs)
    np.testing.assert_allclose(gx.values, 3 * xx ** 2 + yy ** 2, atol=1e-10)
    np.testing.assert_allclose(gy.values, 2 * xx * yy + 4 * yy ** 3, atol=1e-10)


def test_fd_partial_needs_five_points(unit_square):
    g = sample(X, unit_square, Fraction(1, 3))
    with pytest.raises(GridTooSmallError):
        fd_partial(g, "x")
    with pytest.raises(ValueError):
        fd_partial(sample(X, unit_square, "0.25"), "z")


def test_grid_components_interpolate(dctx, unit_square):
    g = sample(X + Y, unit_square, "0.25", dctx)
    pts = PointSet.from_pairs([(0.1, 0.2), (0.9, 0.35)], dctx)
    (vals,), weights = g.components_at(pts, dctx)
    np.testing.assert_allclose(vals, [0.3, 1.25])
    assert weights == (1,)


def test_symmat_scalars():
    m = SymMat(Fraction(3), Fraction(0), Fraction(4))
    assert m.frobenius() == 5
    assert SymMat(2.0, 1.0, 2.0).min_eigenvalue() == pytest.approx(1.0)
    assert SymMat(1.0, 1.0, 1.0).frobenius() == pytest.approx(2.0)
    assert m.trace() == 7
    assert list(m.scale(2)) == [6, 0, 8]


def test_analytic_defect(dctx):
    A = SymMat(Fraction(1), Fraction(0), Fraction(1))
    d = assemble_defect(A, X, Vec2(X * X / 2, parse("0")))
    d11 = eval_jet(d.matrix.b11, (1, 0), 0, dctx).value
    d12 = eval_jet(d.matrix.b12, (1, 0), 0, dctx).value
    d22 = eval_jet(d.matrix.b22, (1, 0), 0, dctx).value
    assert (d11, d12, d22) == pytest.approx((-0.5, 0.0, 1.0))


def test_sampled_defect(unit_square):
    A = SymMat(Fraction(1), Fraction(0), Fraction(1))
    v = sample(X, unit_square, "0.25")
    d = assemble_defect(A, v, Vec2(parse("0"), parse("0")))
    np.testing.assert_allclose(d.matrix.b11.absolute(), 0.5)
    np.testing.assert_allclose(d.matrix.b12.absolute(), 0.0, atol=1e-14)
    np.testing.assert_allclose(d.matrix.b22.absolute(), 1.0)


@pytest.mark.parametrize(
    "text",
    ["sin(3*x)*cos(2*y)", "exp(x*y) + x^3", "sqrt(1 + x^2 + y^2)", "x^5*y - y^4/(2 + x)"],
)
def test_fd_partial_agrees_with_ad(text, dctx):
    # h = 1e-3 nodes of a window away from the origin; both axes
    rect = Rect("0.2", "0.3", "-0.15", "-0.05")
    h = Fraction(1, 1000)
    e = parse(text)
    g = sample(e, rect, h, dctx)
    exact = partials_on(e, grid_points(rect, h, dctx), dctx, [(1, 0), (0, 1)])
    gx = fd_partial(g, "x").values.ravel()
    gy = fd_partial(g, "y").values.ravel()
    scale = 1 + np.hypot(exact[(1, 0)], exact[(0, 1)])
    assert np.max(np.abs(gx - exact[(1, 0)]) / scale) < 1e-6
    assert np.max(np.abs(gy - exact[(0, 1)]) / scale) < 1e-6
