from __future__ import annotations

import math

import mpmath
import numpy as np
import pytest

from corrugator.core.expr import X, Y, eval_jet, parse, partials_on, sin, sqrt, to_text, values_on
from corrugator.core.expr.nodes import Pow
from corrugator.core.numeric import PointSet
from corrugator.domain.errors import (
    EvaluationError,
    ExprSyntaxError,
    SingularityError,
    UnknownIdentifierError,
)


def test_polynomial_jet(dctx):
    jet = eval_jet(parse("x^2*y"), (2, 3), 3, dctx)
    assert jet.value == 12
    assert jet.gradient == (12, 4)
    assert jet.hessian == (6, 4, 0)
    assert jet.third == (0, 2, 0, 0)
    assert jet.partial(1, 1) == 4


def test_jet_above_order_is_empty(dctx):
    jet = eval_jet(parse("x*y"), (1, 1), 1, dctx)
    assert jet.hessian == (None, None, None)
    with pytest.raises(ValueError):
        jet.partial(2, 0)
    with pytest.raises(ValueError):
        eval_jet(X, (0, 0), 4, dctx)


def test_precedence_and_unary_minus(dctx):
    assert eval_jet(parse("-x^2 + 2*3 - 4/2"), (3, 0), 0, dctx).value == -5
    assert eval_jet(parse("2*(x - y)*-1"), (5, 1), 0, dctx).value == -8
    assert eval_jet(parse("1.5e1 + .5"), (0, 0), 0, dctx).value == 15.5


def test_transcendental_jets(dctx):
    jet = eval_jet(parse("sin(x) + exp(y)"), (0, 0), 3, dctx)
    assert jet.value == pytest.approx(1.0)
    assert jet.gradient == pytest.approx((1.0, 1.0))
    assert jet.third[0] == pytest.approx(-1.0)
    assert jet.third[3] == pytest.approx(1.0)

    s = eval_jet(parse("sqrt(x)"), (4, 0), 2, dctx)
    assert s.value == pytest.approx(2.0)
    assert s.gradient[0] == pytest.approx(0.25)
    assert s.hessian[0] == pytest.approx(-1 / 32)

    c = eval_jet(parse("cos(pi*x)"), (0.5, 0), 1, dctx)
    assert c.value == pytest.approx(0.0, abs=1e-15)
    assert c.gradient[0] == pytest.approx(-math.pi)


def test_diff_node(dctx):
    jet = eval_jet(parse("diff(x^3*y, 1, 1)"), (2, 5), 1, dctx)
    assert jet.value == 12
    assert jet.gradient == (12, 0)


def test_quotient_jet(dctx):
    jet = eval_jet(parse("1/(1 + x)"), (1, 0), 2, dctx)
    assert jet.value == pytest.approx(0.5)
    assert jet.gradient[0] == pytest.approx(-0.25)
    assert jet.hessian[0] == pytest.approx(0.25)


def test_operators_build_trees(dctx):
    e = 3 * X ** 2 - Y / 2 + sin(X * Y)
    jet = eval_jet(e, (1, 0), 1, dctx)
    assert jet.value == pytest.approx(3.0)
    assert jet.gradient == pytest.approx((6.0, 0.5))


def test_extended_precision_jet(mctx):
    jet = eval_jet(parse("sin(pi*x)"), ("0.5", 0), 2, mctx)
    with mctx.workdps():
        assert isinstance(jet.value, mpmath.mpf)
        assert abs(jet.value - 1) < mpmath.mpf(10) ** -28
        assert abs(jet.gradient[0]) < mpmath.mpf(10) ** -28
        assert abs(jet.hessian[0] + mpmath.pi ** 2) < mpmath.mpf(10) ** -27


def test_sqrt_below_floor(dctx, mctx):
    with pytest.raises(SingularityError) as info:
        eval_jet(sqrt(X - 1), (0.5, 0), 0, dctx)
    assert info.value.point == (0.5, 0.0)
    with pytest.raises(SingularityError):
        eval_jet(sqrt(X, "0.1"), ("0.01", 0), 0, mctx)


def test_division_by_zero_is_an_evaluation_error(dctx, mctx):
    with pytest.raises(EvaluationError):
        eval_jet(parse("1/x"), (0, 0), 0, dctx)
    with pytest.raises(EvaluationError):
        eval_jet(parse("1/x"), (0, 0), 0, mctx)


def test_partials_on_batches(dctx):
    pts = PointSet.from_pairs([(0, 0), (1, 2), (3, -1)], dctx)
    out = partials_on(parse("x^2 + x*y"), pts, dctx, [(0, 0), (1, 0), (0, 1)])
    np.testing.assert_allclose(out[(0, 0)], [0, 3, 6])
    np.testing.assert_allclose(out[(1, 0)], [0, 4, 5])
    np.testing.assert_allclose(out[(0, 1)], [0, 1, 3])


def test_values_on_constant_broadcasts(dctx, mctx):
    pts = PointSet.from_pairs([(0, 0), (1, 1)], dctx)
    np.testing.assert_array_equal(values_on(parse("7"), pts, dctx), [7.0, 7.0])
    mpts = PointSet.from_pairs([(0, 0), (1, 1)], mctx)
    assert values_on(parse("x + 1"), mpts, mctx) == [1, 2]


def test_batch_error_names_failing_point(dctx):
    pts = PointSet.from_pairs([(4, 0), (1, 0), (-1, 0)], dctx)
    with pytest.raises(SingularityError) as info:
        values_on(sqrt(X), pts, dctx)
    assert info.value.point == (-1.0, 0.0)


def test_to_text_reparses(dctx):
    e = parse("-(x - 2)^3 / (1 + y^2) + diff(sin(x*y), 0, 1) - 0.25*pi")
    again = parse(to_text(e))
    for p in [(0.3, -0.7), (1.5, 2.0)]:
        assert eval_jet(again, p, 0, dctx).value == pytest.approx(eval_jet(e, p, 0, dctx).value)


@pytest.mark.parametrize("text", ["x +", "x ^ -1", "x^1.5", "(x", "x y", ""])
def test_syntax_errors(text):
    with pytest.raises(ExprSyntaxError):
        parse(text)


def test_syntax_error_offset():
    with pytest.raises(ExprSyntaxError) as info:
        parse("x + * y")
    assert info.value.offset >= 2


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifierError) as info:
        parse("x + foo")
    assert info.value.name == "foo"
    assert info.value.offset == 4


def test_non_string_is_a_syntax_error():
    with pytest.raises(ExprSyntaxError):
        parse(3)


def test_negative_exponent_is_refused():
    with pytest.raises(ValueError):
        Pow(X, -1)
