from __future__ import annotations

from fractions import Fraction

import mpmath
import numpy as np
import pytest

from corrugator.core.expr import X, parse
from corrugator.core.field import Rect
from corrugator.core.numeric import (
    fraction_text,
    format_real,
    holder_seminorm_estimate,
    make_context,
    parse_real,
    sample_points,
    sup_norm_estimate,
    to_fraction,
    tolerance,
)
from corrugator.domain.errors import ConfigurationError, DomainError


def test_make_context_picks_backend():
    assert make_context(15, 0).is_double
    assert not make_context(16, 0).is_double


@pytest.mark.parametrize("digits, seed", [(14, 0), (30, -1), ("abc", 0)])
def test_make_context_rejects(digits, seed):
    with pytest.raises(ConfigurationError):
        make_context(digits, seed)


def test_floor_and_tolerance(mctx):
    assert mctx.floor == mpmath.mpf(10) ** -22
    assert tolerance(make_context(15, 0)) == 1e-9
    assert tolerance(mctx) == mpmath.mpf(10) ** -25


def test_to_fraction():
    assert to_fraction(0.1) == Fraction(1, 10)
    assert to_fraction("1e-19") == Fraction(1, 10 ** 19)
    assert to_fraction(mpmath.mpf(0.5)) == Fraction(1, 2)
    with pytest.raises(DomainError):
        to_fraction(float("nan"))
    with pytest.raises(DomainError):
        to_fraction(object())


@pytest.mark.parametrize(
    "value, text",
    [
        (Fraction(1, 8), "0.125"),
        (Fraction(-3, 2), "-1.5"),
        (Fraction(5), "5"),
        (Fraction(1, 10 ** 19), "0.0000000000000000001"),
        (Fraction(1, 3), "1/3"),
    ],
)
def test_fraction_text(value, text):
    assert fraction_text(value) == text


def test_format_real_float_round_trip(dctx):
    x = 1 / 3
    assert parse_real(format_real(x, dctx), dctx) == x


def test_parse_real_rejects_garbage(dctx):
    with pytest.raises(DomainError):
        parse_real("twelve", dctx)


@pytest.mark.parametrize("digits", [15, 30])
def test_samples_are_prefix_stable(digits, unit_square):
    ctx = make_context(digits, 42)
    small = sample_points(unit_square, 5, ctx)
    large = sample_points(unit_square, 12, ctx)
    for i in range(5):
        assert small.point(i) == large.point(i)


def test_samples_depend_on_seed_and_stream(unit_square):
    a = sample_points(unit_square, 4, make_context(15, 1))
    b = sample_points(unit_square, 4, make_context(15, 2))
    c = sample_points(unit_square, 4, make_context(15, 1), stream=3)
    assert not np.array_equal(a.xs, b.xs)
    assert not np.array_equal(a.xs, c.xs)


def test_samples_stay_in_rectangle(mctx):
    rect = Rect("0.9999999999999999999", "1", "-2", "-1")
    pts = sample_points(rect, 50, mctx)
    with mctx.workdps():
        lo = mpmath.mpf("0.9999999999999999999")
        assert all(lo <= x <= 1 for x in pts.xs)
        assert len(set(pts.xs)) == 50
    assert all(-2 <= y <= -1 for y in pts.ys)


def test_sample_points_needs_one(dctx, unit_square):
    with pytest.raises(ConfigurationError):
        sample_points(unit_square, 0, dctx)


def test_sup_norm_estimate_is_a_lower_bound(dctx):
    rect = Rect(-1, 2, 0, 1)
    est = sup_norm_estimate(X, rect, 500, dctx)
    assert 1.9 < est <= 2.0


def test_sup_norm_of_matrix_uses_frobenius(dctx, unit_square):
    from corrugator.core.field import SymMat

    est = sup_norm_estimate(SymMat(1, 1, 1), unit_square, 10, dctx)
    assert est == pytest.approx(2.0)


def test_holder_seminorm_of_linear_function(dctx, unit_square):
    # [x]_1 is 1; with beta = 1 every quotient is |dx|/|p - q| <= 1
    est = holder_seminorm_estimate(parse("x"), unit_square, 1, 400, dctx)
    assert 0.9 < est <= 1.0 + 1e-12


def test_holder_seminorm_of_constant_is_zero(dctx, unit_square):
    assert holder_seminorm_estimate(parse("3"), unit_square, Fraction(1, 2), 50, dctx) == 0.0


def test_mp_sup_norm_stays_below_true_sup(mctx, unit_square):
    hi = sup_norm_estimate(parse("sin(x) + y^2"), unit_square, 40, mctx)
    assert isinstance(hi, mpmath.mpf)
    assert 0 < hi <= mpmath.sin(1) + 1
