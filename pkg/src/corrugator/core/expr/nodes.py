"""
Expression trees over (x, y).

Nodes are immutable; identity is object identity, so a subtree shared by
several parents is evaluated once per evaluation pass.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Any, Iterable, Tuple

import mpmath

from ...domain.errors import SingularityError
from .series import (
    Series,
    cos_coefficients,
    exp_coefficients,
    reciprocal_coefficients,
    sin_coefficients,
    sqrt_coefficients,
)


class Expr:
    __slots__ = ()

    # ----- evaluation protocol -----

    def children_orders(self, order: int) -> Iterable[Tuple["Expr", int]]:
        """Children evaluated in the same pass, with the order each one needs."""
        return ()

    def series(self, ev: Any, order: int) -> Series:
        raise NotImplementedError

    # ----- sampling protocol (see numeric.sup_norm_estimate) -----

    def components_at(self, points: Any, ctx: Any):
        from .evaluate import values_on

        return [values_on(self, points, ctx)], (1,)

    # ----- operators -----

    def __add__(self, other: Any) -> "Expr":
        return Add(self, as_expr(other))

    def __radd__(self, other: Any) -> "Expr":
        return Add(as_expr(other), self)

    def __sub__(self, other: Any) -> "Expr":
        return Sub(self, as_expr(other))

    def __rsub__(self, other: Any) -> "Expr":
        return Sub(as_expr(other), self)

    def __mul__(self, other: Any) -> "Expr":
        return Mul(self, as_expr(other))

    def __rmul__(self, other: Any) -> "Expr":
        return Mul(as_expr(other), self)

    def __truediv__(self, other: Any) -> "Expr":
        return Div(self, as_expr(other))

    def __rtruediv__(self, other: Any) -> "Expr":
        return Div(as_expr(other), self)

    def __neg__(self) -> "Expr":
        return Neg(self)

    def __pow__(self, n: int) -> "Expr":
        return Pow(self, n)

    def __repr__(self) -> str:
        from .parser import to_text

        return "Expr({0})".format(to_text(self))


def as_expr(value: Any) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not expressions")
    if isinstance(value, (int, Fraction)):
        return Const(Fraction(value))
    if isinstance(value, str):
        return Const(Fraction(value))
    if isinstance(value, float):
        return Const(Fraction(repr(value)))
    if isinstance(value, mpmath.mpf):
        return Const(value)
    raise TypeError("cannot use {0!r} in an expression".format(value))


def is_zero(e: Any) -> bool:
    if isinstance(e, Const):
        return e.value == 0
    return not isinstance(e, Expr) and e == 0


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value: Any) -> None:
        self.value = value

    def series(self, ev: Any, order: int) -> Series:
        return Series.constant(ev.bk.const(self.value), order)


class Pi(Expr):
    __slots__ = ()

    def series(self, ev: Any, order: int) -> Series:
        return Series.constant(ev.bk.pi, order)


class Var(Expr):
    __slots__ = ("name",)

    def __init__(self, name: str) -> None:
        if name not in ("x", "y"):
            raise ValueError("variables are x and y, got {0!r}".format(name))
        self.name = name

    def series(self, ev: Any, order: int) -> Series:
        if self.name == "x":
            return Series.variable(ev.x, 0, order)
        return Series.variable(ev.y, 1, order)


class _Binary(Expr):
    __slots__ = ("left", "right")

    def __init__(self, left: Expr, right: Expr) -> None:
        self.left = left
        self.right = right

    def children_orders(self, order: int):
        return ((self.left, order), (self.right, order))


class Add(_Binary):
    __slots__ = ()

    def series(self, ev, order):
        return ev.get(self.left).add(ev.get(self.right)).truncate(order)


class Sub(_Binary):
    __slots__ = ()

    def series(self, ev, order):
        return ev.get(self.left).sub(ev.get(self.right)).truncate(order)


class Mul(_Binary):
    __slots__ = ()

    def series(self, ev, order):
        return ev.get(self.left).truncate(order).mul(ev.get(self.right).truncate(order))


class Div(_Binary):
    __slots__ = ()

    def series(self, ev, order):
        num = ev.get(self.left).truncate(order)
        den = ev.get(self.right).truncate(order)
        if den.is_constant():
            return num.scale(1 / den.value)
        return num.mul(den.compose(reciprocal_coefficients(ev.bk, den.value, order)))


class Neg(Expr):
    __slots__ = ("arg",)

    def __init__(self, arg: Expr) -> None:
        self.arg = arg

    def children_orders(self, order):
        return ((self.arg, order),)

    def series(self, ev, order):
        return ev.get(self.arg).truncate(order).neg()


class Pow(Expr):
    __slots__ = ("base", "exponent")

    def __init__(self, base: Expr, exponent: int) -> None:
        if isinstance(exponent, bool) or not isinstance(exponent, int) or exponent < 0:
            raise ValueError("exponents are non-negative integers, got {0!r}".format(exponent))
        self.base = base
        self.exponent = exponent

    def children_orders(self, order):
        return ((self.base, order),)

    def series(self, ev, order):
        return ev.get(self.base).truncate(order).power(self.exponent)


_FUNCTIONS = {
    "sin": sin_coefficients,
    "cos": cos_coefficients,
    "exp": exp_coefficients,
}


class Func(Expr):
    __slots__ = ("name", "arg")

    def __init__(self, name: str, arg: Expr) -> None:
        if name not in _FUNCTIONS:
            raise ValueError("unknown function {0!r}".format(name))
        self.name = name
        self.arg = arg

    def children_orders(self, order):
        return ((self.arg, order),)

    def series(self, ev, order):
        inner = ev.get(self.arg).truncate(order)
        return inner.compose(_FUNCTIONS[self.name](ev.bk, inner.value, order))


class Sqrt(Expr):
    """√arg; evaluation with arg below ``floor`` (or <= 0 for a zero floor) is an error."""

    __slots__ = ("arg", "floor")

    def __init__(self, arg: Expr, floor: Any = 0) -> None:
        self.arg = arg
        self.floor = floor

    def children_orders(self, order):
        return ((self.arg, order),)

    def series(self, ev, order):
        inner = ev.get(self.arg).truncate(order)
        floor = ev.bk.const(self.floor)
        if ev.bk.below(inner.value, floor):
            idx = ev.bk.first_below(inner.value, floor)
            raise SingularityError(
                "sqrt argument below floor {0}".format(self.floor), ev.point_at(idx)
            )
        return inner.compose(sqrt_coefficients(ev.bk, inner.value, order))


class Diff(Expr):
    """∂x^dx ∂y^dy of the argument."""

    __slots__ = ("arg", "dx", "dy")

    def __init__(self, arg: Expr, dx: int, dy: int) -> None:
        if dx < 0 or dy < 0:
            raise ValueError("derivative orders must be non-negative")
        self.arg = arg
        self.dx = dx
        self.dy = dy

    def children_orders(self, order):
        return ((self.arg, order + self.dx + self.dy),)

    def series(self, ev, order):
        return ev.get(self.arg).shifted(self.dx, self.dy).truncate(order)


X = Var("x")
Y = Var("y")
PI = Pi()
ZERO = Const(Fraction(0))
ONE = Const(Fraction(1))


def sin(e: Any) -> Expr:
    return Func("sin", as_expr(e))


def cos(e: Any) -> Expr:
    return Func("cos", as_expr(e))


def exp(e: Any) -> Expr:
    return Func("exp", as_expr(e))


def sqrt(e: Any, floor: Any = 0) -> Expr:
    return Sqrt(as_expr(e), floor)


def dx(e: Expr, n: int = 1) -> Expr:
    return Diff(e, n, 0)


def dy(e: Expr, n: int = 1) -> Expr:
    return Diff(e, 0, n)


def grad(e: Expr) -> Tuple[Expr, Expr]:
    return Diff(e, 1, 0), Diff(e, 0, 1)
