"""
Text form of expressions.

Grammar (``^`` takes non-negative integer exponents only, no implicit
multiplication)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | factor
    factor := base ('^' integer)?
    base   := number | 'x' | 'y' | 'pi'
            | func '(' expr ')'              func in sin, cos, exp, sqrt
            | 'diff' '(' expr ',' integer ',' integer ')'
            | '(' expr ')'
    number := digits ['.' digits] [('e' | 'E') ['+' | '-'] digits]
"""

from __future__ import annotations

from fractions import Fraction
from typing import Any, List, Tuple

import mpmath
import pyparsing as pp

from ...domain.errors import ExprSyntaxError, UnknownIdentifierError
from .nodes import (
    Add,
    Const,
    Diff,
    Div,
    Expr,
    Func,
    Mul,
    Neg,
    Pi,
    Pow,
    Sqrt,
    Sub,
    Var,
)

_FUNCTIONS = ("sin", "cos", "exp", "sqrt")


def _fold_left(tokens: List[Any]) -> Expr:
    out = tokens[0]
    for i in range(1, len(tokens), 2):
        op, rhs = tokens[i], tokens[i + 1]
        if op == "+":
            out = Add(out, rhs)
        elif op == "-":
            out = Sub(out, rhs)
        elif op == "*":
            out = Mul(out, rhs)
        else:
            out = Div(out, rhs)
    return out


class ExprParser:
    """pyparsing grammar for one thread; not reentrant."""

    def __init__(self) -> None:
        self._unknown: List[Tuple[str, int]] = []
        self._grammar = self._build()

    def _build(self) -> pp.ParserElement:
        LPAR = pp.Suppress("(")
        RPAR = pp.Suppress(")")
        COMMA = pp.Suppress(",")

        expr = pp.Forward()
        unary = pp.Forward()

        number = pp.Regex(r"(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?")
        number.set_parse_action(lambda t: Const(Fraction(t[0])))

        integer = pp.Word(pp.nums).set_parse_action(lambda t: int(t[0]))

        calls = []
        for name in _FUNCTIONS:
            call = pp.Keyword(name) + LPAR - expr + RPAR
            call.set_parse_action(self._make_call)
            calls.append(call)

        diff = pp.Keyword("diff") + LPAR - expr + COMMA + integer + COMMA + integer + RPAR
        diff.set_parse_action(lambda t: Diff(t[1], t[2], t[3]))

        ident = pp.Word(pp.alphas + "_", pp.alphanums + "_")
        ident.set_parse_action(self._resolve)

        group = LPAR - expr + RPAR
        base = number | pp.MatchFirst(calls) | diff | ident | group

        factor = base + pp.Optional(pp.Suppress("^") - integer)
        factor.set_parse_action(lambda t: Pow(t[0], t[1]) if len(t) == 2 else t[0])

        negated = pp.Suppress("-") + unary
        negated.set_parse_action(lambda t: Neg(t[0]))
        unary <<= negated | factor

        term = unary + pp.ZeroOrMore(pp.one_of("* /") - unary)
        term.set_parse_action(lambda t: _fold_left(list(t)))

        expr <<= term + pp.ZeroOrMore(pp.one_of("+ -") - term)
        expr.set_parse_action(lambda t: _fold_left(list(t)))
        return expr

    @staticmethod
    def _make_call(tokens: Any) -> Expr:
        name, arg = tokens[0], tokens[1]
        if name == "sqrt":
            return Sqrt(arg)
        return Func(name, arg)

    def _resolve(self, s: str, loc: int, tokens: Any) -> Expr:
        name = tokens[0]
        if name in ("x", "y"):
            return Var(name)
        if name == "pi":
            return Pi()
        self._unknown.append((name, loc))
        return Const(Fraction(0))

    def parse(self, text: str) -> Expr:
        self._unknown = []
        try:
            result = self._grammar.parse_string(text, parse_all=True)
        except pp.ParseBaseException as exc:
            for name, loc in self._unknown:
                if loc <= exc.loc:
                    raise UnknownIdentifierError(name, loc) from None
            raise ExprSyntaxError(text, exc.loc, exc.msg) from None
        if self._unknown:
            name, loc = self._unknown[0]
            raise UnknownIdentifierError(name, loc)
        return result[0]


def parse(text: str) -> Expr:
    """Parse ``text`` into an expression tree."""
    if not isinstance(text, str):
        raise ExprSyntaxError(repr(text), 0, "expression text must be a string")
    return ExprParser().parse(text)


# ----- printing -----


def _number_text(value: Any) -> str:
    if isinstance(value, mpmath.mpf):
        from ..numeric import to_fraction

        value = to_fraction(value)
    value = Fraction(value)
    if value.denominator == 1:
        text = str(abs(value.numerator))
    else:
        text = "({0}/{1})".format(abs(value.numerator), value.denominator)
    return "(-{0})".format(text) if value < 0 else text


def to_text(e: Expr) -> str:
    """Text the parser reads back into an equivalent tree; sqrt floors are not kept."""
    if isinstance(e, Const):
        return _number_text(e.value)
    if isinstance(e, Pi):
        return "pi"
    if isinstance(e, Var):
        return e.name
    if isinstance(e, (Add, Sub, Mul, Div)):
        op = {Add: "+", Sub: "-", Mul: "*", Div: "/"}[type(e)]
        return "({0} {1} {2})".format(to_text(e.left), op, to_text(e.right))
    if isinstance(e, Neg):
        return "(-{0})".format(to_text(e.arg))
    if isinstance(e, Pow):
        return "({0})^{1}".format(to_text(e.base), e.exponent)
    if isinstance(e, Func):
        return "{0}({1})".format(e.name, to_text(e.arg))
    if isinstance(e, Sqrt):
        return "sqrt({0})".format(to_text(e.arg))
    if isinstance(e, Diff):
        return "diff({0}, {1}, {2})".format(to_text(e.arg), e.dx, e.dy)
    return "<{0}>".format(type(e).__name__)
