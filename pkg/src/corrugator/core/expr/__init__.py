from .evaluate import Evaluator, Jet, eval_jet, partials_on, values_on
from .nodes import (
    ONE,
    PI,
    X,
    Y,
    ZERO,
    Const,
    Diff,
    Expr,
    as_expr,
    cos,
    dx,
    dy,
    exp,
    grad,
    is_zero,
    sin,
    sqrt,
)
from .parser import parse, to_text

__all__ = [
    "Const",
    "Diff",
    "Evaluator",
    "Expr",
    "Jet",
    "ONE",
    "PI",
    "X",
    "Y",
    "ZERO",
    "as_expr",
    "cos",
    "dx",
    "dy",
    "eval_jet",
    "exp",
    "grad",
    "is_zero",
    "parse",
    "partials_on",
    "sin",
    "sqrt",
    "to_text",
    "values_on",
]
