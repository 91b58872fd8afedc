"""Truncated bivariate Taylor series, the arithmetic behind every jet."""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Any, Dict, List, Tuple

Key = Tuple[int, int]


def _falling(n: int, k: int) -> int:
    out = 1
    for i in range(k):
        out *= n - i
    return out


class Series:
    """
    f(p + h) = Σ c_ij h_x^i h_y^j for i + j <= order.

    Coefficients are mpf scalars or float64 arrays over a batch of points;
    absent keys are zero.
    """

    __slots__ = ("order", "terms")

    def __init__(self, order: int, terms: Dict[Key, Any]) -> None:
        self.order = order
        self.terms = terms

    @staticmethod
    def constant(value: Any, order: int) -> "Series":
        return Series(order, {(0, 0): value})

    @staticmethod
    def variable(value: Any, axis: int, order: int) -> "Series":
        terms = {(0, 0): value}
        if order >= 1:
            terms[(1, 0) if axis == 0 else (0, 1)] = 1
        return Series(order, terms)

    @property
    def value(self) -> Any:
        return self.terms.get((0, 0), 0)

    def is_constant(self) -> bool:
        return all(key == (0, 0) for key in self.terms)

    def coefficient(self, i: int, j: int) -> Any:
        return self.terms.get((i, j), 0)

    def partial(self, i: int, j: int) -> Any:
        """∂x^i ∂y^j f at the expansion point."""
        c = self.terms.get((i, j), 0)
        return c * (math.factorial(i) * math.factorial(j))

    def truncate(self, order: int) -> "Series":
        if order >= self.order:
            return self
        return Series(order, {k: c for k, c in self.terms.items() if k[0] + k[1] <= order})

    # ----- ring operations -----

    def add(self, other: "Series") -> "Series":
        order = min(self.order, other.order)
        out = {k: c for k, c in self.terms.items() if k[0] + k[1] <= order}
        for k, c in other.terms.items():
            if k[0] + k[1] > order:
                continue
            out[k] = out[k] + c if k in out else c
        return Series(order, out)

    def neg(self) -> "Series":
        return Series(self.order, {k: -c for k, c in self.terms.items()})

    def sub(self, other: "Series") -> "Series":
        return self.add(other.neg())

    def scale(self, factor: Any) -> "Series":
        return Series(self.order, {k: c * factor for k, c in self.terms.items()})

    def add_constant(self, value: Any) -> "Series":
        out = dict(self.terms)
        out[(0, 0)] = out[(0, 0)] + value if (0, 0) in out else value
        return Series(self.order, out)

    def mul(self, other: "Series") -> "Series":
        order = min(self.order, other.order)
        if other.is_constant():
            return self.truncate(order).scale(other.value)
        if self.is_constant():
            return other.truncate(order).scale(self.value)
        out: Dict[Key, Any] = {}
        for (a, b), fa in self.terms.items():
            if a + b > order:
                continue
            for (c, d), gb in other.terms.items():
                if a + b + c + d > order:
                    continue
                key = (a + c, b + d)
                prod = fa * gb
                out[key] = out[key] + prod if key in out else prod
        return Series(order, out)

    def power(self, n: int) -> "Series":
        result = Series.constant(1, self.order)
        base = self
        while n:
            if n & 1:
                result = result.mul(base)
            n >>= 1
            if n:
                base = base.mul(base)
        return result

    def compose(self, coeffs: List[Any]) -> "Series":
        """g(f) from the Taylor coefficients g^{(m)}(f0)/m! of g at f0 (Horner form)."""
        u = Series(self.order, {k: c for k, c in self.terms.items() if k != (0, 0)})
        result = Series.constant(coeffs[-1], self.order)
        for c in reversed(coeffs[:-1]):
            result = result.mul(u).add_constant(c)
        return result

    def shifted(self, i: int, j: int) -> "Series":
        """Series of ∂x^i ∂y^j f, of order self.order − i − j."""
        order = self.order - i - j
        out = {}
        for (a, b), c in self.terms.items():
            if a >= i and b >= j and (a - i) + (b - j) <= order:
                out[(a - i, b - j)] = c * (_falling(a, i) * _falling(b, j))
        return Series(order, out)


# ----- univariate Taylor coefficients g^{(m)}(t)/m!, m = 0..order -----


def exp_coefficients(bk: Any, t: Any, order: int) -> List[Any]:
    e = bk.exp(t)
    return [e / math.factorial(m) for m in range(order + 1)]


def sin_coefficients(bk: Any, t: Any, order: int) -> List[Any]:
    s, c = bk.sin(t), bk.cos(t)
    cycle = (s, c, -s, -c)
    return [cycle[m % 4] / math.factorial(m) for m in range(order + 1)]


def cos_coefficients(bk: Any, t: Any, order: int) -> List[Any]:
    s, c = bk.sin(t), bk.cos(t)
    cycle = (c, -s, -c, s)
    return [cycle[m % 4] / math.factorial(m) for m in range(order + 1)]


def sqrt_coefficients(bk: Any, t: Any, order: int) -> List[Any]:
    r = bk.sqrt(t)
    out = []
    binom = Fraction(1)
    power = r
    for m in range(order + 1):
        out.append(bk.const(binom) * power)
        binom = binom * (Fraction(1, 2) - m) / (m + 1)
        power = power / t
    return out


def reciprocal_coefficients(bk: Any, t: Any, order: int) -> List[Any]:
    inv = 1 / t
    out = []
    power = inv
    for m in range(order + 1):
        out.append(power if m % 2 == 0 else -power)
        power = power * inv
    return out
