"""
The rank-one frame η₁ = (1,0), η₂ = (1,2)/√5, η₃ = (1,−2)/√5 of Sym(2).

Every operation works entrywise, so B may hold scalars (Fraction, mpf,
float, arrays), Exprs or GridFields.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Iterator, Tuple

import mpmath
import numpy as np

from ..domain.errors import PreconditionError
from .expr import X, Y, ZERO, as_expr, sqrt
from .field import GridField, SymMat, Vec2
from .numeric import to_mpf

# η_k in exact form: (p, q) / √n
FRAME: Tuple[Tuple[int, int, int], ...] = ((1, 0, 1), (1, 2, 5), (1, -2, 5))

# |φ_k| <= COEFFICIENT_BOUND·|B|
COEFFICIENT_BOUND = 5 * math.sqrt(3) / 8

# |B + α·S| <= SHIFT_NORM_BOUND·α whenever |B| <= α
SHIFT_NORM_BOUND = 5.15


def frame_vector(k: int) -> Tuple[Any, Any]:
    """η_k (k = 1, 2, 3) as an exact pair of expressions."""
    p, q, n = FRAME[k - 1]
    if n == 1:
        return as_expr(p), as_expr(q)
    root = sqrt(n)
    return as_expr(p) / root, as_expr(q) / root


def frame_vector_float(k: int) -> Tuple[float, float]:
    p, q, n = FRAME[k - 1]
    return p / math.sqrt(n), q / math.sqrt(n)


def frame_vector_mp(k: int) -> Tuple[mpmath.mpf, mpmath.mpf]:
    p, q, n = FRAME[k - 1]
    root = mpmath.sqrt(n)
    return mpmath.mpf(p) / root, mpmath.mpf(q) / root


def frame_matrix(k: int) -> SymMat:
    """η_k⊗η_k with rational entries."""
    p, q, n = FRAME[k - 1]
    return SymMat(Fraction(p * p, n), Fraction(p * q, n), Fraction(q * q, n))


@dataclass(frozen=True)
class Coefficients:
    phi1: Any
    phi2: Any
    phi3: Any

    def __iter__(self) -> Iterator[Any]:
        return iter((self.phi1, self.phi2, self.phi3))

    def __getitem__(self, k: int) -> Any:
        """φ_k for k = 1, 2, 3."""
        return (self.phi1, self.phi2, self.phi3)[k - 1]

    def total(self) -> Any:
        return self.phi1 + self.phi2 + self.phi3


def _times(value: Any, c: Fraction) -> Any:
    if isinstance(value, mpmath.mpf):
        return value * to_mpf(c)
    if isinstance(value, np.ndarray) and value.dtype == object:
        return value * to_mpf(c)
    if isinstance(value, (float, np.ndarray, np.floating, GridField)):
        return value * float(c)
    return value * c


def _plain(B: SymMat) -> SymMat:
    entries = list(B)
    if any(isinstance(b, mpmath.mpf) for b in entries):
        return B.map(lambda b: b if not isinstance(b, (int, Fraction)) else to_mpf(b))
    return B


def decompose(B: SymMat) -> Coefficients:
    """φ₁ = b₁₁ − b₂₂/4, φ₂ = ⅝(b₂₂ + 2b₁₂), φ₃ = ⅝(b₂₂ − 2b₁₂)."""
    B = _plain(B)
    phi1 = B.b11 - _times(B.b22, Fraction(1, 4))
    phi2 = _times(B.b22 + _times(B.b12, Fraction(2)), Fraction(5, 8))
    phi3 = _times(B.b22 - _times(B.b12, Fraction(2)), Fraction(5, 8))
    return Coefficients(phi1, phi2, phi3)


def recompose(c: Coefficients) -> SymMat:
    """Σ φ_k η_k⊗η_k."""
    phi1, phi2, phi3 = c
    if any(isinstance(p, mpmath.mpf) for p in c):
        phi1, phi2, phi3 = (to_mpf(p) if isinstance(p, (int, Fraction)) else p for p in c)
    plus = phi2 + phi3
    return SymMat(
        phi1 + _times(plus, Fraction(1, 5)),
        _times(phi2 - phi3, Fraction(2, 5)),
        _times(plus, Fraction(4, 5)),
    )


# ----- positivity shift -----


def shift_diagonal_float() -> Tuple[float, float]:
    r = math.sqrt(2)
    return (r + 9) / 4, r + 9 / 5


def shift_diagonal_mp() -> Tuple[mpmath.mpf, mpmath.mpf]:
    r = mpmath.sqrt(2)
    return (r + 9) / 4, r + mpmath.mpf(9) / 5


def shift_diagonal_expr() -> Tuple[Any, Any]:
    r = sqrt(2)
    return (r + 9) / 4, r + Fraction(9, 5)


def positivity_shift(B: SymMat, alpha: Any) -> SymMat:
    """
    B + α·diag((√2+9)/4, √2+9/5).

    For scalar B with |B| <= α every frame coefficient of the result is at
    least α/2 and its norm is at most 5.15α. Field-valued B is shifted
    without the check.
    """
    scalar = all(isinstance(b, (int, Fraction, float, mpmath.mpf)) for b in B)
    if not scalar:
        if any(isinstance(b, GridField) or isinstance(b, np.ndarray) for b in B):
            s1, s2 = shift_diagonal_float()
            return SymMat(B.b11 + float(alpha) * s1, B.b12, B.b22 + float(alpha) * s2)
        s1, s2 = shift_diagonal_expr()
        a = as_expr(alpha)
        return SymMat(a * s1 + B.b11, B.b12, a * s2 + B.b22)

    use_mp = any(isinstance(v, mpmath.mpf) for v in (*B, alpha)) or not any(
        isinstance(v, float) for v in (*B, alpha)
    )
    if use_mp:
        B = B.map(to_mpf)
        alpha = to_mpf(alpha)
        s1, s2 = shift_diagonal_mp()
    else:
        B = B.map(float)
        alpha = float(alpha)
        s1, s2 = shift_diagonal_float()
    norm = B.frobenius()
    if alpha < norm:
        raise PreconditionError(
            "positivity shift needs alpha >= |B|, got alpha={0} and |B|={1}".format(
                mpmath.nstr(alpha, 8) if use_mp else alpha,
                mpmath.nstr(norm, 8) if use_mp else norm,
            )
        )
    return SymMat(B.b11 + alpha * s1, B.b12, B.b22 + alpha * s2)


def w_shift_field(bound: Any) -> Vec2:
    """
    bound·((√2+9)/4·x, (√2+9/5)·y).

    Its symmetric gradient is bound times the shift diagonal, so replacing
    w by w − w_shift_field(bound) adds that multiple of the diagonal to the
    defect.
    """
    if bound < 0:
        raise PreconditionError("shift bound must be >= 0, got {0}".format(bound))
    if bound == 0:
        return Vec2(ZERO, ZERO)
    b = as_expr(bound)
    s1, s2 = shift_diagonal_expr()
    return Vec2(b * s1 * X, b * s2 * Y)
