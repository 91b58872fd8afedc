from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Iterator, List, Sequence, Tuple, Union

import mpmath
import numpy as np

from ..domain.errors import ConfigurationError, DomainError

# Digits below which nothing is allowed, and the digit count that selects the
# float64 ("double path") backend instead of mpmath.
MIN_DIGITS = 15
DOUBLE_DIGITS = 15

# Extra working digits carried by mpmath on top of the requested ones.
GUARD_DIGITS = 5

DEFAULT_SAMPLE_COUNT = 1000

Number = Union[int, Fraction, float, "mpmath.mpf"]


@dataclass(frozen=True)
class PrecisionContext:
    """
    Working precision and the seed of every random sample set.

    Notes
    -----
    - ``digits == 15`` selects numpy float64 evaluation; anything above uses
      mpmath with ``digits + GUARD_DIGITS`` working digits.
    - Contexts are plain values; equal contexts reproduce equal samples.
    """

    digits: int
    rng_seed: int

    @property
    def is_double(self) -> bool:
        return self.digits <= DOUBLE_DIGITS

    def workdps(self):
        return mpmath.workdps(self.digits + GUARD_DIGITS)

    @property
    def floor(self) -> mpmath.mpf:
        """Magnitude below which a defect is treated as numerically zero."""
        return mpmath.mpf(10) ** (-(self.digits - 8))


def make_context(digits: int, seed: int) -> PrecisionContext:
    try:
        digits = int(digits)
        seed = int(seed)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(
            "precision digits and seed must be integers, got {0!r}, {1!r}".format(digits, seed)
        ) from exc
    if digits < MIN_DIGITS:
        raise ConfigurationError(
            "precision.digits must be >= {0}, got {1}".format(MIN_DIGITS, digits)
        )
    if not 0 <= seed < 2 ** 64:
        raise ConfigurationError("precision.seed must fit in 64 unsigned bits, got {0}".format(seed))
    return PrecisionContext(digits=digits, rng_seed=seed)


def to_mpf(value: Any) -> mpmath.mpf:
    """Exact conversion of ints, Fractions and decimal strings at the current precision."""
    if isinstance(value, Fraction):
        return mpmath.mpf(value.numerator) / value.denominator
    if isinstance(value, str):
        return to_mpf(Fraction(value))
    return mpmath.mpf(value)


def real(value: Any, ctx: PrecisionContext) -> mpmath.mpf:
    """An mpf at the context's precision; NaN and infinities are refused."""
    with ctx.workdps():
        out = to_mpf(value)
    if not mpmath.isfinite(out):
        raise DomainError("non-finite real: {0!r}".format(value))
    return out


def to_fraction(value: Any) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, str)):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise DomainError("non-finite real: {0!r}".format(value))
        return Fraction(repr(value))
    if isinstance(value, mpmath.mpf):
        if not mpmath.isfinite(value):
            raise DomainError("non-finite real: {0!r}".format(value))
        man, exp = value.man, value.exp
        return Fraction(int(man)) * (Fraction(2) ** int(exp))
    raise DomainError("cannot convert {0!r} to an exact real".format(value))


# ----- evaluation backends -----


class MpBackend:
    """Scalar mpmath arithmetic; one point at a time."""

    name = "mp"

    def const(self, value: Any):
        return to_mpf(value)

    @property
    def pi(self):
        return +mpmath.pi

    def sin(self, x):
        return mpmath.sin(x)

    def cos(self, x):
        return mpmath.cos(x)

    def exp(self, x):
        return mpmath.exp(x)

    def sqrt(self, x):
        return mpmath.sqrt(x)

    def fabs(self, x):
        return abs(x)

    def below(self, x, floor) -> bool:
        return bool(x < floor) if floor > 0 else bool(x <= 0)

    def first_below(self, x, floor) -> int:
        return 0

    def to_float(self, x):
        return float(x)


class FloatBackend:
    """numpy float64 arithmetic; values are arrays over a batch of points."""

    name = "float"

    def const(self, value: Any):
        if isinstance(value, Fraction):
            return value.numerator / value.denominator
        return float(value)

    @property
    def pi(self):
        return math.pi

    def sin(self, x):
        return np.sin(x)

    def cos(self, x):
        return np.cos(x)

    def exp(self, x):
        return np.exp(x)

    def sqrt(self, x):
        return np.sqrt(x)

    def fabs(self, x):
        return np.abs(x)

    def below(self, x, floor) -> bool:
        mask = x < floor if floor > 0 else x <= 0
        return bool(np.any(mask))

    def first_below(self, x, floor) -> int:
        mask = np.atleast_1d(x < floor if floor > 0 else x <= 0)
        return int(np.argmax(mask))

    def to_float(self, x):
        return np.asarray(x, dtype=float)


MP = MpBackend()
FLOAT = FloatBackend()


def backend_for(ctx: PrecisionContext):
    return FLOAT if ctx.is_double else MP


# ----- random sample points -----


@dataclass(frozen=True)
class PointSet:
    """
    Sample points in a rectangle.

    Double contexts keep float64 arrays; extended contexts keep tuples of mpf.
    """

    xs: Any
    ys: Any
    double: bool

    def __len__(self) -> int:
        return len(self.xs)

    def point(self, i: int) -> Tuple[Any, Any]:
        return self.xs[i], self.ys[i]

    def __iter__(self) -> Iterator[Tuple[Any, Any]]:
        return zip(self.xs, self.ys)

    @staticmethod
    def from_pairs(pairs: Sequence[Tuple[Any, Any]], ctx: PrecisionContext) -> "PointSet":
        if ctx.is_double:
            arr = np.asarray([(float(x), float(y)) for x, y in pairs], dtype=float).reshape(-1, 2)
            return PointSet(arr[:, 0], arr[:, 1], True)
        with ctx.workdps():
            xs = tuple(to_mpf(x) for x, _ in pairs)
            ys = tuple(to_mpf(y) for _, y in pairs)
        return PointSet(xs, ys, False)


def _words_per_coordinate(ctx: PrecisionContext) -> int:
    bits = (ctx.digits + GUARD_DIGITS) * math.log2(10)
    return max(1, int(math.ceil(bits / 64)))


def _raw_words(ctx: PrecisionContext, count: int, stream: int) -> np.ndarray:
    seq = np.random.SeedSequence(entropy=ctx.rng_seed, spawn_key=(stream,))
    gen = np.random.Philox(seq)
    return gen.random_raw(size=count)


def unit_samples(ctx: PrecisionContext, n: int, dims: int, stream: int = 0) -> List[List[Any]]:
    """
    n uniform draws in [0,1)^dims from the counter-based Philox stream.

    Sample i only depends on the first (i+1)*dims*words raw outputs, so a
    larger n extends the set without changing its prefix.
    """
    words = 1 if ctx.is_double else _words_per_coordinate(ctx)
    raw = _raw_words(ctx, n * dims * words, stream).reshape(n, dims, words)
    if ctx.is_double:
        return ((raw[:, :, 0] >> np.uint64(11)).astype(float) * 2.0 ** -53).tolist()
    out = []
    with ctx.workdps():
        scale = [mpmath.ldexp(1, -64 * (j + 1)) for j in range(words)]
        for i in range(n):
            row = []
            for d in range(dims):
                row.append(mpmath.fsum(int(raw[i, d, j]) * scale[j] for j in range(words)))
            out.append(row)
    return out


def sample_points(domain: Any, n: int, ctx: PrecisionContext, stream: int = 0) -> PointSet:
    """Uniform points in ``domain`` (any object with x_min/x_max/y_min/y_max)."""
    if n < 1:
        raise ConfigurationError("sample count must be >= 1, got {0}".format(n))
    unit = unit_samples(ctx, n, 2, stream)
    if ctx.is_double:
        u = np.asarray(unit, dtype=float).reshape(n, 2)
        x0, x1 = float(domain.x_min), float(domain.x_max)
        y0, y1 = float(domain.y_min), float(domain.y_max)
        return PointSet(x0 + (x1 - x0) * u[:, 0], y0 + (y1 - y0) * u[:, 1], True)
    with ctx.workdps():
        x0, x1 = to_mpf(domain.x_min), to_mpf(domain.x_max)
        y0, y1 = to_mpf(domain.y_min), to_mpf(domain.y_max)
        xs = tuple(x0 + (x1 - x0) * ux for ux, _ in unit)
        ys = tuple(y0 + (y1 - y0) * uy for _, uy in unit)
    return PointSet(xs, ys, False)


# ----- sup norms -----


def magnitudes(components: Sequence[Any], weights: Sequence[int], double: bool) -> Any:
    """Pointwise weighted Euclidean magnitude; weights of 2 count off-diagonals twice."""
    if double:
        acc = np.zeros_like(np.asarray(components[0], dtype=float))
        for comp, wt in zip(components, weights):
            c = np.asarray(comp, dtype=float)
            acc = acc + wt * c * c
        return np.sqrt(acc)
    out = []
    for values in zip(*components):
        out.append(mpmath.sqrt(mpmath.fsum(wt * c * c for c, wt in zip(values, weights))))
    return out


def max_of(values: Any) -> Any:
    if isinstance(values, np.ndarray) and values.dtype != object:
        return float(np.max(values))
    return max(values)


def min_of(values: Any) -> Any:
    if isinstance(values, np.ndarray) and values.dtype != object:
        return float(np.min(values))
    return min(values)



def sup_norm_estimate(f: Any, domain: Any, n: int, ctx: PrecisionContext) -> Any:
    """
    Maximum of |f| over n seeded uniform points of ``domain``.

    ``f`` is any sampleable field: an Expr, a GridField, a SymMat of those, or
    a vector pair. Matrix fields use the Frobenius norm.
    """
    from .field import as_sampleable

    points = sample_points(domain, n, ctx)
    sampled = as_sampleable(f)
    comps, weights = sampled.components_at(points, ctx)
    with ctx.workdps():
        return max_of(magnitudes(comps, weights, points.double))


def holder_seminorm_estimate(
    f: Any, domain: Any, beta: Any, n_pairs: int, ctx: PrecisionContext
) -> Any:
    """Largest sampled quotient |f(p) − f(q)| / |p − q|^β over n random pairs."""
    from .field import as_sampleable

    first = sample_points(domain, n_pairs, ctx, stream=11)
    second = sample_points(domain, n_pairs, ctx, stream=12)
    sampled = as_sampleable(f)
    a, weights = sampled.components_at(first, ctx)
    b, _ = sampled.components_at(second, ctx)
    with ctx.workdps():
        diffs = [
            np.asarray(ca, dtype=float) - np.asarray(cb, dtype=float) if first.double
            else [p - q for p, q in zip(ca, cb)]
            for ca, cb in zip(a, b)
        ]
        mags = magnitudes(diffs, weights, first.double)
        if first.double:
            dist = np.hypot(first.xs - second.xs, first.ys - second.ys)
            quot = np.where(dist > 0, mags / np.where(dist > 0, dist, 1.0) ** float(beta), 0.0)
            return float(np.max(quot))
        beta_mp = to_mpf(beta)
        best = mpmath.mpf(0)
        for m, (px, py), (qx, qy) in zip(mags, first, second):
            dist = mpmath.sqrt((px - qx) ** 2 + (py - qy) ** 2)
            if dist > 0:
                best = max(best, m / dist ** beta_mp)
        return best


# ----- pointwise arrays -----
#
# Pointwise bound arithmetic runs on float64 arrays (double path) or numpy
# object arrays of mpf (extended path, inside ctx.workdps()).


def as_array(values: Any, ctx: PrecisionContext) -> np.ndarray:
    if ctx.is_double:
        return np.asarray(values, dtype=float)
    out = np.empty(len(values), dtype=object)
    for i, v in enumerate(values):
        out[i] = to_mpf(v)
    return out


def const_of(value: Any, ctx: PrecisionContext) -> Any:
    """A constant in the arithmetic of ``ctx``."""
    if ctx.is_double:
        return float(value) if not isinstance(value, Fraction) else value.numerator / value.denominator
    return to_mpf(value)


def pi_of(ctx: PrecisionContext) -> Any:
    return math.pi if ctx.is_double else +mpmath.pi


def vsqrt(a: np.ndarray) -> np.ndarray:
    if a.dtype == object:
        out = np.empty(len(a), dtype=object)
        for i, v in enumerate(a):
            out[i] = mpmath.sqrt(v)
        return out
    return np.sqrt(a)


def argmax_of(a: np.ndarray) -> int:
    if a.dtype == object:
        return max(range(len(a)), key=lambda i: a[i])
    return int(np.argmax(a))


def tolerance(ctx: PrecisionContext) -> Any:
    """Relative slack allowed when comparing a measured quantity with its bound."""
    if ctx.is_double:
        return 1e-9
    return mpmath.mpf(10) ** (-(ctx.digits - 5))


def format_real(value: Any, ctx: PrecisionContext) -> str:
    """Decimal text that parses back to the same value at the context precision."""
    if isinstance(value, mpmath.mpf):
        return mpmath.nstr(value, ctx.digits + GUARD_DIGITS, min_fixed=1, max_fixed=0)
    if isinstance(value, Fraction):
        return str(value)
    return repr(float(value))


def parse_real(text: Any, ctx: PrecisionContext) -> Any:
    """Inverse of format_real."""
    try:
        if ctx.is_double:
            return float(Fraction(str(text))) if "/" in str(text) else float(text)
        with ctx.workdps():
            return to_mpf(str(text))
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise DomainError("not a real number: {0!r}".format(text)) from exc


def fraction_text(value: Any) -> str:
    """Exact decimal text of a Fraction whose denominator has only factors 2 and 5."""
    value = to_fraction(value)
    den = value.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den != 1:
        return str(value)
    places = max(twos, fives)
    scaled = value * 10 ** places
    sign = "-" if scaled < 0 else ""
    digits = str(abs(scaled.numerator)).rjust(places + 1, "0")
    if places == 0:
        return sign + digits
    return "{0}{1}.{2}".format(sign, digits[:-places], digits[-places:])
