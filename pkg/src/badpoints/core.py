"""Exact scalar arithmetic, weight vectors and interval primitives.

Everything downstream leans on two value types:

* ``Fraction`` for plain rationals (stdlib).
* ``AlgebraicScalar`` for numbers of the form ``coeff * base**(p/q)`` with a
  rational coefficient, a positive rational base and a rational exponent.

The scaled-power form is closed under products, quotients and rational powers
of nonnegative values, and admits exact comparison: two values of the same
sign compare by dividing one by the other and cross-raising the quotient to
the denominator of its exponent, which lands in plain rational arithmetic.
Sums of incommensurable powers never arise in the searches built on top, so
no richer algebraic-number type is needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

Rational = Union[int, Fraction]
ScalarLike = Union[int, Fraction, "AlgebraicScalar"]


class BadPointsError(Exception):
    """Base class for every error raised by this package."""


class SumNotOne(BadPointsError):
    pass


class NegativeEntry(BadPointsError):
    pass


class AllZero(BadPointsError):
    pass


class EmptySearch(BadPointsError):
    pass


class PreconditionViolated(BadPointsError):
    pass


class SearchExhausted(BadPointsError):
    pass


class Undetermined(BadPointsError):
    pass


class KappaOutOfRange(BadPointsError):
    pass


class UnboundedSearch(BadPointsError):
    pass


class RankDeficient(BadPointsError):
    pass


class NoValidSubinterval(BadPointsError):
    pass


class BoxTooLarge(BadPointsError):
    pass


class BudgetExceeded(BadPointsError):
    pass


class LevelMissing(BadPointsError):
    pass


class MismatchedParams(BadPointsError):
    pass


class WrongWeights(BadPointsError):
    pass


class DegenerateFiber(BadPointsError):
    pass


class NotFound(BadPointsError):
    pass


def as_fraction(x: Rational) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    raise PreconditionViolated(f"expected a rational, got {type(x).__name__}")


def sign(x: Rational) -> int:
    if x > 0:
        return 1
    if x < 0:
        return -1
    return 0


def iroot(n: int, k: int) -> int:
    """Largest r >= 0 with r**k <= n (n >= 0, k >= 1)."""
    if n < 0 or k < 1:
        raise PreconditionViolated("iroot needs n >= 0 and k >= 1")
    if n in (0, 1) or k == 1:
        return n
    if k == 2:
        return math.isqrt(n)
    if k >= n.bit_length():
        return 1
    r = 1 << -(-n.bit_length() // k)  # power-of-two overestimate
    while True:
        nr = ((k - 1) * r + n // r ** (k - 1)) // k
        if nr >= r:
            break
        r = nr
    while r**k > n:
        r -= 1
    return r


def nth_root_fraction(x: Fraction, k: int) -> Fraction | None:
    """Exact k-th root of a nonnegative rational, or None if irrational."""
    if x < 0:
        return None
    pr = iroot(x.numerator, k)
    if pr**k != x.numerator:
        return None
    qr = iroot(x.denominator, k)
    if qr**k != x.denominator:
        return None
    return Fraction(pr, qr)


def round_half_away(x: Rational) -> int:
    """Nearest integer, ties away from zero (deterministic witness choice)."""
    x = as_fraction(x)
    f = math.floor(x)
    frac = x - f
    if frac > Fraction(1, 2):
        return f + 1
    if frac < Fraction(1, 2):
        return f
    return f + 1 if x >= 0 else f


def nearest_int_dist(x: Rational) -> Fraction:
    """Distance from x to the nearest integer, in [0, 1/2]."""
    x = as_fraction(x)
    d = x - math.floor(x)
    return min(d, 1 - d)


def parse_rational(text: str) -> Fraction:
    return Fraction(text.strip())


def format_rational(x: Rational) -> str:
    return str(as_fraction(x))


@dataclass(frozen=True, eq=False)
class AlgebraicScalar:
    """Exact value coeff * base**exponent with rational parts, base > 0.

    Construction normalizes: integer exponents fold into the coefficient, and
    perfect-power bases reduce the exponent denominator, so a value that is
    actually rational always ends up with exponent 0 and base 1.
    """

    coeff: Fraction
    base: Fraction
    exponent: Fraction

    def __post_init__(self) -> None:
        c = as_fraction(self.coeff)
        b = as_fraction(self.base)
        e = as_fraction(self.exponent)
        if b <= 0:
            raise PreconditionViolated("scaled-power base must be positive")
        if c == 0 or b == 1 or e == 0:
            c, b, e = (c * b ** int(e) if e.denominator == 1 else c), Fraction(1), Fraction(0)
        while e != 0:
            if e.denominator == 1:
                c, b, e = c * b ** int(e), Fraction(1), Fraction(0)
                break
            root = nth_root_fraction(b, e.denominator)
            if root is not None:
                c, b, e = c * root ** e.numerator, Fraction(1), Fraction(0)
                break
            # Reduce the exponent denominator when the base is a perfect power.
            for d in range(min(e.denominator, 64), 1, -1):
                if e.denominator % d == 0:
                    root = nth_root_fraction(b, d)
                    if root is not None and root != b:
                        b = root
                        e = e * d
                        break
            else:
                break
        if b != 1 and b.numerator < b.denominator:
            b = 1 / b
            e = -e
        object.__setattr__(self, "coeff", c)
        object.__setattr__(self, "base", b)
        object.__setattr__(self, "exponent", e)

    # -- predicates ------------------------------------------------------

    @property
    def is_rational(self) -> bool:
        return self.exponent == 0

    def as_fraction(self) -> Fraction:
        if not self.is_rational:
            raise PreconditionViolated(f"{self!r} is not rational")
        return self.coeff

    def sign(self) -> int:
        return sign(self.coeff)

    # -- arithmetic ------------------------------------------------------

    def __mul__(self, other: ScalarLike) -> "AlgebraicScalar":
        if isinstance(other, (int, Fraction)):
            return AlgebraicScalar(self.coeff * as_fraction(other), self.base, self.exponent)
        if not isinstance(other, AlgebraicScalar):
            return NotImplemented
        c = self.coeff * other.coeff
        if self.is_rational:
            return AlgebraicScalar(c, other.base, other.exponent)
        if other.is_rational or self.base == other.base:
            e = self.exponent + (other.exponent if not other.is_rational else 0)
            return AlgebraicScalar(c, self.base, e)
        den = math.lcm(self.exponent.denominator, other.exponent.denominator)
        merged = self.base ** int(self.exponent * den) * other.base ** int(other.exponent * den)
        return AlgebraicScalar(c, merged, Fraction(1, den))

    __rmul__ = __mul__

    def __truediv__(self, other: ScalarLike) -> "AlgebraicScalar":
        return self * _invert(other)

    def __rtruediv__(self, other: ScalarLike) -> "AlgebraicScalar":
        return _invert(self) * other

    def __neg__(self) -> "AlgebraicScalar":
        return AlgebraicScalar(-self.coeff, self.base, self.exponent)

    def __abs__(self) -> "AlgebraicScalar":
        return AlgebraicScalar(abs(self.coeff), self.base, self.exponent)

    def __pow__(self, e: Rational) -> "AlgebraicScalar":
        e = as_fraction(e)
        if e.denominator == 1:
            k = int(e)
            if k < 0 and self.coeff == 0:
                raise ZeroDivisionError("0 to a negative power")
            return AlgebraicScalar(self.coeff**k, self.base, self.exponent * k)
        if self.coeff < 0:
            raise PreconditionViolated("fractional power of a negative value")
        if self.coeff == 0:
            if e < 0:
                raise ZeroDivisionError("0 to a negative power")
            return AlgebraicScalar(Fraction(0), Fraction(1), Fraction(0))
        part = AlgebraicScalar(Fraction(1), self.base, self.exponent * e)
        return AlgebraicScalar(Fraction(1), self.coeff, e) * part

    # -- exact comparison --------------------------------------------------

    def compare(self, other: ScalarLike) -> int:
        other = coerce_scalar(other)
        s1, s2 = self.sign(), other.sign()
        if s1 != s2:
            return 1 if s1 > s2 else -1
        if s1 == 0:
            return 0
        q = self / other
        if q.is_rational:
            return s1 * sign(q.coeff - 1)
        # q = c * b**(p/den) with c > 0: compare against 1 by raising to den.
        den = q.exponent.denominator
        lhs = q.coeff**den * q.base ** int(q.exponent * den)
        return s1 * sign(lhs - 1)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, (int, Fraction, AlgebraicScalar)):
            return NotImplemented
        return self.compare(other) == 0

    __hash__ = None  # equivalent forms would need canonical hashing; unhashable instead

    def __lt__(self, other: ScalarLike) -> bool:
        return self.compare(other) < 0

    def __le__(self, other: ScalarLike) -> bool:
        return self.compare(other) <= 0

    def __gt__(self, other: ScalarLike) -> bool:
        return self.compare(other) > 0

    def __ge__(self, other: ScalarLike) -> bool:
        return self.compare(other) >= 0

    # -- rounding and rendering -----------------------------------------

    def __float__(self) -> float:
        if self.coeff == 0:
            return 0.0
        lg = (
            math.log(abs(self.coeff.numerator)) - math.log(self.coeff.denominator)
            + float(self.exponent) * (math.log(self.base.numerator) - math.log(self.base.denominator))
        )
        if lg > 709.0:
            return math.inf if self.coeff > 0 else -math.inf
        if lg < -709.0:
            return 0.0
        return self.sign() * math.exp(lg)

    def floor(self) -> int:
        if self.is_rational:
            return math.floor(self.coeff)
        if self.sign() < 0:
            return -((-self).ceil())
        if self.compare(1) < 0:
            return 0
        # Bracket by powers of two, then bisect; all compares are exact.
        k = 0
        est = float(self)
        if math.isfinite(est) and est > 1:
            k = max(0, int(math.log2(est)) - 1)
        while self.compare(2 ** (k + 1)) >= 0:
            k += 1
        while k > 0 and self.compare(2**k) < 0:
            k -= 1
        lo, hi = 2**k, 2 ** (k + 1)  # lo <= self < hi
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if self.compare(mid) >= 0:
                lo = mid
            else:
                hi = mid
        return lo

    def ceil(self) -> int:
        f = self.floor()
        return f if self.compare(f) == 0 else f + 1

    def rational_upper(self) -> Fraction:
        """A rational u with self <= u, reasonably tight (verified exactly)."""
        if self.is_rational:
            return self.coeff
        est = float(self)
        if math.isfinite(est):
            cand = Fraction(est) * Fraction(2**20 + 1, 2**20) + Fraction(1, 2**60)
            for _ in range(64):
                if self.compare(cand) <= 0:
                    return cand
                cand = cand * Fraction(2**10 + 1, 2**10) + Fraction(1, 2**40)
        return Fraction(self.ceil())

    def rational_lower(self) -> Fraction:
        return -((-self).rational_upper())

    def __repr__(self) -> str:
        if self.is_rational:
            return f"AlgebraicScalar({self.coeff})"
        return f"AlgebraicScalar({self.coeff}*{self.base}^({self.exponent}))"


def coerce_scalar(x: ScalarLike) -> AlgebraicScalar:
    if isinstance(x, AlgebraicScalar):
        return x
    return AlgebraicScalar(as_fraction(x), Fraction(1), Fraction(0))


def _invert(x: ScalarLike) -> AlgebraicScalar:
    x = coerce_scalar(x)
    if x.coeff == 0:
        raise ZeroDivisionError("division by zero scalar")
    return AlgebraicScalar(1 / x.coeff, x.base, -x.exponent)


def scaled_power(coeff: Rational, base: Rational, exponent: Rational) -> AlgebraicScalar:
    """Build coeff * base**exponent (base > 0) as an exact scalar."""
    return AlgebraicScalar(as_fraction(coeff), as_fraction(base), as_fraction(exponent))


def compare_scaled_power(a: Rational, c: Rational, base: Rational, exponent: Rational) -> int:
    """Exact ordering of the rational a against c * base**exponent: -1, 0 or 1."""
    return -scaled_power(c, base, exponent).compare(as_fraction(a))


def scalar_min(*values: ScalarLike) -> ScalarLike:
    if not values:
        raise EmptySearch("scalar_min of nothing")
    best = values[0]
    for v in values[1:]:
        if coerce_scalar(v).compare(best) < 0:
            best = v
    return best


def scalar_max(*values: ScalarLike) -> ScalarLike:
    if not values:
        raise EmptySearch("scalar_max of nothing")
    best = values[0]
    for v in values[1:]:
        if coerce_scalar(v).compare(best) > 0:
            best = v
    return best


def float_of(x: ScalarLike) -> float:
    if isinstance(x, AlgebraicScalar):
        return float(x)
    return float(as_fraction(x))


def format_scalar(x: ScalarLike) -> str:
    x = coerce_scalar(x)
    if x.is_rational:
        return format_rational(x.coeff)
    return f"{x.coeff}*{x.base}^({x.exponent})"


def parse_scalar(text: str) -> Fraction | AlgebraicScalar:
    text = text.strip()
    if "*" not in text:
        return parse_rational(text)
    coeff_part, power_part = text.split("*", 1)
    base_part, exp_part = power_part.split("^", 1)
    exp_part = exp_part.strip()
    if exp_part.startswith("(") and exp_part.endswith(")"):
        exp_part = exp_part[1:-1]
    value = scaled_power(parse_rational(coeff_part), parse_rational(base_part), parse_rational(exp_part))
    return value.as_fraction() if value.is_rational else value


@dataclass(frozen=True)
class WeightVector:
    """Nonnegative rational weights summing to 1; derived constants cached.

    tau is the smallest strictly positive weight, gamma the largest, z the
    number of zero entries, and lam = 1/(1 + tau) the contraction exponent
    used by the flow and the dangerous-interval bands.
    """

    entries: tuple[Fraction, ...]

    def __post_init__(self) -> None:
        entries = tuple(as_fraction(e) for e in self.entries)
        object.__setattr__(self, "entries", entries)
        if not entries:
            raise AllZero("weight vector needs at least one entry")
        if any(e < 0 for e in entries):
            raise NegativeEntry(f"negative weight in {entries}")
        if all(e == 0 for e in entries):
            raise AllZero("all weights are zero")
        total = sum(entries)
        if total != 1:
            raise SumNotOne(f"weights sum to {total}, not 1")

    @property
    def n(self) -> int:
        return len(self.entries)

    @property
    def tau(self) -> Fraction:
        return min(e for e in self.entries if e > 0)

    @property
    def gamma(self) -> Fraction:
        return max(self.entries)

    @property
    def z(self) -> int:
        return sum(1 for e in self.entries if e == 0)

    @property
    def lam(self) -> Fraction:
        return 1 / (1 + self.tau)

    def r_threshold(self) -> ScalarLike:
        """16**(1 + 1/tau): below this subdivision factor the asymptotic
        counting argument gives no guarantee (construction warns, not fails)."""
        value = scaled_power(1, 16, 1 + 1 / self.tau)
        return value.as_fraction() if value.is_rational else value

    def __str__(self) -> str:
        return "(" + ", ".join(format_rational(e) for e in self.entries) + ")"


def weights(*entries: Rational) -> WeightVector:
    return WeightVector(tuple(as_fraction(e) for e in entries))


def equal_weights(n: int) -> WeightVector:
    return WeightVector(tuple(Fraction(1, n) for _ in range(n)))


@dataclass(frozen=True)
class RatInterval:
    """Closed interval with rational endpoints, lo <= hi (degenerate allowed)."""

    lo: Fraction
    hi: Fraction

    def __post_init__(self) -> None:
        lo, hi = as_fraction(self.lo), as_fraction(self.hi)
        if lo > hi:
            raise PreconditionViolated(f"interval endpoints out of order: [{lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def length(self) -> Fraction:
        return self.hi - self.lo

    @property
    def midpoint(self) -> Fraction:
        return (self.lo + self.hi) / 2

    def contains(self, x: Rational) -> bool:
        return self.lo <= x <= self.hi

    def contains_interval(self, other: "RatInterval") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    def intersects(self, other: "RatInterval") -> bool:
        return self.lo <= other.hi and other.lo <= self.hi

    def intersection(self, other: "RatInterval") -> "RatInterval | None":
        lo, hi = max(self.lo, other.lo), min(self.hi, other.hi)
        if lo > hi:
            return None
        return RatInterval(lo, hi)

    def __str__(self) -> str:
        return f"[{format_rational(self.lo)}, {format_rational(self.hi)}]"


def interval(lo: Rational, hi: Rational) -> RatInterval:
    return RatInterval(as_fraction(lo), as_fraction(hi))
