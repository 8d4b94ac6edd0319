"""Margins against integer polynomials and nearby algebraic numbers.

Three searches drive this module, all exhaustive over a height box and all
in exact rational arithmetic: the smallest scaled polynomial value at a
point, the closest algebraic number of bounded degree and height, and the
small-polynomial existence search behind the mean-value pigeonhole.  On top
of them sit the pipeline steps: translating a weighted dual-badness
certificate on the moment curve into a polynomial margin, and fibering a
multivariate polynomial map into a one-parameter nondegenerate curve.

Heights of algebraic numbers use the box surrogate: the minimum height over
enumerated polynomials vanishing at the number.  That never exceeds the true
naive height that a full factor search would give, so every margin reported
here is conservative.  Factoring over the rationals is cheap at these
degrees; quadratics split by discriminant, higher degrees go through sympy.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Mapping, Sequence

import sympy

from .core import (
    BoxTooLarge,
    DegenerateFiber,
    EmptySearch,
    NotFound,
    PreconditionViolated,
    RatInterval,
    Rational,
    WeightVector,
    WrongWeights,
    as_fraction,
    interval,
    iroot,
)
from .certify import BadCertificate
from .dangerous import PolyCurve, monomial_curve
from .polynomials import (
    Poly,
    cauchy_root_bound,
    eval_at,
    isolate_roots,
    poly,
    refine_enclosure,
)

__all__ = [
    "IntPolynomial",
    "AlgebraicWitness",
    "MarginBracket",
    "BkMarginClaim",
    "InclusionReport",
    "bn_margin",
    "bstar_margin",
    "wstar_witnesses",
    "minkowski_polynomial",
    "veronese",
    "badr_to_bk",
    "fiber_map",
    "PolyMap",
    "inclusion_check",
]

DEFAULT_SEARCH_BUDGET = 4_000_000


@dataclass(frozen=True)
class IntPolynomial:
    """Integer polynomial, coefficients lowest degree first."""

    coefficients: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.coefficients:
            raise PreconditionViolated("need at least one coefficient")
        if any(not isinstance(c, int) for c in self.coefficients):
            raise PreconditionViolated("coefficients must be integers")

    @property
    def degree(self) -> int:
        for i in range(len(self.coefficients) - 1, -1, -1):
            if self.coefficients[i]:
                return i
        return -1

    @property
    def height(self) -> int:
        return max(abs(c) for c in self.coefficients)

    @property
    def is_zero(self) -> bool:
        return self.degree < 0

    def value(self, x: Rational) -> Fraction:
        x = as_fraction(x)
        acc = Fraction(0)
        for c in reversed(self.coefficients):
            acc = acc * x + c
        return acc

    def derivative(self) -> "IntPolynomial":
        if len(self.coefficients) == 1:
            return IntPolynomial((0,))
        return IntPolynomial(
            tuple(i * c for i, c in enumerate(self.coefficients) if i > 0)
        )

    def as_poly(self) -> Poly:
        return poly(tuple(Fraction(c) for c in self.coefficients))

    def __str__(self) -> str:
        terms = []
        for i, c in enumerate(self.coefficients):
            if c:
                terms.append(f"{c}" if i == 0 else f"{c}*x^{i}")
        return " + ".join(terms) if terms else "0"


@dataclass(frozen=True)
class AlgebraicWitness:
    """A real algebraic number: its polynomial, an enclosure, and a height.

    The enclosure either is a single rational point that is an exact root,
    or brackets a sign change of the polynomial.  The height is the box
    surrogate and may come from a different polynomial than the one stored.
    """

    poly: IntPolynomial
    root_enclosure: RatInterval
    height: int

    def __post_init__(self) -> None:
        if self.height < 1:
            raise PreconditionViolated("height must be positive")
        lo = self.poly.value(self.root_enclosure.lo)
        hi = self.poly.value(self.root_enclosure.hi)
        if lo == 0 or hi == 0:
            return
        if (lo > 0) == (hi > 0):
            raise PreconditionViolated("enclosure does not certify a root")

    def distance_bounds(self, xi: Rational) -> tuple[Fraction, Fraction]:
        """Certified bounds on |xi - root| from the enclosure alone."""
        xi = as_fraction(xi)
        enc = self.root_enclosure
        upper = max(abs(xi - enc.lo), abs(xi - enc.hi))
        lower = max(enc.lo - xi, xi - enc.hi, Fraction(0))
        return lower, upper


@dataclass(frozen=True)
class MarginBracket:
    """Certified two-sided bounds on a minimum over enclosed roots."""

    lower: Fraction
    upper: Fraction

    def __post_init__(self) -> None:
        if self.lower > self.upper:
            raise PreconditionViolated("bracket is inverted")


# ---------------------------------------------------------------------------
# Polynomial value margins.


def _tail_vectors(n: int, h_max: int) -> Iterator[tuple[int, ...]]:
    """Nonzero (a_1..a_n) with first nonzero entry positive."""
    for tail in itertools.product(range(-h_max, h_max + 1), repeat=n):
        for c in tail:
            if c > 0:
                yield tail
                break
            if c < 0:
                break


def bn_margin(
    xi: Rational, n: int, h_max: int, nonvanishing: bool = False
) -> tuple[Fraction, IntPolynomial]:
    """Smallest H(P)**n * |P(xi)| over nonzero P, deg <= n, H(P) <= h_max.

    Exact minimum and a polynomial attaining it.  For each coefficient tail
    (a_1..a_n) only the integers a_0 nearest to -sum a_i xi^i can win, so
    the box collapses to the tail directions; the constant polynomial 1
    seeds the search, which caps every reported margin at 1.  A rational xi
    has margin 0 once the box reaches its denominator; nonvanishing=True
    restricts to polynomials with P(xi) != 0, which keeps the margin
    positive (the surrogate needed when xi is a rational stand-in).
    """
    if n < 1:
        raise PreconditionViolated("degree bound must be >= 1")
    if h_max < 1:
        raise PreconditionViolated("height bound must be >= 1")
    xi = as_fraction(xi)
    if (2 * h_max + 1) ** n > DEFAULT_SEARCH_BUDGET:
        raise BoxTooLarge(f"{(2 * h_max + 1) ** n} coefficient tails")
    powers = [xi**i for i in range(n + 1)]
    best = Fraction(1)
    best_poly = IntPolynomial((1,) + (0,) * n)
    for tail in _tail_vectors(n, h_max):
        t_value = sum((c * powers[i + 1] for i, c in enumerate(tail)), Fraction(0))
        t_height = max(abs(c) for c in tail)
        floor_a0 = math.floor(-t_value)
        for a0 in {min(max(floor_a0 + step, -h_max), h_max)
                   for step in (-1, 0, 1, 2)}:
            height = max(t_height, abs(a0))
            margin = height**n * abs(t_value + a0)
            if margin == 0 and nonvanishing:
                continue
            if margin < best:
                best = margin
                best_poly = IntPolynomial((a0,) + tail)
                if best == 0:
                    return best, best_poly
    return best, best_poly


# ---------------------------------------------------------------------------
# Factoring and root tables.


def _primitive(coeffs: tuple[int, ...]) -> tuple[int, ...]:
    g = 0
    for c in coeffs:
        g = math.gcd(g, abs(c))
    out = tuple(c // g for c in coeffs)
    if out[-1] < 0:
        out = tuple(-c for c in out)
    return out


def _irreducible_factors(coeffs: tuple[int, ...]) -> list[tuple[int, ...]]:
    """Primitive irreducible factors of degree >= 1, lowest degree first.

    Quadratics split by discriminant; degree 3..5 goes through sympy;
    higher degrees are returned unfactored (heights stay conservative).
    """
    while coeffs and coeffs[-1] == 0:
        coeffs = coeffs[:-1]
    deg = len(coeffs) - 1
    if deg < 1:
        return []
    prim = _primitive(coeffs)
    if deg == 1:
        return [prim]
    if deg == 2:
        c0, c1, c2 = prim
        disc = c1 * c1 - 4 * c2 * c0
        if disc < 0:
            return [prim]
        s = math.isqrt(disc)
        if s * s != disc:
            return [prim]
        out = []
        for root in (Fraction(-c1 + s, 2 * c2), Fraction(-c1 - s, 2 * c2)):
            lin = _primitive((-root.numerator, root.denominator))
            if lin not in out:
                out.append(lin)
        return out
    if deg > 5:
        return [prim]
    sym = sympy.Poly(list(reversed(prim)), sympy.Symbol("x"), domain="ZZ")
    factors = []
    for fac, _mult in sym.factor_list()[1]:
        fc = tuple(int(c) for c in reversed(fac.all_coeffs()))
        if len(fc) >= 2 and fc not in factors:
            factors.append(fc)
    return factors


def _height_table(n: int, h_max: int) -> dict[tuple[int, ...], int]:
    """Smallest box-polynomial height vanishing at each irreducible factor.

    Only primitive polynomials are enumerated: an integer multiple c*P sits
    in the box alongside P with c*height, so it can never improve the table.
    """
    if (2 * h_max + 1) ** (n + 1) > DEFAULT_SEARCH_BUDGET:
        raise BoxTooLarge(f"{(2 * h_max + 1) ** (n + 1)} box polynomials")
    table: dict[tuple[int, ...], int] = {}
    for tail in _tail_vectors(n, h_max):
        for a0 in range(-h_max, h_max + 1):
            coeffs = (a0,) + tail
            g = 0
            for c in coeffs:
                g = math.gcd(g, abs(c))
            if g != 1:
                continue
            height = max(abs(c) for c in coeffs)
            for fac in _irreducible_factors(coeffs):
                old = table.get(fac)
                if old is None or height < old:
                    table[fac] = height
    return table


def _root_enclosures(coeffs: tuple[int, ...]) -> list[RatInterval]:
    if len(coeffs) == 2:
        root = Fraction(-coeffs[0], coeffs[1])
        return [interval(root, root)]
    p = poly(tuple(Fraction(c) for c in coeffs))
    bound = cauchy_root_bound(p) + 1
    return isolate_roots(p, interval(-bound, bound))


def _separate_from(
    coeffs: tuple[int, ...], enc: RatInterval, xi: Fraction, width: Fraction
) -> RatInterval:
    """Shrink to the target width and move xi outside unless it is the root."""
    p = poly(tuple(Fraction(c) for c in coeffs))
    enc = refine_enclosure(p, enc, width)
    if not (enc.lo < xi < enc.hi):
        return enc
    if eval_at(p, xi) == 0:
        return interval(xi, xi)
    while enc.lo < xi < enc.hi:
        width = width / 16
        enc = refine_enclosure(p, enc, width)
    return enc


def bstar_margin(
    xi: Rational, n: int, h_max: int
) -> tuple[MarginBracket, AlgebraicWitness]:
    """Bracket of min H(alpha)**(n+1) * |xi - alpha| over enclosed algebraics.

    Every real root of every degree <= n polynomial in the height box is
    enclosed, each enclosure refined below h_max**-(n+2) and until it either
    separates from xi or pins xi as an exact root.  Both ends of the minimum
    are reported; the witness attains the upper end.
    """
    if n < 1:
        raise PreconditionViolated("degree bound must be >= 1")
    if h_max < 1:
        raise PreconditionViolated("height bound must be >= 1")
    xi = as_fraction(xi)
    table = _height_table(n, h_max)
    if not table:
        raise EmptySearch("no algebraic numbers in the box")
    target = Fraction(1, h_max ** (n + 2))
    best_upper = None
    best_lower = None
    witness = None
    for coeffs in sorted(table):
        height = table[coeffs]
        scale = Fraction(height ** (n + 1))
        for enc in _root_enclosures(coeffs):
            enc = _separate_from(coeffs, enc, xi, target)
            lower = max(enc.lo - xi, xi - enc.hi, Fraction(0))
            upper = max(abs(xi - enc.lo), abs(xi - enc.hi))
            if best_lower is None or scale * lower < best_lower:
                best_lower = scale * lower
            if best_upper is None or scale * upper < best_upper:
                best_upper = scale * upper
                witness = AlgebraicWitness(IntPolynomial(coeffs), enc, height)
    assert witness is not None
    return MarginBracket(best_lower, best_upper), witness


def wstar_witnesses(
    xi: Rational, n: int, c2: Rational, h_range: tuple[int, int]
) -> list[AlgebraicWitness]:
    """All enclosed algebraics with |xi - alpha| < c2 * H(alpha)**-(n+1).

    Heights run over the surrogate table restricted to h_range (inclusive);
    each returned enclosure certifies its strict inequality, refined as far
    as needed to decide it.
    """
    if n < 1:
        raise PreconditionViolated("degree bound must be >= 1")
    xi = as_fraction(xi)
    c2 = as_fraction(c2)
    if c2 <= 0:
        raise PreconditionViolated("c2 must be positive")
    h_lo, h_hi = h_range
    if h_lo > h_hi or h_hi < 1:
        return []
    table = _height_table(n, h_hi)
    out = []
    for coeffs in sorted(table):
        height = table[coeffs]
        if not h_lo <= height <= h_hi:
            continue
        bound = c2 * Fraction(height) ** (-(n + 1))
        width = Fraction(1, h_hi ** (n + 2))
        for enc in _root_enclosures(coeffs):
            enc = _separate_from(coeffs, enc, xi, width)
            while True:
                wit = AlgebraicWitness(IntPolynomial(coeffs), enc, height)
                lower, upper = wit.distance_bounds(xi)
                if upper < bound:
                    out.append(wit)
                    break
                if lower >= bound:
                    break
                if enc.lo == enc.hi:
                    break
                width = width / 16
                enc = _separate_from(coeffs, enc, xi, width)
    out.sort(key=lambda w: (w.height, w.root_enclosure.lo, w.poly.coefficients))
    return out


# ---------------------------------------------------------------------------
# Small polynomials at a point.


def _window(center: Fraction, radius: Fraction) -> range:
    """Integers strictly inside (center - radius, center + radius)."""
    lo = math.floor(center - radius) + 1
    hi = math.ceil(center + radius) - 1
    return range(lo, hi + 1)


def _spiral(values: range) -> list[int]:
    return sorted(values, key=lambda v: (abs(v), v))


def minkowski_polynomial(
    xi: Rational,
    n: int,
    Q: int,
    eps0: Rational,
    deriv_bound: Rational | None = None,
    budget: int = DEFAULT_SEARCH_BUDGET,
) -> IntPolynomial:
    """Nonzero P with |P(xi)| < eps0/Q**n, |P'(xi)| < Q/eps0, |a_i| <= Q.

    The three constraints cut a symmetric convex body of volume exactly
    2**(n+1), so the pigeonhole sits right at its threshold; the exhaustive
    search decides existence either way.  deriv_bound replaces the slope
    window Q/eps0 when given; below Q/eps0 it shrinks the body under the
    pigeonhole threshold, and NotFound (raised with the exhausted box)
    becomes a meaningful outcome rather than a failure.
    """
    if Q <= 1:
        raise PreconditionViolated("Q must be > 1")
    if n < 1:
        raise PreconditionViolated("degree bound must be >= 1")
    xi = as_fraction(xi)
    eps0 = as_fraction(eps0)
    if eps0 <= 0:
        raise PreconditionViolated("eps0 must be positive")
    value_radius = eps0 * Fraction(Q) ** (-n)
    deriv_radius = Fraction(Q) / eps0
    if deriv_bound is not None:
        deriv_radius = as_fraction(deriv_bound)
        if deriv_radius <= 0:
            raise PreconditionViolated("deriv_bound must be positive")
    powers = [xi**i for i in range(n + 1)]
    outer = (2 * Q + 1) ** max(n - 1, 0)
    per_tail = 2 * deriv_radius + 1
    if outer * per_tail > budget:
        raise BoxTooLarge(f"search box ~{float(outer * per_tail):.2e} vectors")
    tails = itertools.product(
        *[_spiral(range(-Q, Q + 1)) for _ in range(max(n - 1, 0))]
    )
    for high in tails:  # (a_2, ..., a_n)
        deriv_rest = sum(
            (i + 2) * c * powers[i + 1] for i, c in enumerate(high)
        )
        for a1 in _spiral(_window(-deriv_rest, deriv_radius)):
            value_rest = a1 * powers[1] + sum(
                c * powers[i + 2] for i, c in enumerate(high)
            )
            for a0 in _spiral(_window(-value_rest, value_radius)):
                if a0 == 0 and a1 == 0 and not any(high):
                    continue
                cand = IntPolynomial((a0, a1) + high)
                if abs(cand.value(xi)) < value_radius and abs(
                    cand.derivative().value(xi)
                ) < deriv_radius:
                    return cand
    raise NotFound(
        f"no nonzero vector: |P({xi})| < {value_radius}, "
        f"|P'({xi})| < {deriv_radius}, |a_i| <= {Q} for i >= 2"
    )


# ---------------------------------------------------------------------------
# Moment curve pipeline.


def veronese(n: int, domain: RatInterval) -> PolyCurve:
    """The moment curve (x, x^2, ..., x^n) on the given interval."""
    return monomial_curve(n, domain)


@dataclass(frozen=True)
class BkMarginClaim:
    """Polynomial badness inherited from a dual certificate on the moment curve.

    Valid statement: every nonzero integer P with deg <= k and H(P) <=
    height_bound satisfies H(P)**k * |P(xi)| >= margin.
    """

    xi: Fraction
    k: int
    height_bound: int
    margin: Fraction
    source_bound: int

    def verify_against(self, margin: Fraction) -> bool:
        return margin >= self.margin


def badr_to_bk(cert: BadCertificate, k: int) -> BkMarginClaim:
    """Translate a dual-mode certificate with weights (1/k..1/k,0..0).

    A polynomial tail (a_1..a_k) is admissible in the dual system exactly
    when max |a_i|**k is at most the certificate bound, so the polynomial
    height bound is the k-th root of it.  Constant polynomials contribute
    at least 1, hence the cap.
    """
    if cert.kind != "dual":
        raise WrongWeights("certificate is not in dual mode")
    n = cert.weights.n
    if not 1 <= k <= n:
        raise WrongWeights(f"k={k} outside 1..{n}")
    wanted = (Fraction(1, k),) * k + (Fraction(0),) * (n - k)
    if cert.weights.entries != wanted:
        raise WrongWeights(
            f"certificate weights {cert.weights} do not match k={k}"
        )
    xi = cert.point[0]
    if any(cert.point[i] != xi ** (i + 1) for i in range(n)):
        raise PreconditionViolated("certificate point is not on the moment curve")
    margin = as_fraction(cert.margin)
    return BkMarginClaim(
        xi=cert.point[0],
        k=k,
        height_bound=iroot(cert.bound, k),
        margin=min(margin, Fraction(1)),
        source_bound=cert.bound,
    )


# ---------------------------------------------------------------------------
# Fibering multivariate maps.


@dataclass(frozen=True)
class PolyMap:
    """Polynomial map on a box: exponent-tuple -> coefficient per component."""

    components: tuple[Mapping[tuple[int, ...], Fraction], ...]
    box: tuple[RatInterval, ...]

    def __post_init__(self) -> None:
        if not self.components or not self.box:
            raise PreconditionViolated("need components and a box")
        arity = len(self.box)
        for comp in self.components:
            for exponents, coeff in comp.items():
                if len(exponents) != arity:
                    raise PreconditionViolated("exponent arity mismatch")
                if any(e < 0 for e in exponents):
                    raise PreconditionViolated("negative exponent")

    @property
    def arity(self) -> int:
        return len(self.box)


def poly_map(
    components: Sequence[Mapping[tuple[int, ...], Rational]],
    box: Sequence[RatInterval],
) -> PolyMap:
    fixed = tuple(
        {tuple(e): as_fraction(c) for e, c in comp.items() if c != 0}
        for comp in components
    )
    return PolyMap(fixed, tuple(box))


def fiber_map(f: PolyMap, d: int, u: Sequence[Rational]) -> PolyCurve:
    """Restrict f to the curve (t, u_2 t**d, u_3 t**d**2, ...).

    The substitution turns each component into a univariate polynomial in t
    with exact coefficients; the result must pass the nondegeneracy checks
    (independent nonconstant components, nonvanishing Wronskian), otherwise
    DegenerateFiber signals that a larger d or different u is needed.
    """
    if d < 2:
        raise PreconditionViolated("d must be >= 2")
    u = tuple(as_fraction(v) for v in u)
    if len(u) != f.arity - 1:
        raise PreconditionViolated(
            f"need {f.arity - 1} fiber coordinates, got {len(u)}"
        )
    for value, box in zip(u, f.box[1:]):
        if not box.contains(value):
            raise PreconditionViolated(f"fiber coordinate {value} outside {box}")
    exponent_of = [1] + [d**j for j in range(1, f.arity)]
    curves = []
    for comp in f.components:
        coeffs: dict[int, Fraction] = {}
        for exponents, coeff in comp.items():
            power = sum(e * w for e, w in zip(exponents, exponent_of))
            scaled = coeff
            for e, uv in zip(exponents[1:], u):
                scaled *= uv**e
            if scaled:
                coeffs[power] = coeffs.get(power, Fraction(0)) + scaled
        top = max(coeffs, default=0)
        curves.append(tuple(coeffs.get(i, Fraction(0)) for i in range(top + 1)))
    try:
        return PolyCurve(tuple(poly(c) for c in curves), f.box[0])
    except PreconditionViolated as exc:
        raise DegenerateFiber(f"fiber at u={u}, d={d}: {exc}") from exc


# ---------------------------------------------------------------------------
# The inclusion chain at finite scale.


@dataclass(frozen=True)
class InclusionReport:
    """One finite-scale check of the chain from B-margins to distance margins."""

    xi: Fraction
    n: int
    poly_margin: Fraction
    reduced_height: int
    distance_bracket: MarginBracket
    taylor_constant: Fraction
    ok: bool


def inclusion_check(xi: Rational, n: int, h_max: int) -> InclusionReport:
    """Check that a polynomial margin forces a distance margin.

    With c1 the polynomial margin at height h_max, every algebraic alpha of
    degree <= n and surrogate height H <= h_max/(1 + n^2 max(1, xi^n)) obeys
    H**(n+1) |xi - alpha| >= c1 / (n 2**(n+1) max(1, |alpha|)**n), by Taylor
    expansion of its minimal polynomial around alpha.  The report compares
    the certified distance bracket against that floor at the witness.
    """
    xi = as_fraction(xi)
    c1, _ = bn_margin(xi, n, h_max)
    shrink = 1 + n * n * max(Fraction(1), xi**n)
    reduced = math.floor(Fraction(h_max) / shrink)
    if reduced < 1:
        raise PreconditionViolated("height bound too small to reduce")
    bracket, witness = bstar_margin(xi, n, reduced)
    alpha_size = max(
        Fraction(1),
        abs(witness.root_enclosure.lo),
        abs(witness.root_enclosure.hi),
    )
    constant = Fraction(n * 2 ** (n + 1)) * alpha_size**n
    ok = bracket.lower >= c1 / constant
    return InclusionReport(
        xi=xi,
        n=n,
        poly_margin=c1,
        reduced_height=reduced,
        distance_bracket=bracket,
        taylor_constant=constant,
        ok=ok,
    )
