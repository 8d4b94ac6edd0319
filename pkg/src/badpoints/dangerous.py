"""Dangerous-interval covers along rational polynomial curves.

A generator (a_0, a) is dangerous at scale t when |a_0 + a.f(x)| drops
below kappa * b**-t somewhere on the curve domain while |a_i| < b**(r_i t).
This module certifies curve nondegeneracy constants, covers each dangerous
set by rational intervals with outward rounding, and stratifies covers by
the magnitude of the derivative a.f'(x) so downstream counting can charge
each removal to the right scale.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

from .core import (
    AlgebraicScalar,
    BoxTooLarge,
    MismatchedParams,
    NoValidSubinterval,
    PreconditionViolated,
    RatInterval,
    Rational,
    ScalarLike,
    WeightVector,
    as_fraction,
    coerce_scalar,
    interval,
    nth_root_fraction,
)
from .lattice import mat_rank, strict_int_bound
from .polynomials import (
    Poly,
    count_distinct_roots,
    degree,
    derivative,
    eval_at,
    eval_interval,
    intersect_interval_lists,
    is_zero,
    isolate_roots,
    merge_intervals,
    negative_spans,
    nonpositive_spans,
    poly,
    poly_add,
    poly_det,
    poly_gcd,
    poly_mul,
    poly_scale,
    refine_enclosure,
    squarefree_part,
)

DEFAULT_UNION_BUDGET = 400_000


@dataclass(frozen=True)
class PolyCurve:
    """A map x -> (f_1(x), ..., f_n(x)) with rational coefficients."""

    components: tuple[Poly, ...]
    domain: RatInterval

    def __post_init__(self) -> None:
        comps = tuple(poly(c) for c in self.components)
        object.__setattr__(self, "components", comps)
        if not comps:
            raise PreconditionViolated("curve needs at least one component")
        width = 1 + max(degree(c) for c in comps)
        if width < 1:
            raise PreconditionViolated("curve components must be nonzero")
        rows = [[Fraction(1)] + [Fraction(0)] * (width - 1)]
        for c in comps:
            rows.append([c[i] if i < len(c) else Fraction(0) for i in range(width)])
        if mat_rank(rows) != len(comps) + 1:
            raise PreconditionViolated(
                "1 and the curve components must be linearly independent"
            )
        if is_zero(self.wronskian()):
            raise PreconditionViolated("curve derivative Wronskian vanishes identically")

    @property
    def n(self) -> int:
        return len(self.components)

    def deriv(self, j: int, order: int) -> Poly:
        """order-th derivative of component j (1-based j)."""
        p = self.components[j - 1]
        for _ in range(order):
            p = derivative(p)
        return p

    def wronskian(self) -> Poly:
        """det of the matrix whose (i, j) entry is the i-th derivative
        of component j, for i, j = 1..n."""
        n = self.n
        rows = [[self.deriv(j, i) for j in range(1, n + 1)] for i in range(1, n + 1)]
        return poly_det(rows)

    def combination(self, a: Sequence[int], a0: int = 0) -> Poly:
        """The linear form a_0 + a.f as a polynomial in x."""
        acc = poly((a0,))
        for coefficient, comp in zip(a, self.components):
            acc = poly_add(acc, poly_scale(comp, coefficient))
        return acc

    def point(self, x: Rational) -> tuple[Fraction, ...]:
        return tuple(eval_at(c, x) for c in self.components)


def monomial_curve(n: int, domain: RatInterval) -> PolyCurve:
    """x -> (x, x**2, ..., x**n)."""
    comps = tuple(poly([0] * k + [1]) for k in range(1, n + 1))
    return PolyCurve(comps, domain)


@dataclass(frozen=True)
class PropertyFConstants:
    """Certified nondegeneracy data on a compact interval.

    On `interval` the derivative Wronskian and every first derivative
    stay above c0 in absolute value while all derivatives up to order n
    stay below c1.  c2 is pinned to c0 * c1**(1-n) / (2 * n!), and
    delta0 is a certified modulus: moving x by at most delta0 changes
    each derivative of order up to n by less than c2 / n.
    """

    n: int
    c0: Fraction
    c1: Fraction
    c2: Fraction
    delta0: Fraction
    interval: RatInterval

    def __post_init__(self) -> None:
        for name in ("c0", "c1", "c2", "delta0"):
            object.__setattr__(self, name, as_fraction(getattr(self, name)))
        if not 0 < self.c0 < 1 < self.c1:
            raise PreconditionViolated("need 0 < c0 < 1 < c1")
        if 2 * self.c2 != self.c0 * self.c1 ** (1 - self.n) / math.factorial(self.n):
            raise PreconditionViolated("c2 is pinned to c0 and c1")
        if self.delta0 <= 0:
            raise PreconditionViolated("delta0 must be positive")

    def count_bound(self) -> int:
        """Cap on the number of cover pieces for one stratified generator."""
        per_window = max(
            self.n * (self.n + 1) // 2 + 1,
            math.ceil(2 * self.c1 * self.n / self.c2) + 1,
        )
        windows = math.ceil(self.interval.length / self.delta0) + 1
        return per_window * windows


def _abs_upper(p: Poly, box: RatInterval, splits: int = 8) -> Fraction:
    """Certified upper bound for |p| on the box."""
    if is_zero(p):
        return Fraction(0)
    step = box.length / splits
    worst = Fraction(0)
    for k in range(splits):
        piece = interval(box.lo + k * step, box.lo + (k + 1) * step)
        enc = eval_interval(p, piece)
        worst = max(worst, abs(enc.lo), abs(enc.hi))
    return worst


def _abs_lower(p: Poly, box: RatInterval) -> Fraction | None:
    """Certified positive lower bound for |p| on the box, or None when
    |p| vanishes somewhere on it."""
    if is_zero(p):
        return None
    if degree(p) >= 1 and count_distinct_roots(p, box) > 0:
        return None
    best: Fraction | None = None
    stack = [box]
    while stack:
        piece = stack.pop()
        enc = eval_interval(p, piece)
        if enc.lo > 0 or enc.hi < 0:
            bound = enc.lo if enc.lo > 0 else -enc.hi
            best = bound if best is None else min(best, bound)
            continue
        mid = piece.midpoint
        stack.append(interval(piece.lo, mid))
        stack.append(interval(mid, piece.hi))
    return best


def property_f(
    curves: Sequence[PolyCurve],
    box: RatInterval,
    min_length: Rational | None = None,
) -> PropertyFConstants:
    """Certify nondegeneracy constants on a subinterval of the box.

    The returned interval is the box itself when the derivative Wronskian
    and all first derivatives of every curve are root-free there;
    otherwise the longest root-free gap, shrunk slightly to clear the
    root enclosures.  NoValidSubinterval when no gap of the requested
    minimum length exists.
    """
    if not curves:
        raise PreconditionViolated("at least one curve required")
    n = curves[0].n
    if any(c.n != n for c in curves):
        raise MismatchedParams("curves must share the same dimension")
    for c in curves:
        if not c.domain.contains_interval(box):
            raise PreconditionViolated("box must lie inside every curve domain")

    criticals: list[Poly] = []
    for c in curves:
        criticals.append(c.wronskian())
        criticals.extend(c.deriv(j, 1) for j in range(1, n + 1))
    product = poly((1,))
    for part in criticals:
        product = poly_mul(product, part)
    work = _root_free_subinterval(product, box, min_length)

    lower: Fraction | None = None
    for part in criticals:
        lb = _abs_lower(part, work)
        if lb is None:
            raise NoValidSubinterval("a critical function vanishes on the interval")
        lower = lb if lower is None else min(lower, lb)
    assert lower is not None

    upper = Fraction(0)
    lipschitz = Fraction(0)
    for c in curves:
        for i in range(1, n + 1):
            for j in range(1, n + 1):
                upper = max(upper, _abs_upper(c.deriv(j, i), work))
                lipschitz = max(lipschitz, _abs_upper(c.deriv(j, i + 1), work))

    c0 = min(lower / 2, Fraction(127, 128))
    c1 = max(3 * upper / 2, Fraction(9, 8))
    c2 = c0 * c1 ** (1 - n) / (2 * math.factorial(n))
    if lipschitz == 0:
        delta0 = work.length
    else:
        delta0 = min(work.length, c2 / (n * lipschitz))
    return PropertyFConstants(n, c0, c1, c2, delta0, work)


def _root_free_subinterval(
    p: Poly, box: RatInterval, min_length: Rational | None
) -> RatInterval:
    wanted = as_fraction(min_length) if min_length is not None else Fraction(0)
    if wanted > box.length:
        raise NoValidSubinterval("requested minimum length exceeds the box")
    if degree(p) < 1 or count_distinct_roots(p, box) == 0:
        return box
    encs = isolate_roots(p, box)
    encs = [refine_enclosure(p, e, box.length / (16 * len(encs))) for e in encs]
    cuts = [box.lo]
    for e in encs:
        cuts.extend((e.lo, e.hi))
    cuts.append(box.hi)
    best: RatInterval | None = None
    for lo, hi in zip(cuts[0::2], cuts[1::2]):
        if hi <= lo:
            continue
        pad = (hi - lo) / 16  # keep clear of the root enclosures
        gap = interval(lo + pad, hi - pad)
        if best is None or gap.length > best.length:
            best = gap
    if best is None or best.length == 0 or best.length < wanted:
        raise NoValidSubinterval("no root-free subinterval of the requested length")
    return best


@dataclass(frozen=True)
class DangerousCover:
    """Outer interval cover of one stratified dangerous set.

    Banded covers come from a derivative band at stratum level (t, ell)
    and respect the band length bound; a residual cover (banded=False)
    collects the low-derivative regime and carries its measured maximum
    piece length instead.
    """

    generator: tuple[int, ...]
    level: tuple[int, int]
    intervals: tuple[RatInterval, ...]
    length_bound: AlgebraicScalar
    count_bound: int
    banded: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "intervals", tuple(self.intervals))
        object.__setattr__(self, "length_bound", coerce_scalar(self.length_bound))
        if len(self.intervals) > self.count_bound:
            raise PreconditionViolated("cover exceeds its cardinality bound")
        for piece in self.intervals:
            if self.length_bound.compare(piece.length) < 0:
                raise PreconditionViolated("cover piece exceeds the length bound")

    @property
    def is_empty(self) -> bool:
        return not self.intervals


def _sqrt_brackets(d: Fraction, width: Fraction) -> tuple[Fraction, Fraction]:
    """Rational lo <= sqrt(d) <= hi with hi - lo <= width (d >= 0)."""
    if d < 0:
        raise PreconditionViolated("negative radicand")
    if width <= 0:
        raise PreconditionViolated("bracket width must be positive")
    # Smallest power-of-two scale with 1 / (scale * denom) <= width.
    wanted = -(-width.denominator // (width.numerator * d.denominator))
    scale = 1 if wanted <= 1 else 1 << (wanted - 1).bit_length()
    den = d.denominator * scale
    root = math.isqrt(d.numerator * d.denominator * scale * scale)
    lo = Fraction(root, den)
    return (lo, lo) if lo * lo == d else (lo, Fraction(root + 1, den))


def _quadratic_below(q: Poly, box: RatInterval, width: Fraction) -> list[RatInterval]:
    """Outer spans of {q < 0} on the box for deg(q) <= 2."""
    if degree(q) <= 0:
        return [box] if q and q[0] < 0 else []
    if degree(q) == 1:
        c0, c1 = q
        edge = -c0 / c1
        if c1 > 0:
            return [interval(box.lo, min(edge, box.hi))] if edge > box.lo else []
        return [interval(max(edge, box.lo), box.hi)] if edge < box.hi else []
    c0, c1, c2 = q
    disc = c1 * c1 - 4 * c2 * c0
    if disc <= 0:
        return [box] if c2 < 0 else []
    sq_lo, sq_hi = _sqrt_brackets(disc, width * 2 * abs(c2))
    if c2 > 0:
        lo = max((-c1 - sq_hi) / (2 * c2), box.lo)
        hi = min((-c1 + sq_hi) / (2 * c2), box.hi)
        return [interval(lo, hi)] if lo < hi else []
    # Downward parabola: negative outside the root gap, so the gap is
    # rounded inward (sq_lo) to keep the two tails outer.
    gap_lo = (-c1 + sq_lo) / (2 * c2)
    gap_hi = (-c1 - sq_lo) / (2 * c2)
    out = []
    if gap_lo > box.lo:
        out.append(interval(box.lo, min(gap_lo, box.hi)))
    if gap_hi < box.hi:
        out.append(interval(max(gap_hi, box.lo), box.hi))
    return merge_intervals(out)


def _below_spans(
    g: Poly, bound: Fraction, box: RatInterval, width: Fraction
) -> list[RatInterval]:
    """Outer spans of {|g| < bound} on the box."""
    if bound <= 0:
        return []
    if degree(g) <= 2:
        upper = _quadratic_below(poly_add(g, poly((-bound,))), box, width)
        if not upper:
            return []
        lower = _quadratic_below(poly_add(poly_scale(g, -1), poly((-bound,))), box, width)
        return intersect_interval_lists(upper, lower)
    p = poly_add(poly_mul(g, g), poly((-bound * bound,)))
    return negative_spans(p, box, width)


def _at_least_spans(
    h: Poly, edge: Fraction, box: RatInterval, width: Fraction
) -> list[RatInterval]:
    """Outer spans of {|h| >= edge} on the box."""
    if edge <= 0:
        return [box]
    if degree(h) <= 0:
        value = h[0] if h else Fraction(0)
        return [box] if abs(value) >= edge else []
    if degree(h) == 1:
        # Exact: |c0 + c1 x| >= edge cuts the line at two rational points.
        c0, c1 = h
        left = (-edge - c0) / c1
        right = (edge - c0) / c1
        left, right = min(left, right), max(left, right)
        out = []
        if left >= box.lo:
            out.append(interval(box.lo, min(left, box.hi)))
        if right <= box.hi:
            out.append(interval(max(right, box.lo), box.hi))
        return merge_intervals(out)
    p = poly_add(poly((edge * edge,)), poly_scale(poly_mul(h, h), -1))
    return nonpositive_spans(p, box, width)


def _split_to_length(
    pieces: Sequence[RatInterval], cap: Fraction
) -> list[RatInterval]:
    """Subdivide pieces so every part has length <= cap (cap > 0)."""
    out: list[RatInterval] = []
    for piece in pieces:
        if piece.length <= cap:
            out.append(piece)
            continue
        parts = math.ceil(piece.length / cap)
        step = piece.length / parts
        for k in range(parts):
            out.append(interval(piece.lo + k * step, piece.lo + (k + 1) * step))
    return out


def _scalar_power(base: ScalarLike, exponent: Rational) -> AlgebraicScalar:
    """base**exponent, collapsed to an exact rational whenever possible."""
    bs = coerce_scalar(base)
    e = as_fraction(exponent)
    if bs.is_rational:
        c = bs.as_fraction()
        if e.denominator == 1 and (c != 0 or e >= 0):
            return coerce_scalar(c**e.numerator)
        if c > 0:
            root = nth_root_fraction(c**e.numerator, e.denominator)
            if root is not None:
                return coerce_scalar(root)
    return bs**e


def band_edges(
    r: WeightVector, b: ScalarLike, t: int, ell: int
) -> tuple[AlgebraicScalar, AlgebraicScalar]:
    """Derivative-band boundaries b**(gamma t - (1+gamma) ell) and the
    next edge up."""
    gamma = r.gamma
    lower = _scalar_power(b, gamma * t - (1 + gamma) * ell)
    upper = _scalar_power(b, gamma * t - (1 + gamma) * (ell - 1))
    return lower, upper


def stratum_count(n: int, t: int) -> int:
    """Largest band index used at scale t."""
    return t // (2 * n) + 1


def residual_edge(
    n: int, c1: Fraction, r: WeightVector, b: ScalarLike, t: int
) -> AlgebraicScalar:
    """Upper derivative edge of the low-derivative residual regime."""
    eps = Fraction(1, 2 * n)
    return coerce_scalar(n * c1) * _scalar_power(b, (r.gamma - eps) * t)


def _band_edge_rationals(
    r: WeightVector, b: AlgebraicScalar, t: int, ell: int
) -> tuple[Fraction, Fraction | None]:
    """Outward-rounded rational band edges; band 0 is top-open so that
    the bands plus the residual exhaust every derivative magnitude."""
    lower_edge, upper_edge = band_edges(r, b, t, ell)
    lower = lower_edge.rational_lower()
    return lower, None if ell == 0 else upper_edge.rational_upper()


def _band_restriction(
    h: Poly,
    edges: tuple[Fraction, Fraction | None],
    box: RatInterval,
    width: Fraction,
) -> list[RatInterval]:
    """Outer spans of {x : |h(x)| lies in the band} on the box."""
    lower, upper = edges
    spans = _at_least_spans(h, lower, box, width)
    if upper is not None and spans:
        spans = intersect_interval_lists(spans, _below_spans(h, upper, box, width))
    return spans


def d1_cover(
    t: int,
    ell: int,
    r: WeightVector,
    b: ScalarLike,
    kappa: ScalarLike,
    f: PolyCurve,
    a0: int,
    a: Sequence[int],
    constants: PropertyFConstants,
) -> DangerousCover:
    """Outer cover of one generator's dangerous set within one band.

    The pieces satisfy both the band length bound
    kappa * b**(-(1+gamma)(t-ell)) and the stratified cardinality cap;
    an unsatisfiable band yields an empty cover, not an error.
    """
    if t < 1 or ell < 0:
        raise PreconditionViolated("need t >= 1 and ell >= 0")
    if f.n != r.n or f.n != constants.n:
        raise MismatchedParams("curve, weights and constants must agree on n")
    a = tuple(int(x) for x in a)
    if all(x == 0 for x in a):
        raise PreconditionViolated("generator needs a nonzero curve part")
    b_s, kappa_s = coerce_scalar(b), coerce_scalar(kappa)
    for weight, coefficient in zip(r.entries, a):
        if _scalar_power(b_s, weight * t).compare(abs(coefficient)) <= 0:
            raise PreconditionViolated("generator coefficient out of its box")

    box = constants.interval
    gamma = r.gamma
    length_bound = kappa_s * _scalar_power(b_s, -(1 + gamma) * (t - ell))
    cap = length_bound.rational_lower()
    width = cap / 4096
    eps_up = (kappa_s * _scalar_power(b_s, Fraction(-t))).rational_upper()
    g = f.combination(a, a0)
    h = derivative(g)

    g_spans = _below_spans(g, eps_up, box, width)
    if g_spans:
        edges = _band_edge_rationals(r, b_s, t, ell)
        spans = intersect_interval_lists(
            g_spans, _band_restriction(h, edges, box, width)
        )
    else:
        spans = []
    pieces = _split_to_length(spans, cap)
    return DangerousCover(
        generator=(a0, *a),
        level=(t, ell),
        intervals=tuple(pieces),
        length_bound=length_bound,
        count_bound=constants.count_bound(),
        banded=True,
    )


@dataclass(frozen=True)
class UnionEntry:
    generator: tuple[int, ...]
    cover: DangerousCover


@dataclass(frozen=True)
class TelemetryRow:
    """Non-certifying per-run statistics for one dangerous union."""

    t: int
    box_points: int
    union_measure: Fraction
    wall_seconds: float

    def csv(self) -> str:
        return f"{self.t},{self.box_points},{float(self.union_measure)!r},{self.wall_seconds:.6f}"

    @staticmethod
    def csv_header() -> str:
        return "t,box_points,union_measure,wall_seconds"


def _a_box(r: WeightVector, b: AlgebraicScalar, t: int) -> list[int]:
    return [strict_int_bound(_scalar_power(b, weight * t)) for weight in r.entries]


def _box_iter(limits: Sequence[int]) -> Iterator[tuple[int, ...]]:
    if not limits:
        yield ()
        return
    head, tail = limits[0], limits[1:]
    for rest in _box_iter(tail):
        for v in range(-head, head + 1):
            yield (v, *rest)


def dangerous_union(
    t: int,
    r: WeightVector,
    b: ScalarLike,
    kappa: ScalarLike,
    f: PolyCurve,
    box: RatInterval,
    constants: PropertyFConstants | None = None,
    budget: int = DEFAULT_UNION_BUDGET,
    telemetry: list[TelemetryRow] | None = None,
) -> list[UnionEntry]:
    """All nonempty stratified dangerous covers meeting the box.

    Every x in the box admitting |a_0 + a.f(x)| < kappa * b**-t with a
    nonzero and inside its weight box lies in some returned cover piece,
    so an interval disjoint from every piece is certified safe.  Each
    generator contributes banded covers per derivative band plus one
    residual cover for the low-derivative regime.
    """
    started = time.perf_counter()
    if t < 0:
        raise PreconditionViolated("negative scale")
    if f.n != r.n:
        raise MismatchedParams("curve and weights must agree on n")
    if constants is None:
        constants = property_f([f], box)
    if not constants.interval.contains_interval(box):
        raise PreconditionViolated("box must lie inside the certified interval")
    b_s, kappa_s = coerce_scalar(b), coerce_scalar(kappa)
    if kappa_s.compare(0) <= 0 or kappa_s.compare(1) >= 0:
        raise PreconditionViolated("kappa must lie in (0, 1)")

    limits = _a_box(r, b_s, t)
    volume = 1
    for lim in limits:
        volume *= 2 * lim + 1
    if volume > budget:
        raise BoxTooLarge(f"generator box holds {volume} points (budget {budget})")

    n = f.n
    eps_up = (kappa_s * _scalar_power(b_s, Fraction(-t))).rational_upper()
    ell_top = stratum_count(n, t)
    res_edge_up = residual_edge(n, constants.c1, r, b_s, t).rational_upper()
    gamma = r.gamma
    length_bounds = [
        kappa_s * _scalar_power(b_s, -(1 + gamma) * (t - ell))
        for ell in range(ell_top + 1)
    ]
    caps = [lb.rational_lower() for lb in length_bounds]
    width = min(caps) / 4096
    count_cap = constants.count_bound()
    edge_table = [_band_edge_rationals(r, b_s, t, ell) for ell in range(ell_top + 1)]

    out: list[UnionEntry] = []
    for a in _box_iter(limits):
        if all(x == 0 for x in a):
            continue
        g_free = f.combination(a, 0)
        h = derivative(g_free)
        restrictions = [
            _band_restriction(h, edges, box, width) for edges in edge_table
        ]
        res_restriction = _below_spans(h, res_edge_up, box, width)
        value_range = eval_interval(g_free, box)
        a0_lo = math.ceil(-value_range.hi - eps_up)
        a0_hi = math.floor(-value_range.lo + eps_up)
        for a0 in range(a0_lo, a0_hi + 1):
            g = poly_add(g_free, poly((a0,)))
            g_spans = _below_spans(g, eps_up, box, width)
            if not g_spans:
                continue
            generator = (a0, *a)
            for ell in range(ell_top + 1):
                spans = intersect_interval_lists(g_spans, restrictions[ell])
                if not spans:
                    continue
                pieces = _split_to_length(spans, caps[ell])
                out.append(
                    UnionEntry(
                        generator,
                        DangerousCover(
                            generator=generator,
                            level=(t, ell),
                            intervals=tuple(pieces),
                            length_bound=length_bounds[ell],
                            count_bound=count_cap,
                            banded=True,
                        ),
                    )
                )
            res_spans = intersect_interval_lists(g_spans, res_restriction)
            if res_spans:
                worst = max(piece.length for piece in res_spans)
                out.append(
                    UnionEntry(
                        generator,
                        DangerousCover(
                            generator=generator,
                            level=(t, ell_top + 1),
                            intervals=tuple(res_spans),
                            length_bound=coerce_scalar(worst),
                            count_bound=len(res_spans),
                            banded=False,
                        ),
                    )
                )
    if telemetry is not None:
        merged = union_pieces(out)
        telemetry.append(
            TelemetryRow(
                t=t,
                box_points=volume,
                union_measure=sum((p.length for p in merged), Fraction(0)),
                wall_seconds=time.perf_counter() - started,
            )
        )
    return out


def union_pieces(entries: Sequence[UnionEntry]) -> list[RatInterval]:
    """Normalized union of all cover pieces."""
    pieces: list[RatInterval] = []
    for entry in entries:
        pieces.extend(entry.cover.intervals)
    return merge_intervals(pieces)


@dataclass(frozen=True)
class TangencyPoint:
    """A critical point of a.f at which the value is exactly integral."""

    a: tuple[int, ...]
    location: RatInterval
    value: int


def tangency_points(
    f: PolyCurve,
    box: RatInterval,
    coefficient_bound: int,
) -> list[TangencyPoint]:
    """Generators tangent to an integer level inside the box.

    Scans |a_i| <= coefficient_bound for critical points x* of a.f in
    the box where a.f(x*) is an exact integer.  Near such points the
    dangerous set of (a, -a.f(x*)) has a second-order, anomalously wide
    piece at every scale, so construction intervals should avoid them.
    """
    found: list[TangencyPoint] = []
    limits = [coefficient_bound] * f.n
    for a in _box_iter(limits):
        if all(x == 0 for x in a):
            continue
        g = f.combination(a, 0)
        h = derivative(g)
        if degree(h) < 1:
            continue
        if degree(h) == 1:
            root = -h[0] / h[1]
            if box.contains(root):
                value = eval_at(g, root)
                if value.denominator == 1:
                    found.append(TangencyPoint(a, interval(root, root), int(value)))
            continue
        for enc in isolate_roots(h, box):
            enc = refine_enclosure(h, enc, box.length / 4096)
            if enc.lo == enc.hi:
                value = eval_at(g, enc.lo)
                if value.denominator == 1:
                    found.append(TangencyPoint(a, enc, int(value)))
                continue
            # Irrational critical point: tangency requires g - k and h
            # to share a root, detectable through a nontrivial gcd.
            val_range = eval_interval(g, enc)
            for k in range(math.ceil(val_range.lo), math.floor(val_range.hi) + 1):
                shared = poly_gcd(squarefree_part(h), poly_add(g, poly((-k,))))
                if degree(shared) >= 1 and count_distinct_roots(shared, enc) > 0:
                    found.append(TangencyPoint(a, enc, k))
    found.sort(key=lambda tp: (tp.location.lo, tp.location.hi, tp.a))
    return found


def suggest_interval(
    f: PolyCurve,
    box: RatInterval,
    coefficient_bound: int,
    min_length: Rational | None = None,
) -> RatInterval:
    """Longest tangency-free subinterval, slightly shrunk at the cuts."""
    points = tangency_points(f, box, coefficient_bound)
    cuts = [box.lo]
    for tp in points:
        cuts.extend((tp.location.lo, tp.location.hi))
    cuts.append(box.hi)
    best: RatInterval | None = None
    for lo, hi in zip(cuts[0::2], cuts[1::2]):
        if hi <= lo:
            continue
        pad = (hi - lo) / 16
        gap = interval(lo + pad, hi - pad)
        if best is None or gap.length > best.length:
            best = gap
    wanted = as_fraction(min_length) if min_length is not None else Fraction(0)
    if best is None or best.length == 0 or best.length < wanted:
        raise NoValidSubinterval("no tangency-free subinterval of the requested length")
    return best
