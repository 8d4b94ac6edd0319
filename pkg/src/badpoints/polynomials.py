"""Exact univariate polynomial arithmetic over the rationals.

Polynomials are dense coefficient tuples, constant term first, with no
trailing zeros (the zero polynomial is the empty tuple).  Everything here
is exact: evaluation, Sturm chains, root isolation and the sign-span
computations return rational data with outward rounding where a true
endpoint is irrational.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

from .core import (
    PreconditionViolated,
    RatInterval,
    Rational,
    as_fraction,
    interval,
)

Poly = tuple[Fraction, ...]


def poly(coeffs: Sequence[Rational]) -> Poly:
    """Normalize a coefficient sequence (constant first) into a Poly."""
    out = [as_fraction(c) for c in coeffs]
    while out and out[-1] == 0:
        out.pop()
    return tuple(out)


def degree(p: Poly) -> int:
    return len(p) - 1


def is_zero(p: Poly) -> bool:
    return not p


def poly_add(p: Poly, q: Poly) -> Poly:
    if len(p) < len(q):
        p, q = q, p
    out = list(p)
    for i, c in enumerate(q):
        out[i] += c
    return poly(out)


def poly_neg(p: Poly) -> Poly:
    return tuple(-c for c in p)


def poly_sub(p: Poly, q: Poly) -> Poly:
    return poly_add(p, poly_neg(q))


def poly_scale(p: Poly, c: Rational) -> Poly:
    c = as_fraction(c)
    if c == 0:
        return ()
    return tuple(c * a for a in p)


def poly_mul(p: Poly, q: Poly) -> Poly:
    if not p or not q:
        return ()
    out = [Fraction(0)] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        if a == 0:
            continue
        for j, b in enumerate(q):
            out[i + j] += a * b
    return poly(out)


def poly_shift(p: Poly, c: Rational) -> Poly:
    """p(x + c) by repeated Horner expansion."""
    c = as_fraction(c)
    out: Poly = ()
    for a in reversed(p):
        out = poly_add(poly_mul(out, (c, Fraction(1))), (a,))
    return out


def derivative(p: Poly) -> Poly:
    return poly(tuple(i * c for i, c in enumerate(p) if i >= 1))


def eval_at(p: Poly, x: Rational) -> Fraction:
    x = as_fraction(x)
    acc = Fraction(0)
    for c in reversed(p):
        acc = acc * x + c
    return acc


def eval_interval(p: Poly, box: RatInterval) -> RatInterval:
    """Interval Horner: a rational enclosure of p over the box."""
    lo = hi = Fraction(0)
    for c in reversed(p):
        cands = (lo * box.lo, lo * box.hi, hi * box.lo, hi * box.hi)
        lo, hi = min(cands) + c, max(cands) + c
    return interval(lo, hi)


def poly_divmod(p: Poly, q: Poly) -> tuple[Poly, Poly]:
    if not q:
        raise ZeroDivisionError("polynomial division by zero")
    rem = list(p)
    quo = [Fraction(0)] * max(0, len(p) - len(q) + 1)
    dq, lead = len(q) - 1, q[-1]
    while len(rem) - 1 >= dq and any(c != 0 for c in rem):
        while rem and rem[-1] == 0:
            rem.pop()
        if len(rem) - 1 < dq:
            break
        shift = len(rem) - 1 - dq
        factor = rem[-1] / lead
        quo[shift] = factor
        for i, c in enumerate(q):
            rem[shift + i] -= factor * c
    return poly(quo), poly(rem)


def poly_gcd(p: Poly, q: Poly) -> Poly:
    """Monic gcd via the Euclidean algorithm."""
    a, b = p, q
    while b:
        a, b = b, poly_divmod(a, b)[1]
    if not a:
        return ()
    return poly_scale(a, 1 / a[-1])


def squarefree_part(p: Poly) -> Poly:
    """p with repeated roots collapsed to simple ones (same root set)."""
    if degree(p) < 1:
        return p
    g = poly_gcd(p, derivative(p))
    if degree(g) < 1:
        return p
    return poly_divmod(p, g)[0]


def cauchy_root_bound(p: Poly) -> Fraction:
    """All real roots of p lie in [-B, B]."""
    if degree(p) < 1:
        return Fraction(1)
    lead = abs(p[-1])
    return 1 + max(abs(c) for c in p[:-1]) / lead


def sturm_chain(p: Poly) -> list[Poly]:
    chain = [p, derivative(p)]
    while chain[-1]:
        rem = poly_divmod(chain[-2], chain[-1])[1]
        if not rem:
            break
        chain.append(poly_neg(rem))
    return [q for q in chain if q]


def _sign_variations(chain: list[Poly], x: Fraction) -> int:
    signs = []
    for q in chain:
        v = eval_at(q, x)
        if v != 0:
            signs.append(1 if v > 0 else -1)
    return sum(1 for a, b in zip(signs, signs[1:]) if a != b)


def _deflate(p: Poly, root: Fraction) -> Poly:
    """Divide out (x - root); the remainder must vanish."""
    quo, rem = poly_divmod(p, poly((-root, 1)))
    if rem:
        raise PreconditionViolated(f"{root} is not a root")
    return quo


def count_distinct_roots(p: Poly, box: RatInterval) -> int:
    """Number of distinct real roots of p in the closed box."""
    if is_zero(p):
        raise PreconditionViolated("the zero polynomial has no root count")
    sf = squarefree_part(p)
    found = 0
    endpoints = (box.lo,) if box.lo == box.hi else (box.lo, box.hi)
    for endpoint in endpoints:
        if sf and degree(sf) >= 1 and eval_at(sf, endpoint) == 0:
            found += 1
            sf = _deflate(sf, endpoint)
    if degree(sf) < 1 or box.lo >= box.hi:
        return found
    chain = sturm_chain(sf)
    return found + _sign_variations(chain, box.lo) - _sign_variations(chain, box.hi)


def _interior_sample(lo: Fraction, hi: Fraction, p: Poly) -> Fraction:
    """A point in (lo, hi) that is not a root of p."""
    mid = (lo + hi) / 2
    if eval_at(p, mid) != 0:
        return mid
    step = (hi - lo) / 4
    while True:
        cand = mid + step
        if lo < cand < hi and eval_at(p, cand) != 0:
            return cand
        step /= 2


def isolate_roots(p: Poly, box: RatInterval) -> list[RatInterval]:
    """Disjoint rational enclosures, one distinct root of p in each.

    Exact rational roots come back as degenerate [r, r] intervals; other
    enclosures have endpoints that are not roots and exactly one simple
    root of the squarefree part strictly inside.  Sorted left to right.
    """
    if is_zero(p):
        raise PreconditionViolated("cannot isolate roots of the zero polynomial")
    sf = squarefree_part(p)
    out: list[RatInterval] = []
    endpoints = (box.lo,) if box.lo == box.hi else (box.lo, box.hi)
    for endpoint in endpoints:
        if degree(sf) >= 1 and eval_at(sf, endpoint) == 0:
            out.append(interval(endpoint, endpoint))
            sf = _deflate(sf, endpoint)
    if degree(sf) < 1 or box.lo >= box.hi:
        return sorted(out, key=lambda iv: iv.lo)
    chain = sturm_chain(sf)
    stack = [(box.lo, box.hi)]
    while stack:
        a, b = stack.pop()
        k = _sign_variations(chain, a) - _sign_variations(chain, b)
        if k == 0:
            continue
        if k == 1:
            out.append(interval(a, b))
            continue
        m = (a + b) / 2
        if eval_at(sf, m) == 0:
            # Exact root at the split point: record it, deflate, restart
            # the bisection on both halves with a fresh chain.
            out.append(interval(m, m))
            sf = _deflate(sf, m)
            if degree(sf) < 1:
                break
            chain = sturm_chain(sf)
            stack.extend(((a, m), (m, b)))
            continue
        stack.append((a, m))
        stack.append((m, b))
    return sorted(out, key=lambda iv: iv.lo)


def refine_enclosure(p: Poly, enc: RatInterval, width: Rational) -> RatInterval:
    """Shrink a one-root enclosure by sign bisection to the target width."""
    width = as_fraction(width)
    if width <= 0:
        raise PreconditionViolated("refinement width must be positive")
    if enc.lo == enc.hi:
        return enc
    sf = squarefree_part(p)
    # Roots sitting exactly on an endpoint belong to neighbouring
    # enclosures; strip them so the sign bisection sees the inner root.
    for endpoint in (enc.lo, enc.hi):
        if degree(sf) >= 1 and eval_at(sf, endpoint) == 0:
            sf = _deflate(sf, endpoint)
    lo, hi = enc.lo, enc.hi
    slo = eval_at(sf, lo)
    if slo == 0 or eval_at(sf, hi) == 0:
        raise PreconditionViolated("enclosure endpoints must not be roots")
    neg = slo < 0
    while hi - lo > width:
        mid = (lo + hi) / 2
        v = eval_at(sf, mid)
        if v == 0:
            return interval(mid, mid)
        if (v < 0) == neg:
            lo = mid
        else:
            hi = mid
    return interval(lo, hi)


def _glued_spans(
    p: Poly, box: RatInterval, width: Fraction, keep_touch: bool
) -> list[RatInterval]:
    """Outer spans of {p < 0}; with keep_touch also isolated {p = 0} points."""
    if is_zero(p):
        return [] if not keep_touch else [box]
    if degree(p) < 1:
        neg = p[0] < 0 or (keep_touch and p[0] == 0)
        return [box] if neg else []
    if box.lo == box.hi:
        v = eval_at(p, box.lo)
        return [box] if v < 0 or (keep_touch and v == 0) else []
    sf = squarefree_part(p)
    encs = [refine_enclosure(p, e, width) for e in isolate_roots(p, box)]
    # Open segments between consecutive enclosures carry a constant sign.
    cuts: list[Fraction] = [box.lo]
    for e in encs:
        cuts.extend((e.lo, e.hi))
    cuts.append(box.hi)
    seg_is_neg: list[bool] = []
    for a, b in zip(cuts[0::2], cuts[1::2]):
        if a >= b:
            seg_is_neg.append(False)
            continue
        seg_is_neg.append(eval_at(p, _interior_sample(a, b, sf)) < 0)
    spans: list[RatInterval] = []
    for i, neg in enumerate(seg_is_neg):
        if neg:
            out_lo = box.lo if i == 0 else encs[i - 1].lo
            out_hi = box.hi if i == len(encs) else encs[i].hi
            spans.append(interval(out_lo, out_hi))
        elif keep_touch and i < len(encs):
            spans.append(encs[i])
    return merge_intervals(spans)


def negative_spans(p: Poly, box: RatInterval, width: Rational) -> list[RatInterval]:
    """Outer rational cover of {x in box : p(x) < 0}, one piece per span.

    Irrational span endpoints are replaced by enclosure bounds no more
    than `width` away, always rounded outward.
    """
    return _glued_spans(p, box, as_fraction(width), keep_touch=False)


def nonpositive_spans(p: Poly, box: RatInterval, width: Rational) -> list[RatInterval]:
    """Outer rational cover of {x in box : p(x) <= 0} (touch roots kept)."""
    return _glued_spans(p, box, as_fraction(width), keep_touch=True)


def merge_intervals(parts: Sequence[RatInterval]) -> list[RatInterval]:
    """Union of closed intervals as a sorted list of disjoint intervals."""
    items = sorted(parts, key=lambda iv: (iv.lo, iv.hi))
    out: list[RatInterval] = []
    for iv in items:
        if out and iv.lo <= out[-1].hi:
            if iv.hi > out[-1].hi:
                out[-1] = interval(out[-1].lo, iv.hi)
        else:
            out.append(iv)
    return out


def intersect_interval_lists(
    a: Sequence[RatInterval], b: Sequence[RatInterval]
) -> list[RatInterval]:
    """Pairwise intersection of two disjoint sorted interval lists."""
    out: list[RatInterval] = []
    i = j = 0
    a, b = list(a), list(b)
    while i < len(a) and j < len(b):
        lo, hi = max(a[i].lo, b[j].lo), min(a[i].hi, b[j].hi)
        if lo <= hi:
            out.append(interval(lo, hi))
        if a[i].hi <= b[j].hi:
            i += 1
        else:
            j += 1
    return out


def poly_det(matrix: Sequence[Sequence[Poly]]) -> Poly:
    """Determinant of a square polynomial matrix by cofactor expansion."""
    k = len(matrix)
    if any(len(row) != k for row in matrix):
        raise PreconditionViolated("polynomial determinant needs a square matrix")
    if k == 0:
        return poly((1,))
    if k == 1:
        return matrix[0][0]
    acc: Poly = ()
    for j in range(k):
        if is_zero(matrix[0][j]):
            continue
        minor = [[row[c] for c in range(k) if c != j] for row in matrix[1:]]
        term = poly_mul(matrix[0][j], poly_det(minor))
        acc = poly_add(acc, term) if j % 2 == 0 else poly_sub(acc, term)
    return acc
