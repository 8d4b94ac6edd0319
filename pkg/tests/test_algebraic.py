"""Polynomial and algebraic-number margins, small polynomials, fibering."""

import itertools
import random
from fractions import Fraction as F

import pytest

from badpoints.algebraic import (
    AlgebraicWitness,
    BkMarginClaim,
    IntPolynomial,
    MarginBracket,
    badr_to_bk,
    bn_margin,
    bstar_margin,
    fiber_map,
    inclusion_check,
    minkowski_polynomial,
    poly_map,
    veronese,
    wstar_witnesses,
)
from badpoints.certify import BadCertificate, MarginWitness, dual_margin, simultaneous_margin
from badpoints.core import (
    DegenerateFiber,
    NotFound,
    PreconditionViolated,
    WrongWeights,
    interval,
    weights,
)
from badpoints.dangerous import monomial_curve
from badpoints.polynomials import poly

GOLDEN = F(987, 1597)


# ---------------------------------------------------------------------------
# Types.


def test_int_polynomial_basics():
    p = IntPolynomial((3, 0, -2))
    assert p.degree == 2
    assert p.height == 3
    assert p.value(F(1, 2)) == F(5, 2)
    assert p.derivative().coefficients == (0, -4)
    assert IntPolynomial((0,)).is_zero
    assert IntPolynomial((0, 0, 7)).degree == 2
    with pytest.raises(PreconditionViolated):
        IntPolynomial(())
    with pytest.raises(PreconditionViolated):
        IntPolynomial((F(1, 2),))


def test_algebraic_witness_certification():
    w = AlgebraicWitness(IntPolynomial((-2, 0, 1)), interval(1, 2), 2)
    lo, hi = w.distance_bounds(F(3, 2))
    assert lo == 0 and hi == F(1, 2)
    lo, hi = w.distance_bounds(3)
    assert lo == 1 and hi == 2
    AlgebraicWitness(IntPolynomial((-1, 2)), interval(F(1, 2), F(1, 2)), 2)
    with pytest.raises(PreconditionViolated):
        AlgebraicWitness(IntPolynomial((-2, 0, 1)), interval(2, 3), 2)
    with pytest.raises(PreconditionViolated):
        MarginBracket(F(1), F(1, 2))


# ---------------------------------------------------------------------------
# Polynomial value margins.


def brute_bn(xi, n, h_max, nonvanishing=False):
    best = None
    for coeffs in itertools.product(range(-h_max, h_max + 1), repeat=n + 1):
        if not any(coeffs):
            continue
        p = IntPolynomial(coeffs)
        value = p.height**n * abs(p.value(xi))
        if nonvanishing and value == 0:
            continue
        if best is None or value < best:
            best = value
    return best


def test_bn_margin_rational_center_is_zero():
    margin, witness = bn_margin(0, 1, 1)
    assert margin == 0
    assert witness.value(0) == 0
    margin, _ = bn_margin(F(7, 10), 2, 50)
    assert margin == 0


def test_bn_margin_matches_brute_force():
    cases = [
        (F(5, 7), 1, 12, False),
        (F(5, 7), 2, 6, False),
        (F(9, 13), 2, 5, False),
        (F(7, 10), 2, 6, True),
        (F(-3, 11), 1, 9, False),
    ]
    for xi, n, h, nonv in cases:
        margin, witness = bn_margin(xi, n, h, nonvanishing=nonv)
        assert margin == brute_bn(xi, n, h, nonv)
        value = witness.height**n * abs(witness.value(xi))
        assert value == margin
        assert witness.height <= h and witness.degree <= n


def test_bn_margin_golden_equals_q_norm_form():
    margin, witness = bn_margin(GOLDEN, 1, 50)
    brute = min(q * abs(q * GOLDEN - round(q * GOLDEN)) for q in range(1, 51))
    assert margin == brute == F(610, 1597)
    assert abs(witness.coefficients[1]) <= 50


def test_bn_margin_matches_simultaneous_margin_n1():
    rng = random.Random(2718)
    for _ in range(40):
        xi = F(rng.randrange(1, 10**6), 10**6 + 3)
        margin, _ = bn_margin(xi, 1, 25)
        cert = simultaneous_margin((xi,), weights(1), 25)
        assert margin == cert.margin


def test_bn_margin_decreases_with_box_and_caps_at_one():
    xi = F(608135, 10**6 + 33)
    values = [bn_margin(xi, 1, h)[0] for h in (1, 4, 16, 64, 256)]
    assert all(a >= b for a, b in zip(values, values[1:]))
    assert all(v <= 1 for v in values)
    assert values[-1] < values[0]


def test_bn_margin_validation():
    with pytest.raises(PreconditionViolated):
        bn_margin(F(1, 2), 0, 5)
    with pytest.raises(PreconditionViolated):
        bn_margin(F(1, 2), 1, 0)


# ---------------------------------------------------------------------------
# Distance margins to algebraic numbers.


def test_bstar_margin_hits_exact_rational():
    bracket, witness = bstar_margin(F(1, 2), 1, 2)
    assert bracket.lower == bracket.upper == 0
    assert witness.root_enclosure.lo == witness.root_enclosure.hi == F(1, 2)
    assert witness.height == 2
    assert witness.poly.value(F(1, 2)) == 0


def brute_bstar_linear(xi, h_max):
    # n=1: every root is rational, exact distances
    best = None
    for q in range(1, h_max + 1):
        for p in range(-h_max, h_max + 1):
            from math import gcd

            if gcd(p, q) != 1:
                continue
            h = max(abs(p), q)
            if h > h_max:
                continue
            value = F(h) ** 2 * abs(xi - F(p, q))
            if best is None or value < best:
                best = value
    return best


def test_bstar_margin_golden_matches_linear_brute():
    bracket, witness = bstar_margin(GOLDEN, 1, 30)
    brute = brute_bstar_linear(GOLDEN, 30)
    assert bracket.lower == bracket.upper == brute
    assert witness.root_enclosure.lo == witness.root_enclosure.hi


def test_bstar_margin_quadratic_against_sympy_roots():
    import sympy

    xi, n, h_max = F(7, 10), 2, 4
    bracket, witness = bstar_margin(xi, n, h_max)
    assert bracket.lower <= bracket.upper
    assert bracket.upper - bracket.lower < F(2, h_max ** (n + 1))

    # independent scan: sympy real roots of every primitive box polynomial,
    # heights accumulated the same way, distances at 60-digit precision
    x = sympy.Symbol("x")
    table = {}
    for coeffs in itertools.product(range(-h_max, h_max + 1), repeat=n + 1):
        if not any(coeffs[1:]):
            continue
        from math import gcd

        g = 0
        for c in coeffs:
            g = gcd(g, abs(c))
        if g != 1:
            continue
        height = max(abs(c) for c in coeffs)
        sp = sympy.Poly(list(reversed(coeffs)), x, domain="ZZ")
        for fac, _ in sp.factor_list()[1]:
            if fac.degree() < 1:
                continue
            key = tuple(int(c) for c in reversed(fac.all_coeffs()))
            if key[-1] < 0:
                key = tuple(-c for c in key)
            table[key] = min(table.get(key, height), height)
    best = None
    for key, height in table.items():
        sp = sympy.Poly(list(reversed(key)), x, domain="ZZ")
        for root in sympy.real_roots(sp.as_expr()):
            dist = abs(sympy.Rational(xi.numerator, xi.denominator) - root)
            value = sympy.Integer(height) ** (n + 1) * dist
            if best is None or value < best:
                best = value
    lower = sympy.Rational(bracket.lower.numerator, bracket.lower.denominator)
    upper = sympy.Rational(bracket.upper.numerator, bracket.upper.denominator)
    assert bool(lower <= best) and bool(best <= upper)


def test_bstar_enclosure_width_contract():
    xi, n, h_max = F(7, 10), 2, 4
    _, witness = bstar_margin(xi, n, h_max)
    enc = witness.root_enclosure
    assert enc.hi - enc.lo < F(1, h_max ** (n + 2))


def test_height_surrogate_uses_low_multiples():
    # (x+1)(x^2-3x+1) = x^3-2x^2-2x+1 has height 2, its quadratic factor 3:
    # the box at height 2 must already record the quadratic roots at height 2
    bracket2, witness2 = bstar_margin(F(38, 100), 3, 2)
    assert witness2.poly.coefficients == (1, -3, 1)
    assert witness2.height == 2


def test_wstar_zero_center():
    got = wstar_witnesses(0, 1, 1, (1, 5))
    assert len(got) == 1
    assert got[0].poly.coefficients == (0, 1)
    assert got[0].height == 1
    assert got[0].root_enclosure.lo == 0


def test_wstar_empty_range():
    assert wstar_witnesses(0, 1, 1, (3, 2)) == []
    assert wstar_witnesses(0, 1, 1, (1, 0)) == []


def test_wstar_matches_linear_brute():
    from math import gcd

    xi, c2, h_lo, h_hi = F(1, 3), F(2), 1, 6
    got = wstar_witnesses(xi, 1, c2, (h_lo, h_hi))
    expected = set()
    for q in range(1, h_hi + 1):
        for p in range(-h_hi, h_hi + 1):
            if gcd(p, q) != 1:
                continue
            h = max(abs(p), q)
            if not h_lo <= h <= h_hi:
                continue
            if abs(xi - F(p, q)) < c2 * F(h) ** (-2):
                expected.add((F(p, q), h))
    assert {(w.root_enclosure.lo, w.height) for w in got} == expected
    for w in got:
        _, upper = w.distance_bounds(xi)
        assert upper < c2 * F(w.height) ** (-2)


# ---------------------------------------------------------------------------
# Small polynomials at a point.


def test_minkowski_polynomial_at_zero():
    p = minkowski_polynomial(0, 2, 5, F(1, 7))
    assert any(p.coefficients)
    assert abs(p.value(0)) < F(1, 7) * F(1, 25)
    assert abs(p.derivative().value(0)) < F(5) / F(1, 7)
    assert all(abs(c) <= 5 for c in p.coefficients[2:])


def test_minkowski_polynomial_example_system():
    xi = F(7, 10)
    c1, _ = bn_margin(xi, 2, 50, nonvanishing=True)
    assert c1 == F(2, 25)
    eps0 = F(1, 25) * c1
    p = minkowski_polynomial(xi, 2, 5, eps0)
    assert any(p.coefficients)
    assert abs(p.value(xi)) < eps0 * F(1, 25)
    assert abs(p.derivative().value(xi)) < F(5) / eps0
    assert all(abs(c) <= 5 for c in p.coefficients[2:])


def test_minkowski_polynomial_not_found_below_threshold():
    with pytest.raises(NotFound, match="no nonzero vector"):
        minkowski_polynomial(F(7, 10), 2, 5, F(1, 1000), deriv_bound=5)


def test_minkowski_polynomial_validation():
    with pytest.raises(PreconditionViolated):
        minkowski_polynomial(F(1, 2), 2, 1, F(1, 2))
    with pytest.raises(PreconditionViolated):
        minkowski_polynomial(F(1, 2), 2, 5, 0)


# ---------------------------------------------------------------------------
# Moment curve pipeline.


def test_veronese_components_and_wronskians():
    dom = interval(F(1, 10), F(9, 10))
    v2 = veronese(2, dom)
    assert v2.components == monomial_curve(2, dom).components
    assert veronese(3, dom).wronskian() == poly((12,))
    for n in range(1, 6):
        w = veronese(n, dom).wronskian()
        assert len(w) == 1 and w[0] > 0


def test_badr_to_bk_translation_and_theorem():
    xi = F(409, 1024)
    cert = dual_margin((xi, xi * xi), weights(F(1, 2), F(1, 2)), 256)
    claim = badr_to_bk(cert, 2)
    assert claim.height_bound == 16
    assert claim.xi == xi
    assert claim.margin == min(F(cert.margin), 1)
    observed, _ = bn_margin(xi, 2, claim.height_bound)
    assert observed >= claim.margin
    assert claim.verify_against(observed)


def test_badr_to_bk_k1_weights():
    xi = F(409, 1024)
    cert = dual_margin((xi, xi * xi), weights(1, 0), 64)
    claim = badr_to_bk(cert, 1)
    assert claim.height_bound == 64
    observed, _ = bn_margin(xi, 1, 64)
    assert observed >= claim.margin


def test_badr_to_bk_rejections():
    xi = F(409, 1024)
    cert = dual_margin((xi, xi * xi), weights(F(1, 2), F(1, 2)), 64)
    with pytest.raises(WrongWeights):
        badr_to_bk(cert, 1)
    skew = dual_margin((xi, xi * xi), weights(F(2, 3), F(1, 3)), 64)
    with pytest.raises(WrongWeights):
        badr_to_bk(skew, 2)
    off_curve = BadCertificate(
        kind="dual",
        point=(xi, xi),
        weights=weights(F(1, 2), F(1, 2)),
        bound=64,
        margin=F(1, 100),
        witness=MarginWitness((1, 1), 4, F(1, 100)),
    )
    with pytest.raises(PreconditionViolated):
        badr_to_bk(off_curve, 2)


# ---------------------------------------------------------------------------
# Fibering.


def unit_ball_map(components):
    dom = interval(F(1, 10), F(9, 10))
    return poly_map(components, (dom, interval(-2, 2)))


def test_fiber_map_gives_moment_curve():
    fm = unit_ball_map([{(1, 0): 1}, {(0, 1): 1}])
    curve = fiber_map(fm, 2, (1,))
    assert curve.components == veronese(2, fm.box[0]).components


def test_fiber_map_symmetric_functions():
    fm = unit_ball_map([{(1, 0): 1, (0, 1): 1}, {(1, 1): 1}])
    curve = fiber_map(fm, 2, (1,))
    assert curve.components[0] == poly((0, 1, 1))
    assert curve.components[1] == poly((0, 0, 0, 1))
    w = curve.wronskian()
    assert w == poly((0, 6, 6))


def test_fiber_map_three_variables_spreads_exponents():
    dom = interval(F(1, 10), F(9, 10))
    fm = poly_map(
        [{(1, 0, 0): 1}, {(0, 1, 0): 1}, {(0, 0, 1): 1}],
        (dom, interval(-2, 2), interval(-2, 2)),
    )
    curve = fiber_map(fm, 2, (1, F(1, 2)))
    assert curve.components[0] == poly((0, 1))
    assert curve.components[1] == poly((0, 0, 1))
    assert curve.components[2] == poly((0, 0, 0, 0, F(1, 2)))


def test_fiber_map_degenerate_and_domain_errors():
    fm = unit_ball_map([{(0, 1): 1}, {(1, 1): 1}])
    with pytest.raises(DegenerateFiber):
        fiber_map(fm, 2, (0,))
    with pytest.raises(PreconditionViolated):
        fiber_map(fm, 2, (3,))
    with pytest.raises(PreconditionViolated):
        fiber_map(fm, 1, (1,))
    with pytest.raises(PreconditionViolated):
        fiber_map(fm, 2, (1, 1))


def test_fiber_map_duplicate_components_degenerate():
    fm = unit_ball_map([{(1, 0): 1}, {(1, 0): 1}])
    with pytest.raises(DegenerateFiber):
        fiber_map(fm, 2, (1,))


# ---------------------------------------------------------------------------
# The inclusion chain.


def test_inclusion_check_on_samples():
    rng = random.Random(1123)
    for _ in range(6):
        xi = F(rng.randrange(10**5, 9 * 10**5), 10**6 + 3)
        report = inclusion_check(xi, 2, 40)
        assert report.ok
        assert report.poly_margin > 0
        assert report.reduced_height == 8
        assert report.distance_bracket.lower >= report.poly_margin / report.taylor_constant


def test_inclusion_check_small_height_rejected():
    with pytest.raises(PreconditionViolated):
        inclusion_check(F(1, 3), 2, 4)
