"""Dangerous-interval covers: certified constants, band covers, unions."""

import random
from fractions import Fraction as F

import pytest

from badpoints.core import (
    BoxTooLarge,
    NoValidSubinterval,
    PreconditionViolated,
    interval,
    weights,
)
from badpoints.dangerous import (
    DangerousCover,
    PolyCurve,
    PropertyFConstants,
    TelemetryRow,
    band_edges,
    d1_cover,
    dangerous_union,
    monomial_curve,
    property_f,
    stratum_count,
    suggest_interval,
    tangency_points,
    union_pieces,
)
from badpoints.lattice import delta_certify_ge_one, flow_lattice
from badpoints.polynomials import merge_intervals, poly

HALF = weights(F(1, 2), F(1, 2))


def test_curve_validation():
    curve = monomial_curve(2, interval(0, 1))
    assert curve.n == 2
    assert curve.point(F(1, 2)) == (F(1, 2), F(1, 4))
    assert curve.wronskian() == poly((2,))
    with pytest.raises(PreconditionViolated):
        PolyCurve((poly((0, 1)), poly((1, 1))), interval(0, 1))  # 1, x, 1+x
    with pytest.raises(PreconditionViolated):
        PolyCurve((poly((0, 2)), poly((0, 1))), interval(0, 1))  # 2x, x
    with pytest.raises(PreconditionViolated):
        PolyCurve((), interval(0, 1))


def test_property_f_veronese_example():
    curve = monomial_curve(2, interval(0, 1))
    c = property_f([curve], interval(F(1, 10), F(9, 10)))
    assert c.interval == interval(F(1, 10), F(9, 10))
    assert c.c0 == F(1, 10)
    assert c.c1 == 3
    assert c.c2 == F(1, 120)
    assert c.delta0 == F(1, 480)
    assert c.count_bound() == 554785


def test_property_f_shrinks_past_derivative_zero():
    curve = monomial_curve(2, interval(-1, 2))
    c = property_f([curve], interval(F(-1, 2), F(9, 10)))
    # f_2' = 2x vanishes at 0, so the certified interval moves right of it.
    assert c.interval.lo > 0
    assert c.interval == interval(F(51, 640), F(541, 640))
    assert c.c0 == F(51, 640)
    assert c.c1 == 3
    assert c.c2 == F(17, 2560)
    assert c.delta0 == F(17, 10240)


def test_property_f_rejects_impossible_min_length():
    curve = monomial_curve(2, interval(-1, 2))
    with pytest.raises(NoValidSubinterval):
        property_f([curve], interval(F(-1, 2), F(9, 10)), min_length=2)
    with pytest.raises(NoValidSubinterval):
        property_f([curve], interval(F(-1, 2), F(9, 10)), min_length=F(9, 10))


def test_constants_validation():
    good = dict(n=2, c0=F(1, 10), c1=F(3), c2=F(1, 120), delta0=F(1, 480),
                interval=interval(F(1, 10), F(9, 10)))
    PropertyFConstants(**good)
    with pytest.raises(PreconditionViolated):
        PropertyFConstants(**{**good, "c2": F(1, 100)})
    with pytest.raises(PreconditionViolated):
        PropertyFConstants(**{**good, "c0": F(3, 2), "c2": F(3, 2) / 12})
    with pytest.raises(PreconditionViolated):
        PropertyFConstants(**{**good, "delta0": 0})


def line_setup():
    curve = monomial_curve(1, interval(0, 1))
    box = interval(F(1, 100), F(99, 100))
    return curve, box, property_f([curve], box)


def test_property_f_line():
    _, box, c = line_setup()
    assert c.interval == box
    assert (c.c0, c.c1, c.c2) == (F(1, 2), F(3, 2), F(1, 4))
    assert c.delta0 == box.length  # second derivative vanishes


def test_d1_cover_linear_single_interval():
    curve, box, c = line_setup()
    cover = d1_cover(2, 1, weights(1), 2, F(1, 4), curve, 0, (1,), c)
    # {|x| < 1/16} clipped to the box, derivative 1 inside band [1, 4).
    assert cover.intervals == (interval(F(1, 100), F(1, 16)),)
    assert cover.length_bound.as_fraction() == F(1, 16)
    assert cover.banded and cover.level == (2, 1)


def test_d1_cover_unsatisfiable_band_is_empty():
    curve, box, c = line_setup()
    # Band 2 asks for |h| in [1/4, 1) but h = 1 identically.
    cover = d1_cover(2, 2, weights(1), 2, F(1, 4), curve, 0, (1,), c)
    assert cover.is_empty
    assert cover.level == (2, 2)


def test_d1_cover_preconditions():
    curve, box, c = line_setup()
    with pytest.raises(PreconditionViolated):
        d1_cover(0, 0, weights(1), 2, F(1, 4), curve, 0, (1,), c)
    with pytest.raises(PreconditionViolated):
        d1_cover(2, 1, weights(1), 2, F(1, 4), curve, 0, (0,), c)
    with pytest.raises(PreconditionViolated):
        d1_cover(2, 1, weights(1), 2, F(1, 4), curve, 0, (4,), c)


def test_d1_cover_veronese_near_unit():
    curve = monomial_curve(2, interval(0, 2))
    box = interval(F(9, 10), F(11, 10))
    c = property_f([curve], box)
    assert (c.c0, c.c1) == (F(1, 2), F(33, 10))
    cover = d1_cover(2, 1, HALF, 4, F(1, 4), curve, -1, (0, 1), c)
    # x**2 - 1 is small near 1 and h = 2x sits in band [1/2, 4).
    assert len(cover.intervals) == 1
    piece = cover.intervals[0]
    for x in (1 - F(1, 129), F(1), 1 + F(1, 129)):
        assert abs(x * x - 1) < F(1, 64)  # truly dangerous probes
        assert piece.contains(x)
    assert cover.length_bound.compare(piece.length) >= 0
    assert cover.length_bound.as_fraction() == F(1, 32)


def test_union_line_matches_farey_oracle():
    curve, box, _ = line_setup()
    entries = dangerous_union(2, weights(1), 2, F(1, 4), curve, box)
    got = union_pieces(entries)

    # Direct oracle: closures of {x : |a1 x - k| < 1/16}, 1 <= a1 <= 3.
    radius = F(1, 16)
    raw = []
    for a1 in (1, 2, 3):
        for k in range(0, a1 + 1):
            piece = interval(
                max((k - radius) / a1, box.lo), min((k + radius) / a1, box.hi)
            )
            if piece.length >= 0:
                raw.append(piece)
    assert got == merge_intervals(raw)
    gens = {e.generator for e in entries}
    assert all(1 <= abs(a1) <= 3 for _, a1 in gens)
    assert (0, 1) in gens and (-1, 2) in gens


def test_union_t_zero_is_empty():
    curve, box, c = line_setup()
    assert dangerous_union(0, weights(1), 2, F(1, 4), curve, box, c) == []


def test_union_parameter_validation():
    curve, box, c = line_setup()
    with pytest.raises(PreconditionViolated):
        dangerous_union(2, weights(1), 2, F(3, 2), curve, box, c)
    with pytest.raises(PreconditionViolated):
        dangerous_union(-1, weights(1), 2, F(1, 4), curve, box, c)
    with pytest.raises(BoxTooLarge):
        dangerous_union(2, weights(1), 2, F(1, 4), curve, box, c, budget=3)


def veronese_setup():
    curve = monomial_curve(2, interval(0, 1))
    box = interval(F(51, 100), F(9, 16))
    return curve, box, property_f([curve], box)


def test_union_kappa_monotone():
    curve, box, c = veronese_setup()
    for t in (2, 3):
        wide = union_pieces(dangerous_union(t, HALF, 4, F(1, 8), curve, box, c))
        narrow = union_pieces(dangerous_union(t, HALF, 4, F(1, 16), curve, box, c))
        for piece in narrow:
            assert any(w.contains_interval(piece) for w in wide)


def test_union_soundness_against_lattice_certificate():
    curve, box, c = veronese_setup()
    t, kappa = 3, F(1, 4)
    pieces = union_pieces(dangerous_union(t, HALF, 4, kappa, curve, box, c))
    rng = random.Random(20240)
    dangerous_hits = 0
    for _ in range(25):
        x = box.lo + F(rng.randint(0, 10**6), 10**6) * box.length
        ok, witness = delta_certify_ge_one(flow_lattice(HALF, 4, t, kappa, curve.point(x)))
        if not ok:
            dangerous_hits += 1
            assert any(p.contains(x) for p in pieces), (x, witness)
        else:
            # Safe points may still sit inside the outer cover, but a point
            # clear of the cover must certify.
            if not any(p.contains(x) for p in pieces):
                assert ok
    assert dangerous_hits > 0  # the check is not vacuous


def test_union_cover_invariants():
    curve, box, c = veronese_setup()
    t = 3
    entries = dangerous_union(t, HALF, 4, F(1, 8), curve, box, c)
    assert entries
    ell_top = stratum_count(2, t)
    seen_banded = seen_residual = 0
    for entry in entries:
        cover = entry.cover
        assert cover.generator == entry.generator
        assert not cover.is_empty
        assert len(cover.intervals) <= cover.count_bound
        for piece in cover.intervals:
            assert cover.length_bound.compare(piece.length) >= 0
            assert box.contains_interval(piece)
        if cover.banded:
            seen_banded += 1
            assert cover.level[0] == t and 0 <= cover.level[1] <= ell_top
        else:
            seen_residual += 1
            assert cover.level == (t, ell_top + 1)
    assert seen_banded and seen_residual


def test_union_telemetry_row():
    curve, box, c = line_setup()
    rows: list[TelemetryRow] = []
    entries = dangerous_union(2, weights(1), 2, F(1, 4), curve, box, c, telemetry=rows)
    assert len(rows) == 1
    row = rows[0]
    assert row.t == 2 and row.box_points == 7
    assert row.union_measure == sum(p.length for p in union_pieces(entries))
    assert row.wall_seconds >= 0
    assert TelemetryRow.csv_header() == "t,box_points,union_measure,wall_seconds"
    assert row.csv().startswith("2,7,")


def test_band_edges_partition():
    # Consecutive bands share an edge: lower(ell) == upper(ell + 1).
    for t in (1, 3, 6):
        for ell in range(stratum_count(2, t) + 1):
            lo, _ = band_edges(HALF, 4, t, ell)
            _, up_next = band_edges(HALF, 4, t, ell + 1)
            assert lo.compare(up_next) == 0


def test_cover_bound_enforcement():
    with pytest.raises(PreconditionViolated):
        DangerousCover((0, 1), (1, 0), (interval(0, 1),), F(1, 2), 5)
    with pytest.raises(PreconditionViolated):
        DangerousCover((0, 1), (1, 0), (interval(0, F(1, 4)),) * 3, F(1, 2), 2)


def test_tangency_points_quadratic():
    curve = monomial_curve(2, interval(0, 2))
    box = interval(F(2, 5), F(3, 5))
    points = tangency_points(curve, box, 8)
    assert [(tp.a, tp.value) for tp in points] == [
        ((-8, 8), -2),
        ((-4, 4), -1),
        ((4, -4), 1),
        ((8, -8), 2),
    ]
    assert all(tp.location == interval(F(1, 2), F(1, 2)) for tp in points)


def test_tangency_points_irrational_critical_point():
    # x**4 - 4x**2 + 4 = (x**2 - 2)**2 is tangent to level -4 at sqrt(2).
    curve = monomial_curve(4, interval(0, 2))
    box = interval(F(13, 10), F(3, 2))
    points = tangency_points(curve, box, 4)
    assert sorted(tp.a for tp in points) == [(0, -4, 0, 1), (0, 4, 0, -1)]
    for tp in points:
        assert tp.location.lo ** 2 < 2 < tp.location.hi ** 2
        assert abs(tp.value) == 4


def test_suggest_interval_avoids_tangency():
    curve = monomial_curve(2, interval(0, 2))
    box = interval(F(2, 5), F(3, 5))
    picked = suggest_interval(curve, box, 8)
    assert picked == interval(F(13, 32), F(79, 160))
    assert not picked.contains(F(1, 2))
    with pytest.raises(NoValidSubinterval):
        suggest_interval(curve, box, 8, min_length=F(1, 2))
    # The construction interval is tangency-free for every |a_i| < 4**3.
    assert tangency_points(curve, interval(F(51, 100), F(9, 16)), 63) == []


def test_residual_cover_catches_tangency_neighborhood():
    curve = monomial_curve(2, interval(0, 1))
    box = interval(F(2, 5), F(3, 5))
    c = property_f([curve], box)
    entries = dangerous_union(4, HALF, 4, F(1, 4), curve, box, c)
    # 4x - 4x**2 - 1 vanishes to second order at 1/2: the derivative band
    # machinery must route that neighborhood through the residual cover.
    residual = [
        e for e in entries if e.generator == (-1, 4, -4) and not e.cover.banded
    ]
    assert len(residual) == 1
    assert any(p.contains(F(1, 2)) for p in residual[0].cover.intervals)
    banded_zero = [
        e
        for e in entries
        if e.generator == (-1, 4, -4) and e.cover.banded and e.cover.level[1] == 0
    ]
    assert banded_zero == []  # |h| <= 4/5 never reaches band 0
