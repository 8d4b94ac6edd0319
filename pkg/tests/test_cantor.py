"""Nested construction: run arithmetic, level builds, removal sums."""

import bisect
import random
import warnings
from fractions import Fraction as F

import pytest

from badpoints.cantor import (
    ConstructionParams,
    Level,
    RSequence,
    build_r_sequence,
    check_survivor,
    compute_dq,
    dimension_lower_bound,
    dq_supremum,
    extract_point,
    intersect_sequences,
    run_count,
    run_indices,
    run_intersect,
    run_subdivide,
    run_subtract,
    run_union,
    scaling_ratio,
    subdivide,
    survivor_sample,
    sweep_parameters,
)
from badpoints.core import (
    BoxTooLarge,
    BudgetExceeded,
    EmptySearch,
    LevelMissing,
    MismatchedParams,
    NotFound,
    PreconditionViolated,
    interval,
    weights,
)
from badpoints.dangerous import dangerous_union, monomial_curve, property_f

HALF = weights(F(1, 2), F(1, 2))
SKEW = weights(F(2, 3), F(1, 3))


# ---------------------------------------------------------------------------
# Run arithmetic.


def test_run_ops_exact():
    a = ((0, 5), (8, 12))
    b = ((3, 9), (11, 20))
    assert run_union(a, b) == ((0, 20),)
    assert run_intersect(a, b) == ((3, 5), (8, 9), (11, 12))
    assert run_subtract(a, b) == ((0, 3), (9, 11))
    assert run_subtract(b, a) == ((5, 8), (12, 20))
    assert run_count(a) == 9
    assert run_subdivide(((2, 4),), 10) == ((20, 40),)
    assert list(run_indices(((0, 2), (5, 6)))) == [0, 1, 5]


def test_run_union_merges_touching():
    assert run_union(((0, 5),), ((5, 9),)) == ((0, 9),)


def test_run_ops_match_set_arithmetic():
    rng = random.Random(1905)
    for _ in range(200):
        def rand_runs():
            pairs = []
            for _ in range(rng.randrange(5)):
                a = rng.randrange(60)
                pairs.append((a, a + rng.randrange(1, 12)))
            out = []
            for a, b in sorted(pairs):
                if out and a <= out[-1][1]:
                    out[-1] = (out[-1][0], max(out[-1][1], b))
                else:
                    out.append((a, b))
            return tuple(out)

        x, y = rand_runs(), rand_runs()
        sx, sy = set(run_indices(x)), set(run_indices(y))
        assert set(run_indices(run_union(x, y))) == sx | sy
        assert set(run_indices(run_intersect(x, y))) == sx & sy
        assert set(run_indices(run_subtract(x, y))) == sx - sy
        assert run_count(x) == len(sx)


def test_subdivide_thirds():
    parts = subdivide([interval(0, 1)], 3)
    assert parts == (
        interval(0, F(1, 3)),
        interval(F(1, 3), F(2, 3)),
        interval(F(2, 3), 1),
    )
    assert subdivide([interval(2, 3)], 1) == (interval(2, 3),)
    with pytest.raises(PreconditionViolated):
        subdivide([interval(0, 1)], 0)


# ---------------------------------------------------------------------------
# Parameters.


def line_setup():
    f = monomial_curve(1, interval(F(1, 100), F(99, 100)))
    return f, property_f([f], f.domain)


def veronese_setup(lo=F(51, 100), hi=F(9, 16)):
    f = monomial_curve(2, interval(lo, hi))
    return f, property_f([f], f.domain)


def test_scaling_ratio_exact_cases():
    b = scaling_ratio(16, weights(1))
    assert b.is_rational and b.as_fraction() == 4
    b = scaling_ratio(8, HALF)
    assert b.is_rational and b.as_fraction() == 4
    b = scaling_ratio(8, SKEW)
    assert not b.is_rational
    assert (b ** F(5, 3)).compare(8) == 0


def test_params_validation():
    f, consts = line_setup()
    with pytest.raises(PreconditionViolated):
        ConstructionParams(r=weights(1), curve=f, constants=consts,
                           branching=3, depth_offset=2, q_max=4)
    with pytest.raises(PreconditionViolated):
        ConstructionParams(r=weights(1), curve=f, constants=consts,
                           branching=16, depth_offset=0, q_max=4)
    with pytest.raises(MismatchedParams):
        ConstructionParams(r=HALF, curve=f, constants=consts,
                           branching=16, depth_offset=2, q_max=4)


def test_params_threshold_warning():
    f, consts = line_setup()
    with pytest.warns(UserWarning, match="threshold"):
        ConstructionParams(r=weights(1), curve=f, constants=consts,
                           branching=16, depth_offset=2, q_max=2)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        p = ConstructionParams(r=weights(1), curve=f, constants=consts,
                               branching=256, depth_offset=1, q_max=1)
    assert p.kappa == F(1, 256)


def test_child_geometry():
    f, consts = line_setup()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        p = ConstructionParams(r=weights(1), curve=f, constants=consts,
                               branching=16, depth_offset=2, q_max=4)
    assert p.child_width(0) == consts.interval.length
    child = p.child_interval(2, 0)
    assert child.lo == consts.interval.lo
    assert child.length == consts.interval.length / 256
    last = p.child_interval(1, 15)
    assert last.hi == consts.interval.hi


# ---------------------------------------------------------------------------
# Removal sums on handmade levels.


def handmade_seq(levels):
    f, consts = line_setup()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        p = ConstructionParams(r=weights(1), curve=f, constants=consts,
                               branching=16, depth_offset=2,
                               q_max=len(levels) - 1)
    return RSequence(p, tuple(levels))


def test_compute_dq_single_bucket():
    seq = handmade_seq([
        Level(0, ((0, 1),)),
        Level(1, ((3, 16),), {0: ((0, 3),)}),
        Level(2, ((48, 250),), {1: ((250, 253),)}),
    ])
    assert compute_dq(seq, 1) == F(1, 4) * 3
    assert compute_dq(seq, 2) == F(4, 16) * 3
    assert dq_supremum(seq) == F(3, 4)


def test_compute_dq_blocks_and_mixed_buckets():
    # indices 14..18 at q=2, bucket 1: blocks 0 holds {14,15}, block 1 holds
    # {16,17,18}, so the worst level-1 ancestor sees 3.
    seq = handmade_seq([
        Level(0, ((0, 1),)),
        Level(1, ((0, 16),)),
        Level(2, ((20, 200),), {1: ((14, 19),), 0: ((0, 5), (210, 212))}),
    ])
    expected = F(4, 16) * 3 + F(4, 16) ** 2 * 7
    assert compute_dq(seq, 2) == expected


def test_compute_dq_full_block_spanning_run():
    # a run across >= 3 ancestor blocks contains a full middle block
    seq = handmade_seq([
        Level(0, ((0, 1),)),
        Level(1, ((0, 1),)),
        Level(2, ((100, 101),), {1: ((10, 60),)}),
    ])
    assert compute_dq(seq, 2) == F(4, 16) * 16


def test_compute_dq_validation():
    seq = handmade_seq([Level(0, ((0, 1),)), Level(1, ((0, 16),))])
    assert compute_dq(seq, 1) == 0
    with pytest.raises(PreconditionViolated):
        compute_dq(seq, 0)
    with pytest.raises(LevelMissing):
        compute_dq(seq, 5)


def test_level_validation():
    with pytest.raises(PreconditionViolated):
        Level(2, ((0, 10),), {1: ((5, 7),)})
    with pytest.raises(PreconditionViolated):
        Level(2, ((0, 10),), {3: ((10, 12),)})


# ---------------------------------------------------------------------------
# Builds against a materialized-interval oracle.
#
# The oracle rebuilds the same levels with explicit interval lists and
# closed-overlap checks, no run arithmetic, and classifies each kill by the
# same first-win rule (residual, then bands by descending band index).


def oracle_build(params):
    R = params.branching
    start = params.start
    survivors = [0]
    history = []
    for q in range(1, params.q_max + 1):
        width = start.length / R**q
        children = [c * R + j for c in survivors for j in range(R)]
        t = q - params.depth_offset
        removed = {}
        if t >= 1:
            entries = dangerous_union(t, params.r, params.base, params.kappa,
                                      params.curve, start,
                                      constants=params.constants)
            groups = {}
            for e in entries:
                if e.cover.banded:
                    key = ("band", e.cover.level[1])
                else:
                    key = ("res", -1)
                groups.setdefault(key, []).extend(e.cover.intervals)
            order = []
            if ("res", -1) in groups:
                order.append((0, groups[("res", -1)]))
            for key in sorted(groups, key=lambda k: -k[1]):
                if key[0] != "band":
                    continue
                ell = key[1]
                p = min(max(t + 3 - 2 * ell, 0), q - 1)
                order.append((p, groups[key]))

            def merge(pieces):
                merged = []
                for piece in sorted(pieces, key=lambda iv: (iv.lo, iv.hi)):
                    if merged and piece.lo <= merged[-1][1]:
                        merged[-1] = (merged[-1][0], max(merged[-1][1], piece.hi))
                    else:
                        merged.append((piece.lo, piece.hi))
                return merged

            order = [(p, merge(pieces)) for p, pieces in order]
            alive = []
            for idx in children:
                lo = start.lo + idx * width
                hi = lo + width
                hit_bucket = None
                for p, merged in order:
                    pos = bisect.bisect_right([piece[0] for piece in merged], hi) - 1
                    if pos >= 0 and merged[pos][1] >= lo:
                        hit_bucket = p
                        break
                if hit_bucket is None:
                    alive.append(idx)
                else:
                    removed.setdefault(hit_bucket, []).append(idx)
            survivors = alive
        else:
            survivors = children
        history.append((q, sorted(survivors), {p: sorted(v) for p, v in removed.items()}))
    return history


def oracle_dq(q, removed, R):
    total = F(0)
    for p, indices in removed.items():
        per_block = {}
        for idx in indices:
            key = idx // R ** (q - p)
            per_block[key] = per_block.get(key, 0) + 1
        total += F(4, R) ** (q - p) * max(per_block.values())
    return total


@pytest.fixture(scope="module")
def line_seq():
    f, consts = line_setup()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        p = ConstructionParams(r=weights(1), curve=f, constants=consts,
                               branching=16, depth_offset=2, q_max=4)
        return p, build_r_sequence(p)


@pytest.fixture(scope="module")
def tangency_seq():
    f, consts = veronese_setup(F(2, 5), F(3, 5))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        p = ConstructionParams(r=HALF, curve=f, constants=consts,
                               branching=8, depth_offset=2, q_max=4)
        return p, build_r_sequence(p)


def assert_matches_oracle(params, seq):
    for q, surv, removed in oracle_build(params):
        lev = seq.level(q)
        assert list(run_indices(lev.survivors)) == surv
        assert {p: list(run_indices(runs)) for p, runs in lev.removed.items()} == removed
        if q >= 1 and removed:
            assert compute_dq(seq, q) == oracle_dq(q, removed, params.branching)


def test_line_build_matches_oracle(line_seq):
    params, seq = line_seq
    assert_matches_oracle(params, seq)


def test_line_build_frozen_counts(line_seq):
    _, seq = line_seq
    assert [seq.level(q).count for q in range(5)] == [1, 16, 256, 4084, 65044]
    assert compute_dq(seq, 3) == F(27, 32)
    assert compute_dq(seq, 4) == F(27, 16)
    assert seq.first_empty is None


def test_tangency_build_matches_oracle(tangency_seq):
    params, seq = tangency_seq
    assert_matches_oracle(params, seq)


def test_tangency_point_is_removed_into_residual_bucket(tangency_seq):
    params, seq = tangency_seq
    lev = seq.level(4)
    assert 0 in lev.removed
    # the always-dangerous point 1/2 dies as soon as generators reach it
    idx = int((F(1, 2) - params.start.lo) / params.child_width(4))
    assert not run_intersect(lev.survivors, ((idx, idx + 1),))
    assert any(a <= idx < b for a, b in lev.removed[0])


def test_full_levels_before_offset(line_seq):
    params, seq = line_seq
    for q in range(params.depth_offset + 1):
        lev = seq.level(q)
        assert lev.count == params.branching**q
        assert not lev.removed


def test_nesting_and_partition_invariants(tangency_seq):
    params, seq = tangency_seq
    R = params.branching
    for q in range(1, seq.depth + 1):
        lev = seq.level(q)
        parents = seq.level(q - 1).survivors
        children = run_subdivide(parents, R)
        stated = lev.survivors
        for p, runs in lev.removed.items():
            assert not run_intersect(runs, stated)
            stated = run_union(stated, runs)
        assert stated == children
        for idx in run_indices(lev.survivors):
            child = params.child_interval(q, idx)
            parent = params.child_interval(q - 1, idx // R)
            assert parent.contains_interval(child)
            assert child.length == params.start.length / R**q


def test_survivor_intervals_materialization(tangency_seq):
    params, seq = tangency_seq
    pieces = seq.survivor_intervals(2)
    assert len(pieces) == 64
    assert pieces[0].lo == params.start.lo
    assert all(a.hi <= b.lo for a, b in zip(pieces, pieces[1:]))
    with pytest.raises(BoxTooLarge):
        seq.survivor_intervals(4, limit=10)


def test_build_budget_exceeded():
    f, consts = line_setup()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        p = ConstructionParams(r=weights(1), curve=f, constants=consts,
                               branching=16, depth_offset=1, q_max=2, budget=3)
        with pytest.raises(BudgetExceeded):
            build_r_sequence(p)


def test_empty_level_is_reported_not_fatal():
    # a start interval buried inside the neighborhood of 1/2 dies at once
    f = monomial_curve(1, interval(F(1, 2) - F(1, 2048), F(1, 2) + F(1, 2048)))
    consts = property_f([f], f.domain)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        p = ConstructionParams(r=weights(1), curve=f, constants=consts,
                               branching=16, depth_offset=1, q_max=3)
    with pytest.warns(UserWarning, match="no survivors"):
        seq = build_r_sequence(p)
    assert seq.first_empty == 2
    assert seq.level(2).count == 0
    assert seq.level(3).count == 0
    with pytest.raises(EmptySearch):
        extract_point(seq)


# ---------------------------------------------------------------------------
# Certification of survivors.


def test_survivor_sample_certifies(line_seq):
    _, seq = line_seq
    points = survivor_sample(seq, 4, 4, seed=11)
    assert points == survivor_sample(seq, 4, 4, seed=11)
    assert all(check_survivor(seq, 4, x) for x in points)


def test_check_survivor_rejects_outside_points(line_seq):
    params, seq = line_seq
    lev = seq.level(4)
    bucket = sorted(lev.removed)[0]
    dead_idx = next(run_indices(lev.removed[bucket]))
    dead = params.child_interval(4, dead_idx)
    with pytest.raises(PreconditionViolated):
        check_survivor(seq, 4, dead.midpoint)


def test_extract_point_options(line_seq):
    params, seq = line_seq
    left = extract_point(seq)
    mid = extract_point(seq, pick="midmost")
    assert left == extract_point(seq, pick="leftmost")
    assert left.lo < mid.lo
    assert left.length == params.child_width(seq.depth)
    assert any(a <= int((left.lo - params.start.lo) / params.child_width(4)) < b
               for a, b in seq.level(4).survivors)
    with pytest.raises(PreconditionViolated):
        extract_point(seq, pick="rightmost")


# ---------------------------------------------------------------------------
# Intersections.


@pytest.fixture(scope="module")
def veronese_pair():
    f, consts = veronese_setup()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ph = ConstructionParams(r=HALF, curve=f, constants=consts,
                                branching=8, depth_offset=2, q_max=4)
        ps = ConstructionParams(r=SKEW, curve=f, constants=consts,
                                branching=8, depth_offset=2, q_max=4)
        return build_r_sequence(ph), build_r_sequence(ps)


def test_intersection_of_self_is_identity(line_seq):
    _, seq = line_seq
    both = intersect_sequences([seq, seq])
    for q in range(seq.depth + 1):
        assert both.level(q).survivors == seq.level(q).survivors
    for q in range(1, seq.depth + 1):
        assert compute_dq(both, q) == compute_dq(seq, q)


def test_intersection_inclusion_and_subadditivity(veronese_pair):
    a, b = veronese_pair
    both = intersect_sequences([a, b])
    assert both.first_empty is None
    for q in range(1, both.depth + 1):
        surv = both.level(q).survivors
        assert run_intersect(surv, a.level(q).survivors) == surv
        assert run_intersect(surv, b.level(q).survivors) == surv
        assert surv == run_intersect(a.level(q).survivors, b.level(q).survivors)
        assert compute_dq(both, q) <= compute_dq(a, q) + compute_dq(b, q)
        lev = both.level(q)
        dead = run_subtract(run_subdivide(both.level(q - 1).survivors, 8), surv)
        stated = ()
        for runs in lev.removed.values():
            stated = run_union(stated, runs)
        assert stated == dead


def test_intersection_mismatches(line_seq, veronese_pair):
    _, line = line_seq
    a, _ = veronese_pair
    with pytest.raises(MismatchedParams):
        intersect_sequences([line, a])
    with pytest.raises(PreconditionViolated):
        intersect_sequences([])


# ---------------------------------------------------------------------------
# Dimension bound and sweep.


def test_dimension_lower_bound_values():
    assert dimension_lower_bound(4, 1) == F(1, 2)
    assert dimension_lower_bound(8, 1) == F(2, 3)
    assert dimension_lower_bound(16, F(1, 2)) == F(3, 4)
    assert dimension_lower_bound(4, F(3, 2)) is None
    with pytest.raises(PreconditionViolated):
        dimension_lower_bound(3, 1)


def test_dimension_lower_bound_is_certified_and_monotone():
    import math

    prev = F(0)
    for R in range(4, 65):
        got = dimension_lower_bound(R, 1)
        assert got is not None
        assert float(got) <= 1 - math.log(2) / math.log(R) + 1e-12
        assert got >= prev
        prev = got


def test_sweep_rejects_small_offset_then_passes():
    f, consts = line_setup()
    params, seq = sweep_parameters(weights(1), f, consts,
                                   branchings=[16], offsets=[1, 2], q_extra=1)
    assert params.depth_offset == 2
    assert seq.aborted_at is None and seq.first_empty is None
    assert dq_supremum(seq) == F(27, 32)


def test_sweep_exhausted_grid_raises():
    f, consts = line_setup()
    with pytest.raises(NotFound, match="removal sum"):
        sweep_parameters(weights(1), f, consts,
                         branchings=[16], offsets=[1], q_extra=1)


def test_irrational_base_build_runs():
    f, consts = veronese_setup()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        p = ConstructionParams(r=SKEW, curve=f, constants=consts,
                               branching=8, depth_offset=2, q_max=4)
    seq = build_r_sequence(p)
    assert [seq.level(q).count for q in range(5)] == [1, 8, 64, 512, 4012]
