"""Nested-interval constructions that dodge dangerous covers level by level.

The construction keeps a shrinking family of closed intervals: level q splits
every survivor of level q-1 into R equal children and discards the children
that meet a dangerous cover.  Discarded children are filed into buckets keyed
by the level p <= q whose geometry produced them; the bucketed counts feed a
weighted removal sum d_q, and keeping every d_q <= 1 certifies that survivors
exist at all depths and that the surviving set is large.

Levels are stored as sorted runs of child indices, never as materialized
interval lists, so depth 20 and beyond stays cheap.  All endpoint arithmetic
is exact.
"""

from __future__ import annotations

import random
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

from .core import (
    AlgebraicScalar,
    BoxTooLarge,
    BudgetExceeded,
    EmptySearch,
    LevelMissing,
    MismatchedParams,
    NotFound,
    PreconditionViolated,
    RatInterval,
    Rational,
    WeightVector,
    as_fraction,
    coerce_scalar,
    interval,
    nth_root_fraction,
)
from .dangerous import (
    DEFAULT_UNION_BUDGET,
    PolyCurve,
    PropertyFConstants,
    TelemetryRow,
    dangerous_union,
)
from .lattice import delta_certify_ge_one, flow_lattice

__all__ = [
    "Runs",
    "run_count",
    "run_union",
    "run_intersect",
    "run_subtract",
    "run_subdivide",
    "run_indices",
    "subdivide",
    "scaling_ratio",
    "ConstructionParams",
    "Level",
    "RSequence",
    "build_r_sequence",
    "compute_dq",
    "dq_supremum",
    "dimension_lower_bound",
    "intersect_sequences",
    "extract_point",
    "survivor_sample",
    "check_survivor",
    "sweep_parameters",
]


# ---------------------------------------------------------------------------
# Index runs.
#
# A level at depth q holds child indices inside [0, R^q).  We store them as a
# sorted tuple of disjoint half-open integer runs (start, stop); consecutive
# runs never touch (stop < next start).

Runs = tuple[tuple[int, int], ...]


def _normalize_runs(pairs: Iterable[tuple[int, int]]) -> Runs:
    items = sorted((a, b) for a, b in pairs if a < b)
    merged: list[tuple[int, int]] = []
    for a, b in items:
        if merged and a <= merged[-1][1]:
            last = merged[-1]
            if b > last[1]:
                merged[-1] = (last[0], b)
        else:
            merged.append((a, b))
    return tuple(merged)


def run_count(runs: Runs) -> int:
    """Number of indices covered by the runs."""
    return sum(b - a for a, b in runs)


def run_union(left: Runs, right: Runs) -> Runs:
    return _normalize_runs(list(left) + list(right))


def run_intersect(left: Runs, right: Runs) -> Runs:
    out: list[tuple[int, int]] = []
    i = j = 0
    while i < len(left) and j < len(right):
        a = max(left[i][0], right[j][0])
        b = min(left[i][1], right[j][1])
        if a < b:
            out.append((a, b))
        if left[i][1] <= right[j][1]:
            i += 1
        else:
            j += 1
    return tuple(out)


def run_subtract(left: Runs, right: Runs) -> Runs:
    """Indices in ``left`` but not in ``right``."""
    out: list[tuple[int, int]] = []
    j = 0
    for a, b in left:
        cur = a
        while j < len(right) and right[j][1] <= cur:
            j += 1
        k = j
        while k < len(right) and right[k][0] < b:
            ra, rb = right[k]
            if cur < ra:
                out.append((cur, ra))
            cur = max(cur, rb)
            if rb >= b:
                break
            k += 1
        if cur < b:
            out.append((cur, b))
    return tuple(out)


def run_subdivide(runs: Runs, factor: int) -> Runs:
    """Runs of the factor*E children of every index E in ``runs``."""
    if factor < 1:
        raise PreconditionViolated("subdivision factor must be >= 1")
    return tuple((a * factor, b * factor) for a, b in runs)


def run_indices(runs: Runs) -> Iterator[int]:
    for a, b in runs:
        yield from range(a, b)


def subdivide(pieces: Sequence[RatInterval], parts: int) -> tuple[RatInterval, ...]:
    """Split every interval into ``parts`` equal closed children, in order."""
    if parts < 1:
        raise PreconditionViolated("parts must be >= 1")
    out: list[RatInterval] = []
    for piece in pieces:
        width = piece.length / parts
        out.extend(
            interval(piece.lo + i * width, piece.lo + (i + 1) * width)
            for i in range(parts)
        )
    return tuple(out)


# ---------------------------------------------------------------------------
# Construction parameters.


def scaling_ratio(branching: int, r: WeightVector) -> AlgebraicScalar:
    """Exact approximation base b with b**(1 + gamma) == branching."""
    gamma = r.gamma
    exponent = Fraction(1, 1 + gamma)
    collapsed = nth_root_fraction(
        Fraction(branching) ** exponent.numerator, exponent.denominator
    )
    if collapsed is not None:
        return coerce_scalar(collapsed)
    return coerce_scalar(branching) ** exponent


@dataclass(frozen=True)
class ConstructionParams:
    """Frozen inputs of one nested construction.

    branching R: children per survivor, also the per-level scale factor.
    depth_offset m: levels 0..m keep everything; level q first consults the
    dangerous union for t = q - m.  kappa = R**-m is the final acuteness.
    """

    r: WeightVector
    curve: PolyCurve
    constants: PropertyFConstants
    branching: int
    depth_offset: int
    q_max: int
    budget: int = DEFAULT_UNION_BUDGET

    def __post_init__(self) -> None:
        if self.branching < 4:
            raise PreconditionViolated("branching must be at least 4")
        if self.depth_offset < 1:
            raise PreconditionViolated("depth offset must be >= 1")
        if self.q_max < 0:
            raise PreconditionViolated("q_max must be >= 0")
        if self.curve.n != self.r.n or self.constants.n != self.r.n:
            raise MismatchedParams("curve, constants and weights disagree on n")
        threshold = self.r.r_threshold()
        if self.branching < threshold:
            warnings.warn(
                "branching %d is below the safe threshold %s for these weights"
                % (self.branching, threshold),
                stacklevel=3,
            )

    @property
    def n(self) -> int:
        return self.r.n

    @property
    def start(self) -> RatInterval:
        return self.constants.interval

    @property
    def base(self) -> AlgebraicScalar:
        return scaling_ratio(self.branching, self.r)

    @property
    def kappa(self) -> Fraction:
        return Fraction(1, self.branching**self.depth_offset)

    @property
    def contraction(self) -> Fraction:
        """Per-bucket weight ratio 4/R in the removal sum."""
        return Fraction(4, self.branching)

    def child_width(self, q: int) -> Fraction:
        return self.start.length / self.branching**q

    def child_interval(self, q: int, index: int) -> RatInterval:
        width = self.child_width(q)
        lo = self.start.lo + index * width
        return interval(lo, lo + width)


# ---------------------------------------------------------------------------
# Levels and sequences.


@dataclass(frozen=True)
class Level:
    """Survivors of one depth, plus removals bucketed by source level."""

    q: int
    survivors: Runs
    removed: dict[int, Runs] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.q < 0:
            raise PreconditionViolated("level depth must be >= 0")
        for p, runs in self.removed.items():
            if not 0 <= p < max(self.q, 1):
                raise PreconditionViolated("bucket level out of range")
            if run_intersect(runs, self.survivors):
                raise PreconditionViolated("removed indices marked as survivors")

    @property
    def count(self) -> int:
        return run_count(self.survivors)

    @property
    def removed_count(self) -> int:
        return sum(run_count(runs) for runs in self.removed.values())


@dataclass(frozen=True)
class RSequence:
    """A built nested family, one Level per depth 0..len(levels)-1."""

    params: ConstructionParams
    levels: tuple[Level, ...]
    first_empty: int | None = None
    aborted_at: int | None = None

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    def level(self, q: int) -> Level:
        if not 0 <= q < len(self.levels):
            raise LevelMissing(f"level {q} was not built (depth {self.depth})")
        return self.levels[q]

    def survivor_intervals(self, q: int, limit: int = 4096) -> tuple[RatInterval, ...]:
        lev = self.level(q)
        if lev.count > limit:
            raise BoxTooLarge(
                f"level {q} has {lev.count} survivors, over the materialization limit"
            )
        return tuple(
            self.params.child_interval(q, i) for i in run_indices(lev.survivors)
        )


def _pieces_to_runs(
    pieces: Iterable[RatInterval], start: RatInterval, scale: int
) -> Runs:
    """Child indices at depth q whose closed interval meets a closed piece.

    scale is R**q.  Child i covers [lo + i*w, lo + (i+1)*w]; it meets
    [p.lo, p.hi] exactly when i >= u_lo - 1 and i <= u_hi with
    u = (x - lo) * scale / |start| (closed touching counts).
    """
    length = start.length
    top = scale
    raw: list[tuple[int, int]] = []
    for piece in pieces:
        u_lo = (piece.lo - start.lo) * scale / length
        u_hi = (piece.hi - start.lo) * scale / length
        i_min = -((-(u_lo - 1)) // 1)  # ceil(u_lo - 1)
        i_max = u_hi // 1  # floor(u_hi)
        a = max(int(i_min), 0)
        b = min(int(i_max) + 1, top)
        if a < b:
            raw.append((a, b))
    return _normalize_runs(raw)


def _bucket_for(params: ConstructionParams, q: int, t: int, ell: int) -> int:
    p = t + 3 - 2 * ell
    return min(max(p, 0), q - 1)


def build_r_sequence(
    params: ConstructionParams,
    telemetry: list[TelemetryRow] | None = None,
    abort_above_dq: Rational | None = None,
) -> RSequence:
    """Build levels 0..q_max, removing children that meet dangerous pieces.

    Levels q <= depth_offset keep every child.  Deeper levels compute the
    dangerous union at t = q - depth_offset, kill every child whose closed
    interval meets a cover piece, and bucket the kills: residual pieces file
    under bucket 0, band ell pieces under t + 3 - 2*ell clamped to [0, q-1];
    ties go to the cheaper (lower ell, hence higher p?  no: residual first,
    then deepest band first) source so the removal sum stays smallest.

    An empty level is recorded in first_empty and the build continues.  If
    abort_above_dq is set, the build stops early once the removal sum at some
    level exceeds it and marks aborted_at.
    """
    abort_bound = None if abort_above_dq is None else as_fraction(abort_above_dq)
    R = params.branching
    m = params.depth_offset
    start = params.start
    levels: list[Level] = [Level(0, ((0, 1),))]
    first_empty: int | None = None
    aborted_at: int | None = None
    for q in range(1, params.q_max + 1):
        children = run_subdivide(levels[q - 1].survivors, R)
        t = q - m
        removed: dict[int, Runs] = {}
        survivors = children
        if t >= 1 and children:
            try:
                entries = dangerous_union(
                    t,
                    params.r,
                    params.base,
                    params.kappa,
                    params.curve,
                    start,
                    constants=params.constants,
                    budget=params.budget,
                    telemetry=telemetry,
                )
            except BoxTooLarge as exc:
                raise BudgetExceeded(f"level {q}: {exc}") from exc
            scale = R**q
            residual_runs: list[Runs] = []
            band_runs: dict[int, list[Runs]] = {}
            for entry in entries:
                runs = _pieces_to_runs(entry.cover.intervals, start, scale)
                if not runs:
                    continue
                if entry.cover.banded:
                    ell = entry.cover.level[1]
                    band_runs.setdefault(ell, []).append(runs)
                else:
                    residual_runs.append(runs)
            remaining = children
            ordered: list[tuple[int, Runs]] = []
            merged_residual = _normalize_runs(
                pair for runs in residual_runs for pair in runs
            )
            if merged_residual:
                ordered.append((0, merged_residual))
            for ell in sorted(band_runs, reverse=True):
                merged = _normalize_runs(
                    pair for runs in band_runs[ell] for pair in runs
                )
                ordered.append((_bucket_for(params, q, t, ell), merged))
            for bucket, runs in ordered:
                hit = run_intersect(remaining, runs)
                if not hit:
                    continue
                remaining = run_subtract(remaining, hit)
                removed[bucket] = run_union(removed.get(bucket, ()), hit)
            survivors = remaining
        level = Level(q, survivors, removed)
        levels.append(level)
        if not survivors and first_empty is None:
            first_empty = q
            warnings.warn(f"level {q} has no survivors", stacklevel=2)
        if abort_bound is not None and _level_dq(level, R) > abort_bound:
            aborted_at = q
            break
    return RSequence(params, tuple(levels), first_empty, aborted_at)


# ---------------------------------------------------------------------------
# Removal sums.


def _max_per_ancestor(runs: Runs, factor: int) -> int:
    """Max count of indices sharing one ancestor index i // factor."""
    best = 0
    current_key: int | None = None
    current = 0
    for a, b in runs:
        ka, kb = a // factor, (b - 1) // factor
        if ka == kb:
            if ka == current_key:
                current += b - a
            else:
                best = max(best, current)
                current_key, current = ka, b - a
            continue
        # first partial block
        first = (ka + 1) * factor - a
        if ka == current_key:
            current += first
        else:
            best = max(best, current)
            current_key, current = ka, first
        best = max(best, current)
        if kb - ka > 1:
            best = max(best, factor)
        current_key, current = kb, b - kb * factor
    best = max(best, current)
    return best


def _level_dq(lev: Level, branching: int) -> Fraction:
    total = Fraction(0)
    for p, runs in lev.removed.items():
        factor = branching ** (lev.q - p)
        worst = _max_per_ancestor(runs, factor)
        total += Fraction(4, branching) ** (lev.q - p) * worst
    return total


def compute_dq(seq: RSequence, q: int) -> Fraction:
    """Exact removal sum at depth q.

    Each bucket p contributes (4/R)**(q-p) times the largest number of its
    removed indices that descend from a single level-p interval.  Keeping
    every d_q <= 1 guarantees nonempty survivors at all built depths.
    """
    if q < 1:
        raise PreconditionViolated("removal sums start at level 1")
    return _level_dq(seq.level(q), seq.params.branching)


def dq_supremum(seq: RSequence) -> Fraction:
    """Largest removal sum over all built levels past the free ones."""
    if seq.depth < 1:
        return Fraction(0)
    return max(compute_dq(seq, q) for q in range(1, seq.depth + 1))


def dimension_lower_bound(branching: int, dsup: Rational) -> Fraction | None:
    """Certified lower bound 1 - log 2 / log R for the surviving set.

    Returns None when the removal sums exceeded 1 (no survival guarantee).
    The bound is returned as an exact fraction p/q <= 1 - log2/logR, built
    from the integer part of 64*log2(R).
    """
    if branching < 4:
        raise PreconditionViolated("branching must be at least 4")
    if as_fraction(dsup) > 1:
        return None
    bits = (branching**64).bit_length() - 1  # floor(64 * log2 R)
    return Fraction(bits - 64, bits)


# ---------------------------------------------------------------------------
# Intersections across weight vectors.


def intersect_sequences(sequences: Sequence[RSequence]) -> RSequence:
    """Levelwise intersection of aligned constructions.

    All inputs must share the branching, start interval and built depth.  The
    result survives exactly where every input survives; its removals at each
    level are the freshly dead children, bucketed by the smallest source
    level any component charges them to.
    """
    if not sequences:
        raise PreconditionViolated("need at least one sequence")
    head = sequences[0]
    R = head.params.branching
    for other in sequences[1:]:
        if other.params.branching != R:
            raise MismatchedParams("branching differs between sequences")
        if other.params.start != head.params.start:
            raise MismatchedParams("start interval differs between sequences")
        if other.depth != head.depth:
            raise MismatchedParams("depths differ between sequences")
    levels: list[Level] = [Level(0, ((0, 1),))]
    first_empty: int | None = None
    for q in range(1, head.depth + 1):
        survivors = sequences[0].level(q).survivors
        for other in sequences[1:]:
            survivors = run_intersect(survivors, other.level(q).survivors)
        children = run_subdivide(levels[q - 1].survivors, R)
        dead = run_subtract(children, survivors)
        survivors = run_subtract(children, dead)
        removed: dict[int, Runs] = {}
        remaining = dead
        buckets = sorted(
            {p for s in sequences for p in s.level(q).removed}
        )
        for p in buckets:
            if not remaining:
                break
            source: Runs = ()
            for s in sequences:
                runs = s.level(q).removed.get(p)
                if runs:
                    source = run_union(source, runs)
            hit = run_intersect(remaining, source)
            if hit:
                removed[p] = hit
                remaining = run_subtract(remaining, hit)
        if remaining:
            raise PreconditionViolated(
                "dead child not charged by any component sequence"
            )
        levels.append(Level(q, survivors, removed))
        if not survivors and first_empty is None:
            first_empty = q
    return RSequence(head.params, tuple(levels), first_empty)


# ---------------------------------------------------------------------------
# Point extraction and spot checks.


def extract_point(seq: RSequence, pick: str = "leftmost") -> RatInterval:
    """Deepest surviving child interval; every point inside it survives.

    pick selects which survivor: "leftmost" or "midmost" (the median child
    by rank).  Raises EmptySearch if the deepest level has no survivors.
    """
    lev = seq.levels[-1]
    if not lev.survivors:
        raise EmptySearch(f"no survivors at depth {lev.q}")
    if pick == "leftmost":
        index = lev.survivors[0][0]
    elif pick == "midmost":
        want = lev.count // 2
        index = None
        for a, b in lev.survivors:
            if want < b - a:
                index = a + want
                break
            want -= b - a
        if index is None:
            raise PreconditionViolated("rank walk exhausted runs")
    else:
        raise PreconditionViolated(f"unknown pick {pick!r}")
    return seq.params.child_interval(lev.q, index)


def survivor_sample(
    seq: RSequence, q: int, count: int, seed: int = 0
) -> tuple[Fraction, ...]:
    """Deterministic sample of rational points inside level-q survivors."""
    lev = seq.level(q)
    if not lev.survivors:
        raise EmptySearch(f"no survivors at depth {q}")
    rng = random.Random(seed)
    total = lev.count
    points: list[Fraction] = []
    for _ in range(count):
        rank = rng.randrange(total)
        index = None
        for a, b in lev.survivors:
            if rank < b - a:
                index = a + rank
                break
            rank -= b - a
        assert index is not None
        child = seq.params.child_interval(q, index)
        num = rng.randrange(1, 16)
        points.append(child.lo + child.length * Fraction(num, 16))
    return tuple(points)


def check_survivor(seq: RSequence, q: int, point: Rational) -> bool:
    """Lattice-certify that a surviving point misses every dangerous piece.

    Evaluates the curve at the point and runs the unimodular-flow first
    minimum test at t = q - depth_offset.  Levels at or before the free
    prefix hold vacuously.
    """
    x = as_fraction(point)
    lev = seq.level(q)
    width = seq.params.child_width(q)
    inside = any(
        seq.params.start.lo + a * width <= x <= seq.params.start.lo + b * width
        for a, b in lev.survivors
    )
    if not inside:
        raise PreconditionViolated("point is not inside a surviving child")
    t = q - seq.params.depth_offset
    if t < 1:
        return True
    y = seq.params.curve.point(x)
    basis = flow_lattice(seq.params.r, seq.params.base, t, seq.params.kappa, y)
    ok, _ = delta_certify_ge_one(basis)
    return ok


# ---------------------------------------------------------------------------
# Parameter sweep.


def sweep_parameters(
    r: WeightVector,
    curve: PolyCurve,
    constants: PropertyFConstants,
    branchings: Sequence[int],
    offsets: Sequence[int],
    q_extra: int,
    dq_bound: Rational | None = 1,
    budget: int = DEFAULT_UNION_BUDGET,
) -> tuple[ConstructionParams, RSequence]:
    """Smallest passing (branching, depth offset) pair, grid order.

    A pair passes when every level up to depth_offset + q_extra is nonempty
    and, if dq_bound is given, every removal sum stays at or below it.
    Builds abort as soon as a level fails, so rejected pairs are cheap.
    """
    bound = None if dq_bound is None else as_fraction(dq_bound)
    failures: list[str] = []
    for R in branchings:
        for m in sorted(offsets):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                params = ConstructionParams(
                    r=r,
                    curve=curve,
                    constants=constants,
                    branching=R,
                    depth_offset=m,
                    q_max=m + q_extra,
                    budget=budget,
                )
                seq = build_r_sequence(params, abort_above_dq=bound)
            if seq.first_empty is not None:
                failures.append(f"R={R} m={m}: empty at level {seq.first_empty}")
                continue
            if seq.aborted_at is not None:
                failures.append(
                    f"R={R} m={m}: removal sum over bound at level {seq.aborted_at}"
                )
                continue
            return params, seq
    raise NotFound("no passing pair in the grid: " + "; ".join(failures))
