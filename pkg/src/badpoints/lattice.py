"""Lattice geometry with exact arithmetic.

Bases are stored as a rational part plus optional per-coordinate scale
factors.  The diagonal flow acts by multiplying the scales, so a flowed
lattice keeps a rational skeleton: coefficient-space search boxes come from
the exact pseudoinverse of the rational part, and each candidate vector is
tested against the box with exact scaled-power comparisons.  Nothing here
ever adds two incommensurable irrationals.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .core import (
    AlgebraicScalar,
    BoxTooLarge,
    KappaOutOfRange,
    PreconditionViolated,
    RankDeficient,
    Rational,
    ScalarLike,
    UnboundedSearch,
    WeightVector,
    as_fraction,
    coerce_scalar,
    round_half_away,
    scalar_max,
    scaled_power,
)

DEFAULT_BOX_BUDGET = 4_000_000

Matrix = tuple[tuple[Fraction, ...], ...]


# -- exact rational linear algebra ----------------------------------------


def mat_from(rows: Sequence[Sequence[Rational]]) -> Matrix:
    return tuple(tuple(as_fraction(x) for x in row) for row in rows)


def mat_transpose(m: Matrix) -> Matrix:
    return tuple(zip(*m))


def mat_mul(a: Matrix, b: Matrix) -> Matrix:
    bt = mat_transpose(b)
    return tuple(tuple(sum(x * y for x, y in zip(row, col)) for col in bt) for row in a)


def mat_det(m: Matrix) -> Fraction:
    n = len(m)
    if any(len(row) != n for row in m):
        raise PreconditionViolated("determinant needs a square matrix")
    a = [list(row) for row in m]
    det = Fraction(1)
    for col in range(n):
        pivot = next((r for r in range(col, n) if a[r][col] != 0), None)
        if pivot is None:
            return Fraction(0)
        if pivot != col:
            a[col], a[pivot] = a[pivot], a[col]
            det = -det
        det *= a[col][col]
        inv = 1 / a[col][col]
        for r in range(col + 1, n):
            if a[r][col] != 0:
                factor = a[r][col] * inv
                for c in range(col, n):
                    a[r][c] -= factor * a[col][c]
    return det


def mat_rank(m: Sequence[Sequence[Rational]]) -> int:
    a = [[as_fraction(x) for x in row] for row in m]
    if not a:
        return 0
    rows, cols = len(a), len(a[0])
    rank = 0
    for col in range(cols):
        pivot = next((r for r in range(rank, rows) if a[r][col] != 0), None)
        if pivot is None:
            continue
        a[rank], a[pivot] = a[pivot], a[rank]
        inv = 1 / a[rank][col]
        for r in range(rank + 1, rows):
            if a[r][col] != 0:
                factor = a[r][col] * inv
                for c in range(col, cols):
                    a[r][c] -= factor * a[rank][c]
        rank += 1
        if rank == rows:
            break
    return rank


def mat_inverse(m: Matrix) -> Matrix:
    n = len(m)
    a = [list(row) + [Fraction(1) if i == j else Fraction(0) for j in range(n)] for i, row in enumerate(m)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if a[r][col] != 0), None)
        if pivot is None:
            raise RankDeficient("matrix is singular")
        a[col], a[pivot] = a[pivot], a[col]
        inv = 1 / a[col][col]
        a[col] = [x * inv for x in a[col]]
        for r in range(n):
            if r != col and a[r][col] != 0:
                factor = a[r][col]
                a[r] = [x - factor * y for x, y in zip(a[r], a[col])]
    return tuple(tuple(row[n:]) for row in a)


def mat_vec(m: Matrix, v: Sequence[Rational]) -> tuple[Fraction, ...]:
    return tuple(sum(x * as_fraction(y) for x, y in zip(row, v)) for row in m)


# -- bases and boxes -------------------------------------------------------


@dataclass(frozen=True)
class FlowSpec:
    """Parameters that produced a flowed unimodular-shear lattice."""

    r: WeightVector
    b: ScalarLike
    t: int
    kappa: Fraction
    y: tuple[Fraction, ...]


@dataclass(frozen=True)
class LatticeBasis:
    """Basis vectors[j][i] * row_scales[i]; rational part plus positive scales."""

    dim: int
    vectors: tuple[tuple[Fraction, ...], ...]
    row_scales: tuple[ScalarLike, ...] | None = None
    provenance: str = ""
    flow: FlowSpec | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "vectors", mat_from(self.vectors))
        for v in self.vectors:
            if len(v) != self.dim:
                raise PreconditionViolated("basis vector length does not match dim")
        if self.row_scales is not None:
            scales = tuple(coerce_scalar(s) for s in self.row_scales)
            if len(scales) != self.dim:
                raise PreconditionViolated("need one scale per coordinate")
            if any(s.sign() <= 0 for s in scales):
                raise PreconditionViolated("row scales must be positive")
            object.__setattr__(self, "row_scales", scales)

    @property
    def rank(self) -> int:
        return mat_rank(self.vectors)

    def entry(self, j: int, i: int) -> ScalarLike:
        raw = self.vectors[j][i]
        if self.row_scales is None:
            return raw
        return self.row_scales[i] * raw

    def vector(self, j: int) -> tuple[ScalarLike, ...]:
        return tuple(self.entry(j, i) for i in range(self.dim))

    def combination_rational(self, coeffs: Sequence[int]) -> tuple[Fraction, ...]:
        return tuple(
            sum(c * self.vectors[j][i] for j, c in enumerate(coeffs))
            for i in range(self.dim)
        )

    def is_rational(self) -> bool:
        return self.row_scales is None or all(coerce_scalar(s).is_rational for s in self.row_scales)

    def rational_matrix(self) -> Matrix:
        """Columns = basis vectors, scales folded in; rational bases only."""
        if not self.is_rational():
            raise PreconditionViolated("basis has irrational scales")
        scales = self.row_scales or tuple(Fraction(1) for _ in range(self.dim))
        svals = [coerce_scalar(s).as_fraction() if not isinstance(s, Fraction) else s for s in scales]
        return tuple(
            tuple(svals[i] * self.vectors[j][i] for j in range(len(self.vectors)))
            for i in range(self.dim)
        )


def lattice_from_columns(columns: Sequence[Sequence[Rational]], provenance: str = "") -> LatticeBasis:
    columns = [tuple(as_fraction(x) for x in col) for col in columns]
    if not columns:
        raise PreconditionViolated("no basis vectors")
    return LatticeBasis(dim=len(columns[0]), vectors=tuple(columns), provenance=provenance)


def build_g_matrix(kappa: Rational, y: Sequence[Rational]) -> LatticeBasis:
    """Unimodular-shear basis [[1/kappa, y_j/kappa], [0, I]]; det = 1/kappa."""
    kappa = as_fraction(kappa)
    if not 0 < kappa < 1:
        raise KappaOutOfRange(f"kappa must lie in (0,1), got {kappa}")
    y = tuple(as_fraction(v) for v in y)
    n = len(y)
    cols = [tuple([1 / kappa] + [Fraction(0)] * n)]
    for j in range(n):
        col = [y[j] / kappa] + [Fraction(1) if i == j else Fraction(0) for i in range(n)]
        cols.append(tuple(col))
    return LatticeBasis(dim=n + 1, vectors=tuple(cols), provenance="shear")


def flow_scales(r: WeightVector, b: ScalarLike, t: int) -> tuple[AlgebraicScalar, ...]:
    """Diagonal entries (b^t, b^(-r_1 t), ..., b^(-r_n t)); determinant one."""
    bb = coerce_scalar(b)
    if bb.sign() <= 0 or bb.compare(1) <= 0:
        raise PreconditionViolated("flow base must exceed 1")
    scales = [bb**t] + [bb ** (-ri * t) for ri in r.entries]
    return tuple(scales)


def flow_lattice(r: WeightVector, b: ScalarLike, t: int, kappa: Rational, y: Sequence[Rational]) -> LatticeBasis:
    base = build_g_matrix(kappa, y)
    scales = flow_scales(r, b, t)
    return LatticeBasis(
        dim=base.dim,
        vectors=base.vectors,
        row_scales=scales,
        provenance="flow",
        flow=FlowSpec(r=r, b=b, t=t, kappa=as_fraction(kappa), y=tuple(as_fraction(v) for v in y)),
    )


def apply_flow(L: LatticeBasis, r: WeightVector, b: ScalarLike, t: int) -> LatticeBasis:
    scales = flow_scales(r, b, t)
    if L.row_scales is not None:
        scales = tuple(s * old for s, old in zip(scales, L.row_scales))
    return LatticeBasis(dim=L.dim, vectors=L.vectors, row_scales=scales, provenance=L.provenance + "+flow", flow=L.flow)


def strict_int_bound(threshold: ScalarLike) -> int:
    """Largest integer magnitude admitted by |a| < threshold."""
    s = coerce_scalar(threshold)
    if s.sign() <= 0:
        return -1
    return s.ceil() - 1


def closed_int_bound(threshold: ScalarLike) -> int:
    s = coerce_scalar(threshold)
    if s.sign() < 0:
        return -1
    return s.floor()


@dataclass(frozen=True)
class Box:
    """Origin-symmetric coordinate box {x : |x_i| < theta_i} (closed variant
    used by the convex-body checks)."""

    thetas: tuple[ScalarLike, ...]
    closed: bool = False

    def __post_init__(self) -> None:
        thetas = tuple(coerce_scalar(t) for t in self.thetas)
        if any(t.sign() <= 0 for t in thetas):
            raise PreconditionViolated("box sides must be positive")
        object.__setattr__(self, "thetas", thetas)

    @property
    def dim(self) -> int:
        return len(self.thetas)

    def volume(self) -> ScalarLike:
        v: ScalarLike = Fraction(1)
        for t in self.thetas:
            v = coerce_scalar(t) * 2 * v
        return v

    def contains(self, point: Sequence[ScalarLike]) -> bool:
        for x, t in zip(point, self.thetas):
            c = abs(coerce_scalar(x)).compare(t)
            if c > 0 or (c == 0 and not self.closed):
                return False
        return True


def pi_box(b: ScalarLike, u: Rational, n: int) -> Box:
    """The expanding-first-coordinate box (b^u, 1, ..., 1)."""
    first = coerce_scalar(b) ** as_fraction(u)
    return Box(thetas=(first,) + tuple(Fraction(1) for _ in range(n)))


# -- enumeration -----------------------------------------------------------


def _coefficient_bounds(L: LatticeBasis, coordinate_caps: Sequence[Fraction], budget: int) -> list[int]:
    """Box in coefficient space containing every lattice vector whose i-th
    rational-part magnitude is <= coordinate_caps[i]."""
    cols = len(L.vectors)
    bt = L.vectors  # vectors[j] is column j
    gram = tuple(
        tuple(sum(bt[j][i] * bt[k][i] for i in range(L.dim)) for k in range(cols))
        for j in range(cols)
    )
    if mat_det(gram) == 0:
        raise UnboundedSearch("basis vectors are linearly dependent")
    ginv = mat_inverse(gram)
    # pinv = (B^T B)^-1 B^T, rows indexed by coefficients
    pinv = tuple(
        tuple(sum(ginv[k][j] * bt[j][i] for j in range(cols)) for i in range(L.dim))
        for k in range(cols)
    )
    bounds = []
    total = 1
    for k in range(cols):
        bound = sum(abs(pinv[k][i]) * coordinate_caps[i] for i in range(L.dim))
        bk = math.floor(bound)
        bounds.append(bk)
        total *= 2 * bk + 1
        if total > budget:
            raise BoxTooLarge(f"coefficient box exceeds budget ({total} > {budget})")
    return bounds


def _coordinate_caps(L: LatticeBasis, limits: Sequence[ScalarLike]) -> list[Fraction]:
    caps = []
    scales = L.row_scales or tuple(Fraction(1) for _ in range(L.dim))
    for i in range(L.dim):
        cap = coerce_scalar(limits[i]) / coerce_scalar(scales[i])
        caps.append(cap.rational_upper())
    return caps


@dataclass(frozen=True)
class BoxCount:
    count: int
    rank: int
    coefficients: tuple[tuple[int, ...], ...]


def count_in_box(L: LatticeBasis, box: Box, budget: int = DEFAULT_BOX_BUDGET) -> BoxCount:
    """Exact #(lattice ∩ box) with the spanned-rank of the hits.

    Rank is computed over the integer coefficient vectors of the hits, which
    equals the rank of the hit set itself since the basis is injective.
    """
    if box.dim != L.dim:
        raise PreconditionViolated("box dimension does not match lattice")
    bounds = _coefficient_bounds(L, _coordinate_caps(L, box.thetas), budget)
    scales = L.row_scales or tuple(Fraction(1) for _ in range(L.dim))
    hits: list[tuple[int, ...]] = []
    for coeffs in itertools.product(*[range(-b, b + 1) for b in bounds]):
        raw = L.combination_rational(coeffs)
        ok = True
        for i in range(L.dim):
            val = coerce_scalar(scales[i]) * abs(raw[i])
            c = val.compare(box.thetas[i])
            if c > 0 or (c == 0 and not box.closed):
                ok = False
                break
        if ok:
            hits.append(tuple(coeffs))
    return BoxCount(count=len(hits), rank=mat_rank(hits) if hits else 0, coefficients=tuple(hits))


def delta_enumerate(L: LatticeBasis, budget: int = DEFAULT_BOX_BUDGET) -> tuple[ScalarLike, tuple[int, ...]]:
    """Shortest nonzero sup-norm by exact shell search."""
    cols = len(L.vectors)
    if L.rank < cols:
        raise UnboundedSearch("basis vectors are linearly dependent")
    scales = L.row_scales or tuple(Fraction(1) for _ in range(L.dim))

    def supnorm(coeffs: Sequence[int]) -> ScalarLike:
        raw = L.combination_rational(coeffs)
        return scalar_max(*[abs(coerce_scalar(scales[i]) * raw[i]) for i in range(L.dim)])

    best_coeffs = (1,) + (0,) * (cols - 1)
    best = supnorm(best_coeffs)
    for j in range(1, cols):
        unit = tuple(1 if k == j else 0 for k in range(cols))
        v = supnorm(unit)
        if coerce_scalar(v).compare(best) < 0:
            best, best_coeffs = v, unit
    bounds = _coefficient_bounds(L, _coordinate_caps(L, [best] * L.dim), budget)
    for coeffs in itertools.product(*[range(-b, b + 1) for b in bounds]):
        if all(c == 0 for c in coeffs):
            continue
        v = supnorm(coeffs)
        if coerce_scalar(v).compare(best) < 0:
            best, best_coeffs = v, coeffs
    return best, best_coeffs


def delta_certify_ge_one(L: LatticeBasis, budget: int = DEFAULT_BOX_BUDGET) -> tuple[bool, tuple[int, ...] | None]:
    """Decide min sup-norm >= 1 for a flowed shear lattice without
    materializing irrational norms: a violating vector means an integer a with
    |a_0 + a.y| < kappa b^-t and |a_i| < b^(r_i t)."""
    if L.flow is None:
        raise PreconditionViolated("certify mode needs flow provenance")
    spec = L.flow
    b = coerce_scalar(spec.b)
    gap = coerce_scalar(spec.kappa) * b ** (-spec.t)
    box_bounds = [strict_int_bound(b ** (ri * spec.t)) for ri in spec.r.entries]
    total = 1
    for bb in box_bounds:
        total *= 2 * bb + 1
    if total > budget:
        raise BoxTooLarge(f"certify box exceeds budget ({total} > {budget})")
    for a in itertools.product(*[range(-bb, bb + 1) for bb in box_bounds]):
        if all(x == 0 for x in a):
            continue
        dot = sum(ai * yi for ai, yi in zip(a, spec.y))
        a0 = -round_half_away(dot)
        dist = abs(a0 + dot)
        if gap.compare(dist) > 0:
            return False, (a0, *a)
    return True, None


def delta(L: LatticeBasis, certify_ge_one: bool = False, budget: int = DEFAULT_BOX_BUDGET):
    """Shortest-vector sup-norm, or the >= 1 verdict in certify mode.

    The *_enumerate / *_certify_ge_one variants also expose the witness.
    """
    if certify_ge_one:
        return delta_certify_ge_one(L, budget)[0]
    return delta_enumerate(L, budget)[0]


def lattice_det(L: LatticeBasis) -> ScalarLike:
    """Covolume: |det| for square bases, Gram square root otherwise."""
    cols = len(L.vectors)
    if not L.is_rational():
        if cols == L.dim:
            d: ScalarLike = Fraction(1)
            for s in L.row_scales:  # type: ignore[union-attr]
                d = coerce_scalar(s) * d
            return abs(coerce_scalar(d) * mat_det(mat_transpose(L.vectors)))
        raise PreconditionViolated("covolume of scaled non-square basis not supported")
    m = L.rational_matrix()
    if cols == L.dim:
        return abs(mat_det(m))
    gram = mat_mul(mat_transpose(m), m)
    g = mat_det(gram)
    if g == 0:
        raise RankDeficient("degenerate basis")
    return scaled_power(1, g, Fraction(1, 2))


# -- counting bounds -------------------------------------------------------


def count_constant(n: int) -> ScalarLike:
    """Dimensional constant 4^(n+1) (n+1)^((n+1)/2) (n+1)!; equals 64 for n = 1."""
    if n < 1:
        raise PreconditionViolated("n >= 1")
    value = scaled_power(4 ** (n + 1) * math.factorial(n + 1), n + 1, Fraction(n + 1, 2))
    return value.as_fraction() if value.is_rational else value


def theta_product_max(thetas: Sequence[ScalarLike], l: int) -> ScalarLike:
    if not 1 <= l <= len(thetas):
        raise PreconditionViolated("product length out of range")
    best: ScalarLike | None = None
    for combo in itertools.combinations(range(len(thetas)), l):
        prod: ScalarLike = Fraction(1)
        for i in combo:
            prod = coerce_scalar(thetas[i]) * prod
        if best is None or coerce_scalar(prod).compare(best) > 0:
            best = prod
    assert best is not None
    return best


def central_section_volume_bound(thetas: Sequence[ScalarLike], n: int, l: int) -> ScalarLike:
    """2^l (n+1)^(l/2) Theta_l bounds the l-volume of any l-dim central
    section of the box."""
    if len(thetas) != n + 1:
        raise PreconditionViolated("need n+1 box sides")
    lead = scaled_power(2**l, n + 1, Fraction(l, 2))
    return lead * coerce_scalar(theta_product_max(thetas, l))


def blichfeldt_scaled_part(l: int, volume: ScalarLike, det: ScalarLike) -> ScalarLike:
    """The l! vol / det part of the count bound; the full bound adds l.

    Scalars carry no addition, so checks compare count - l against this.
    """
    return coerce_scalar(volume) / coerce_scalar(det) * math.factorial(l)


def box_count_scaled_part(n: int, l: int, thetas: Sequence[ScalarLike], delta_value: ScalarLike) -> ScalarLike:
    """count_constant(n) Theta_l / delta^l; the full count bound adds n + 1."""
    theta_l = theta_product_max(thetas, l)
    return coerce_scalar(count_constant(n)) * coerce_scalar(theta_l) / coerce_scalar(delta_value) ** l


def expanded_box_count_bound(n: int, b: ScalarLike, tau: Fraction, lam: Fraction, u: Rational) -> ScalarLike:
    """2 count_constant(n) b^tau b^(lam u) bounds the hit count in the
    first-coordinate-expanded box when the flow at time t - [lam u] still has
    shortest vector >= 1."""
    bb = coerce_scalar(b)
    return coerce_scalar(count_constant(n)) * 2 * bb ** as_fraction(tau) * bb ** (as_fraction(lam) * as_fraction(u))


@dataclass(frozen=True)
class InequalityReport:
    name: str
    lhs: ScalarLike
    rhs: ScalarLike
    relation: str
    holds: bool
    detail: dict = field(default_factory=dict)


def blichfeldt_check(L: LatticeBasis, box: Box, budget: int = DEFAULT_BOX_BUDGET) -> InequalityReport:
    """count <= l! vol / det + l for a closed convex symmetric box.

    The volume form needs the hit set to span all l dimensions; degenerate
    (lower-rank) hit sets report holds=True with applies=False, since the
    l-dimensional volume says nothing about points crowded into a subspace.
    """
    counted = count_in_box(L, Box(box.thetas, closed=True), budget)
    l = len(L.vectors)
    part = blichfeldt_scaled_part(l, box.volume(), lattice_det(L))
    lhs = Fraction(counted.count - l)
    applies = counted.rank == l
    return InequalityReport(
        name="blichfeldt",
        lhs=lhs,
        rhs=part,
        relation="<= (count minus l against scaled part)",
        holds=(not applies) or coerce_scalar(part).compare(lhs) >= 0,
        detail={"rank": counted.rank, "count": counted.count, "applies": applies},
    )


def rank_bound_check(L: LatticeBasis, box: Box, budget: int = DEFAULT_BOX_BUDGET) -> InequalityReport:
    """Small volume forces the box's lattice points into a proper subspace:
    vol < det/l! implies rank <= l-1."""
    counted = count_in_box(L, Box(box.thetas, closed=True), budget)
    l = len(L.vectors)
    vol = coerce_scalar(box.volume())
    threshold = coerce_scalar(lattice_det(L)) / math.factorial(l)
    applies = vol.compare(threshold) < 0
    holds = (not applies) or counted.rank <= l - 1
    return InequalityReport(
        name="rank_bound",
        lhs=vol,
        rhs=threshold,
        relation="< (hypothesis)",
        holds=holds,
        detail={"rank": counted.rank, "count": counted.count, "applies": applies},
    )


def minkowski_check(L: LatticeBasis, box: Box, budget: int = DEFAULT_BOX_BUDGET) -> InequalityReport:
    """vol > 2^l det guarantees a nonzero lattice point in the closed box."""
    l = len(L.vectors)
    vol = coerce_scalar(box.volume())
    threshold = coerce_scalar(lattice_det(L)) * 2**l
    applies = vol.compare(threshold) > 0
    counted = count_in_box(L, Box(box.thetas, closed=True), budget)
    found = counted.count > 1  # origin always counts
    return InequalityReport(
        name="minkowski",
        lhs=vol,
        rhs=threshold,
        relation="> (hypothesis)",
        holds=(not applies) or found,
        detail={"count": counted.count, "applies": applies},
    )


def det_lower_check(L: LatticeBasis, budget: int = DEFAULT_BOX_BUDGET) -> InequalityReport:
    """Covolume against (delta/2)^l, compared in squares to stay rational."""
    if not L.is_rational():
        raise PreconditionViolated("det lower check wants a rational basis")
    value, _ = delta_enumerate(L, budget)
    val = coerce_scalar(value)
    l = len(L.vectors)
    det = coerce_scalar(lattice_det(L))
    lhs = det**2
    rhs = (val / 2) ** (2 * l)
    return InequalityReport(
        name="det_lower",
        lhs=lhs,
        rhs=rhs,
        relation=">=",
        holds=lhs.compare(rhs) >= 0,
        detail={"delta": value},
    )


def monte_carlo_section_volume(
    thetas: Sequence[ScalarLike],
    subspace: Sequence[Sequence[float]],
    samples: int = 20000,
    seed: int = 0,
) -> float:
    """Float Monte-Carlo estimate of the l-volume of box ∩ span(subspace).

    Advisory only (never certifies): callers pad it before comparing with the
    exact section bound.
    """
    rng = random.Random(seed)
    basis = [list(map(float, v)) for v in subspace]
    # Gram-Schmidt to get an orthonormal frame of the subspace.
    ortho: list[list[float]] = []
    for v in basis:
        w = v[:]
        for u in ortho:
            d = sum(x * y for x, y in zip(w, u))
            w = [x - d * y for x, y in zip(w, u)]
        norm = math.sqrt(sum(x * x for x in w))
        if norm < 1e-12:
            raise PreconditionViolated("subspace basis is degenerate")
        ortho.append([x / norm for x in w])
    l = len(ortho)
    tf = [float(coerce_scalar(t)) for t in thetas]
    radius = math.sqrt(sum(t * t for t in tf))
    inside = 0
    for _ in range(samples):
        coeffs = [rng.uniform(-radius, radius) for _ in range(l)]
        point = [sum(c * u[i] for c, u in zip(coeffs, ortho)) for i in range(len(tf))]
        if all(abs(p) < t for p, t in zip(point, tf)):
            inside += 1
    return (2 * radius) ** l * inside / samples
