"""Badness margins by exhaustive exact search, plus the constructive
transfer between simultaneous and dual approximation.

Margins are minima of finitely many exactly-represented values, so every
certificate carries a witness vector and both sides of the deciding
comparison.  The dual margin is rational outright; the simultaneous margin is
a scaled power and is reported as such.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .core import (
    BoxTooLarge,
    EmptySearch,
    PreconditionViolated,
    Rational,
    RatInterval,
    ScalarLike,
    SearchExhausted,
    Undetermined,
    WeightVector,
    WrongWeights,
    as_fraction,
    coerce_scalar,
    format_scalar,
    iroot,
    round_half_away,
    scaled_power,
)
from .lattice import (
    DEFAULT_BOX_BUDGET,
    Matrix,
    closed_int_bound,
    mat_det,
    mat_from,
    mat_inverse,
    mat_transpose,
)


@dataclass(frozen=True)
class MarginWitness:
    """Integer vector attaining the margin, with its height and value."""

    vector: tuple[int, ...]
    height: int
    value: ScalarLike


@dataclass(frozen=True)
class BadCertificate:
    kind: str  # "simultaneous" or "dual"
    point: tuple[Fraction, ...]
    weights: WeightVector
    bound: int  # search range: q <= bound, or admissible height <= bound
    margin: ScalarLike
    witness: MarginWitness

    def margin_at_least(self, threshold: ScalarLike) -> bool:
        return coerce_scalar(self.margin).compare(threshold) >= 0

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "point": [str(x) for x in self.point],
            "weights": [str(w) for w in self.weights.entries],
            "bound": self.bound,
            "margin": format_scalar(self.margin),
            "witness": {
                "vector": list(self.witness.vector),
                "height": self.witness.height,
                "value": format_scalar(self.witness.value),
            },
        }


def _check_point(y: Sequence[Rational], r: WeightVector) -> tuple[Fraction, ...]:
    y = tuple(as_fraction(v) for v in y)
    if len(y) != r.n:
        raise PreconditionViolated("point and weights have different lengths")
    return y


def simultaneous_margin(y: Sequence[Rational], r: WeightVector, q_max: int) -> BadCertificate:
    """min over 1 <= q <= q_max of q * max_i dist(q y_i)^(1/r_i).

    Zero-weight coordinates contribute nothing to the max.  A zero margin
    means some q y_i is an exact integer on a positive-weight coordinate.
    """
    y = _check_point(y, r)
    if q_max < 1:
        raise EmptySearch("q_max must be at least 1")
    best: ScalarLike | None = None
    best_witness: MarginWitness | None = None
    for q in range(1, q_max + 1):
        worst: ScalarLike = Fraction(0)
        nearest = []
        for yi, ri in zip(y, r.entries):
            p = round_half_away(q * yi)
            nearest.append(p)
            if ri == 0:
                continue
            d = abs(q * yi - p)
            contribution: ScalarLike = scaled_power(1, d, 1 / ri) if d else Fraction(0)
            if coerce_scalar(contribution).compare(worst) > 0:
                worst = contribution
        value = coerce_scalar(worst) * q
        if best is None or value.compare(best) < 0:
            best = value
            best_witness = MarginWitness(vector=(q, *nearest), height=q, value=value)
        if coerce_scalar(best).sign() == 0:
            break
    assert best is not None and best_witness is not None
    return BadCertificate(
        kind="simultaneous", point=y, weights=r, bound=q_max, margin=best, witness=best_witness
    )


def min_admissible_height(a: Sequence[int], r: WeightVector) -> int:
    """Smallest integer H >= 1 with |a_i| <= H^(r_i) for every i.

    Zero-weight coordinates must carry a_i = 0 (H^0 = 1 would allow 1, but
    the dual system forces them out; callers never pass nonzero there).
    """
    h = 1
    for ai, ri in zip(a, r.entries):
        if ai == 0:
            continue
        if ri == 0:
            raise PreconditionViolated("nonzero coefficient on a zero-weight coordinate")
        num, den = ri.numerator, ri.denominator
        target = abs(ai) ** den
        c = iroot(target, num)
        if c**num < target:
            c += 1
        h = max(h, c)
    return h


def dual_margin(
    y: Sequence[Rational], r: WeightVector, h_max: int, budget: int = DEFAULT_BOX_BUDGET
) -> BadCertificate:
    """min over admissible (a_0, a) != 0 of H_min(a) * |a_0 + a . y|.

    Admissible means the minimal height H_min(a) is <= h_max; zero-weight
    coordinates force a_i = 0.  The margin is a plain rational.
    """
    y = _check_point(y, r)
    if h_max < 1:
        raise EmptySearch("h_max must be at least 1")
    bounds = []
    total = 1
    for ri in r.entries:
        if ri == 0:
            bounds.append(0)
            continue
        cap = iroot(h_max**ri.numerator, ri.denominator)
        bounds.append(cap)
        total *= 2 * cap + 1
        if total > budget:
            raise BoxTooLarge(f"dual search box exceeds budget ({total} > {budget})")
    # Seed with a = 0, a_0 = 1: height 1, value 1.
    best = Fraction(1)
    best_witness = MarginWitness(vector=(1,) + (0,) * r.n, height=1, value=Fraction(1))
    for a in itertools.product(*[range(-bb, bb + 1) for bb in bounds]):
        if all(x == 0 for x in a):
            continue
        h = min_admissible_height(a, r)
        dot = sum(ai * yi for ai, yi in zip(a, y))
        a0 = -round_half_away(dot)
        value = h * abs(a0 + dot)
        if value < best:
            best = value
            best_witness = MarginWitness(vector=(a0, *a), height=h, value=value)
        if best == 0:
            break
    return BadCertificate(
        kind="dual", point=y, weights=r, bound=h_max, margin=best, witness=best_witness
    )


# -- constructive transfer -------------------------------------------------


@dataclass(frozen=True)
class LinearFormSystem:
    """Rows of a nonsingular rational form system with positive bounds."""

    rows: Matrix
    bounds: tuple[ScalarLike, ...]

    def __post_init__(self) -> None:
        rows = mat_from(self.rows)
        n1 = len(rows)
        if any(len(row) != n1 for row in rows):
            raise PreconditionViolated("form system must be square")
        if len(self.bounds) != n1:
            raise PreconditionViolated("need one bound per form")
        bounds = tuple(coerce_scalar(t) for t in self.bounds)
        if any(t.sign() <= 0 for t in bounds):
            raise PreconditionViolated("form bounds must be positive")
        if mat_det(rows) == 0:
            raise PreconditionViolated("form system is singular")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "bounds", bounds)

    @property
    def size(self) -> int:
        return len(self.rows)

    def det(self) -> Fraction:
        return mat_det(self.rows)

    def transposed_rows(self) -> Matrix:
        """Rows of the inverse-transpose: the unique system making the
        bilinear pairing sum L_i(u) L'_i(v) equal the dot product u . v."""
        return mat_transpose(mat_inverse(self.rows))

    def evaluate(self, u: Sequence[int]) -> tuple[Fraction, ...]:
        return tuple(sum(c * x for c, x in zip(row, u)) for row in self.rows)

    def admits(self, u: Sequence[int]) -> bool:
        return all(
            coerce_scalar(t).compare(abs(val)) >= 0
            for val, t in zip(self.evaluate(u), self.bounds)
        )


def pairing_identity_holds(system: LinearFormSystem, u: Sequence[int], v: Sequence[int]) -> bool:
    primed = system.transposed_rows()
    lhs = sum(
        lu * lv
        for lu, lv in zip(
            system.evaluate(u),
            (sum(c * x for c, x in zip(row, v)) for row in primed),
        )
    )
    rhs = sum(a * b for a, b in zip(u, v))
    return lhs == rhs


@dataclass(frozen=True)
class TransferResult:
    v: tuple[int, ...]
    lam: ScalarLike  # (prod T_i / |det|)^(1/n), the bound scale
    lam_product: ScalarLike  # prod T_i / |det|
    primed_rows: Matrix
    primed_bounds: tuple[ScalarLike, ...]
    primed_values: tuple[Fraction, ...]


def mahler_transfer(
    system: LinearFormSystem, u: Sequence[int], budget: int = DEFAULT_BOX_BUDGET
) -> TransferResult:
    """Map a solution of the form system to one of the transposed system.

    Given u != 0 with |L_i(u)| <= T_i, searches the transposed system for
    v != 0 with |L'_0(v)| <= n lam / T_0 and |L'_i(v)| <= lam / T_i where
    lam = (T_0 ... T_n / |det|)^(1/n).  The n-th root matters: with the bare
    product the claim is false (e.g. forms (a_0 + 28/31 a_1 + 14/31 a_2,
    a_1, a_2), bounds (1/12, 2, 2): (0, -1, 2) solves the system but the
    transposed one first admits a vector at v_0 = 9 > 8).  Existence is
    classical; exhausting the search box raises SearchExhausted and is
    treated as a test failure.
    """
    u = tuple(int(x) for x in u)
    if all(x == 0 for x in u):
        raise PreconditionViolated("u must be nonzero")
    if not system.admits(u):
        raise PreconditionViolated("u does not satisfy the form system")
    n = system.size - 1
    if n < 1:
        raise PreconditionViolated("need at least two forms")
    lam_product: ScalarLike = Fraction(1) / abs(system.det())
    for t in system.bounds:
        lam_product = coerce_scalar(t) * lam_product
    lam = coerce_scalar(lam_product) ** Fraction(1, n)
    primed_bounds = [coerce_scalar(lam) * n / coerce_scalar(system.bounds[0])]
    for t in system.bounds[1:]:
        primed_bounds.append(coerce_scalar(lam) / coerce_scalar(t))
    primed = system.transposed_rows()
    # v = M^T w with |w_i| <= W_i, so |v_j| <= sum_i |M_ij| W_i.
    caps = [coerce_scalar(w).rational_upper() for w in primed_bounds]
    box = []
    total = 1
    for j in range(system.size):
        cap = sum(abs(system.rows[i][j]) * caps[i] for i in range(system.size))
        bj = math.floor(cap)
        box.append(bj)
        total *= 2 * bj + 1
        if total > budget:
            raise BoxTooLarge(f"transfer box exceeds budget ({total} > {budget})")

    def admissible(v: Sequence[int]) -> tuple[Fraction, ...] | None:
        values = tuple(sum(c * x for c, x in zip(row, v)) for row in primed)
        for val, w in zip(values, primed_bounds):
            if coerce_scalar(w).compare(abs(val)) < 0:
                return None
        return values

    top = max(box) if box else 0
    for shell in range(1, top + 1):
        ranges = [range(-min(b, shell), min(b, shell) + 1) for b in box]
        for v in itertools.product(*ranges):
            if max(abs(x) for x in v) != shell:
                continue
            values = admissible(v)
            if values is not None:
                return TransferResult(
                    v=v,
                    lam=lam,
                    lam_product=lam_product,
                    primed_rows=primed,
                    primed_bounds=tuple(primed_bounds),
                    primed_values=values,
                )
    raise SearchExhausted("transfer box contained no admissible vector")


def _positive_weights_only(r: WeightVector) -> None:
    if r.z != 0:
        raise WrongWeights("transfer constants need all weights positive")


@dataclass(frozen=True)
class TransferReport:
    found: bool
    u: tuple[int, ...] | None = None
    v: tuple[int, ...] | None = None
    lam: ScalarLike | None = None
    lam_matches: bool | None = None
    output_values: tuple[Fraction, ...] | None = None
    output_bounds: tuple[ScalarLike, ...] | None = None
    output_within_target: bool | None = None
    detail: dict = field(default_factory=dict)


def simultaneous_system(y: Sequence[Rational], r: WeightVector, c: Rational, q_bound: int) -> LinearFormSystem:
    """Forms (q, q y_i - p_i) bounded by (Q, delta Q^(-r_i)), delta = c^tau."""
    y = _check_point(y, r)
    _positive_weights_only(r)
    c = as_fraction(c)
    if not 0 < c < 1:
        raise PreconditionViolated("badness constant must lie in (0,1)")
    delta = coerce_scalar(c) ** r.tau
    n = r.n
    rows = [(Fraction(1),) + (Fraction(0),) * n]
    for i in range(n):
        row = [y[i]] + [Fraction(-1) if j == i else Fraction(0) for j in range(n)]
        rows.append(tuple(row))
    bounds = [coerce_scalar(Fraction(q_bound))]
    for ri in r.entries:
        bounds.append(delta * scaled_power(1, q_bound, -ri))
    return LinearFormSystem(rows=tuple(rows), bounds=tuple(bounds))


def transference_forward(
    y: Sequence[Rational], r: WeightVector, c: Rational, q_bound: int, budget: int = DEFAULT_BOX_BUDGET
) -> TransferReport:
    """Push a simultaneous approximation through the transfer.

    Finds q <= q_bound with dist(q y_i) <= delta q_bound^(-r_i) for all i
    (delta = c^tau), maps it to a dual vector, and verifies the constant
    relations exactly: the bound product is delta^n, its n-th root is delta,
    so the output satisfies |a_0 + a.y| <= n delta / Q = c'/Q with c' =
    n delta, and |a_i| <= Q^(r_i).
    """
    system = simultaneous_system(y, r, c, q_bound)
    y = _check_point(y, r)
    u = None
    for q in range(1, q_bound + 1):
        cand = (q,) + tuple(round_half_away(q * yi) for yi in y)
        if system.admits(cand):
            u = cand
            break
    if u is None:
        return TransferReport(found=False, detail={"reason": "no simultaneous solution at this scale"})
    res = mahler_transfer(system, u, budget)
    n = r.n
    delta = coerce_scalar(as_fraction(c)) ** r.tau
    lam_matches = (
        coerce_scalar(res.lam_product).compare(delta**n) == 0
        and coerce_scalar(res.lam).compare(delta) == 0
    )
    c_prime = delta * n
    q_cap = coerce_scalar(Fraction(q_bound))
    gap_relation_exact = coerce_scalar(res.primed_bounds[0]).compare(c_prime / q_cap) == 0
    height_relation_exact = all(
        coerce_scalar(res.primed_bounds[1 + i]).compare(scaled_power(1, q_bound, ri)) == 0
        for i, ri in enumerate(r.entries)
    )
    dual_gap_ok = (c_prime / q_cap).compare(abs(res.primed_values[0])) >= 0
    heights_ok = all(
        coerce_scalar(scaled_power(1, q_bound, ri)).compare(abs(res.v[1 + i])) >= 0
        for i, ri in enumerate(r.entries)
    )
    return TransferReport(
        found=True,
        u=u,
        v=res.v,
        lam=res.lam,
        lam_matches=lam_matches,
        output_values=res.primed_values,
        output_bounds=res.primed_bounds,
        output_within_target=dual_gap_ok and heights_ok,
        detail={
            "c_prime": c_prime,
            "delta": delta,
            "gap_relation_exact": gap_relation_exact,
            "height_relation_exact": height_relation_exact,
        },
    )


def dual_system(y: Sequence[Rational], r: WeightVector, c_prime: Rational, h_bound: int) -> LinearFormSystem:
    """Forms (a_0 + a.y, a_i) bounded by (c'/H, H^(r_i))."""
    y = _check_point(y, r)
    _positive_weights_only(r)
    c_prime = as_fraction(c_prime)
    if c_prime <= 0:
        raise PreconditionViolated("dual constant must be positive")
    rows = [(Fraction(1),) + tuple(y)]
    n = r.n
    for i in range(n):
        rows.append(tuple(Fraction(1) if j == i + 1 else Fraction(0) for j in range(n + 1)))
    bounds = [coerce_scalar(c_prime / h_bound)]
    for ri in r.entries:
        bounds.append(scaled_power(1, h_bound, ri))
    return LinearFormSystem(rows=tuple(rows), bounds=tuple(bounds))


def transference_converse(
    y: Sequence[Rational], r: WeightVector, c_prime: Rational, h_bound: int, budget: int = DEFAULT_BOX_BUDGET
) -> TransferReport:
    """Push a dual solution back to a simultaneous approximation.

    Finds (a_0, a) != 0 with |a_0 + a.y| <= c'/H and |a_i| <= H^(r_i), maps
    it through the transfer, and verifies the guaranteed bounds exactly:
    the bound product is c', so the output (q, p) has 0 < |q| <= n H
    c'^(1/n - 1) and dist(q y_i) <= c'^(1/n) H^(-r_i).  The simpler caps
    |q| < (n+1) H and dist <= c' H^(-r_i) additionally hold whenever
    c' >= (n/(n+1))^(n/(n-1)); they are reported as flags.
    """
    system = dual_system(y, r, c_prime, h_bound)
    y = _check_point(y, r)
    gap = as_fraction(c_prime) / h_bound
    caps = [closed_int_bound(b) for b in system.bounds[1:]]
    total = 1
    for cap in caps:
        total *= 2 * cap + 1
        if total > budget:
            raise BoxTooLarge("dual solution box exceeds budget")
    u = None
    for a in itertools.product(*[range(-cap, cap + 1) for cap in caps]):
        if all(x == 0 for x in a):
            continue
        dot = sum(ai * yi for ai, yi in zip(a, y))
        a0 = -round_half_away(dot)
        if abs(a0 + dot) <= gap:
            u = (a0, *a)
            break
    if u is None:
        return TransferReport(found=False, detail={"reason": "no dual solution at this scale"})
    res = mahler_transfer(system, u, budget)
    n = r.n
    lam_matches = coerce_scalar(res.lam_product).compare(as_fraction(c_prime)) == 0
    q0 = res.v[0]
    q_ok = coerce_scalar(res.primed_bounds[0]).compare(abs(q0)) >= 0
    sim_ok = True
    for i, ri in enumerate(r.entries):
        dist = abs(q0 * y[i] - res.v[1 + i])
        if coerce_scalar(res.primed_bounds[1 + i]).compare(dist) < 0:
            sim_ok = False
    q_nonzero = q0 != 0
    return TransferReport(
        found=True,
        u=u,
        v=res.v,
        lam=res.lam,
        lam_matches=lam_matches,
        output_values=res.primed_values,
        output_bounds=res.primed_bounds,
        output_within_target=q_nonzero and q_ok and sim_ok,
        detail={
            "q": q0,
            "q_cap": (n + 1) * h_bound,
            "q_within_cap": abs(q0) < (n + 1) * h_bound,
            "sim_gap_simple_ok": all(
                (coerce_scalar(as_fraction(c_prime)) * scaled_power(1, h_bound, -ri)).compare(
                    abs(q0 * y[i] - res.v[1 + i])
                )
                >= 0
                for i, ri in enumerate(r.entries)
            ),
        },
    )


def margin_implication_check(
    y: Sequence[Rational], r: WeightVector, c_prime: Rational, h_bound: int, budget: int = DEFAULT_BOX_BUDGET
) -> dict:
    """Exact consistency check between the two margins.

    A failure of the simultaneous bound c at some q <= H transfers (with
    T_0 = q, T_i = delta q^(-r_i), bound product delta^n, scale delta) to a
    dual vector of height at most q and value at most n delta = c'.  So a
    dual margin at height H strictly above c' forces the simultaneous
    margin up to H/(n+1) to be at least c = (c'/n)^(1/tau).
    """
    _positive_weights_only(r)
    c_prime = as_fraction(c_prime)
    n = r.n
    delta = c_prime / n
    if not 0 < c_prime < 1:
        raise PreconditionViolated("need 0 < c' < 1")
    dual_cert = dual_margin(y, r, h_bound, budget)
    hypothesis = as_fraction(dual_cert.margin) > c_prime
    result = {
        "dual_margin": dual_cert.margin,
        "threshold": c_prime,
        "hypothesis": hypothesis,
        "implication_holds": True,
        "sim_margin": None,
        "c": scaled_power(1, delta, 1 / r.tau),
    }
    q_max = h_bound // (n + 1)
    if hypothesis and q_max >= 1:
        sim_cert = simultaneous_margin(y, r, q_max)
        c_target = scaled_power(1, delta, 1 / r.tau)
        result["sim_margin"] = sim_cert.margin
        result["implication_holds"] = coerce_scalar(sim_cert.margin).compare(c_target) >= 0
    return result


# -- continued fractions ----------------------------------------------------


def cf_expansion(x, k: int, require_exact: bool = False) -> list[int]:
    """First k continued-fraction partial quotients of a rational or of every
    point in a rational interval (the determined common prefix).

    Rationals use plain Euclid, so the final quotient is never 1 (except for
    integers, giving [x]).  For an interval, quotients are emitted while both
    endpoints agree; require_exact turns a short answer into Undetermined.
    """
    if k < 0:
        raise PreconditionViolated("k must be nonnegative")
    if isinstance(x, RatInterval):
        lo, hi = x.lo, x.hi
        if lo == hi:
            return cf_expansion(lo, k, require_exact)
        out: list[int] = []
        while len(out) < k:
            flo, fhi = math.floor(lo), math.floor(hi)
            if flo != fhi:
                break
            out.append(flo)
            rlo, rhi = lo - flo, hi - fhi
            if rlo == 0 or rhi == 0:
                break  # an endpoint terminates here; deeper quotients split
            lo, hi = 1 / rhi, 1 / rlo
        if require_exact and len(out) < k:
            raise Undetermined(f"only {len(out)} quotients determined, wanted {k}")
        return out
    x = as_fraction(x)
    out = []
    while len(out) < k:
        f = math.floor(x)
        out.append(f)
        rem = x - f
        if rem == 0:
            break
        x = 1 / rem
    if require_exact and len(out) < k:
        raise Undetermined(f"expansion terminated after {len(out)} quotients")
    return out
