"""Command-line pipeline: certify, construct, intersect, count, algebraic, sweep, report.

One run writes one directory.  Machine outputs are schema-versioned JSON with
every rational as an exact string; humans get aligned tables on stdout.
Identical configuration yields byte-identical certificates; only report
timing fields may differ between reruns.
"""

from __future__ import annotations

import argparse
import itertools
import json
import os
import shutil
import sys
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from importlib import metadata
from typing import Any, Sequence

from .algebraic import (
    bn_margin,
    bstar_margin,
    minkowski_polynomial,
    wstar_witnesses,
)
from .cantor import (
    ConstructionParams,
    Level,
    RSequence,
    build_r_sequence,
    compute_dq,
    dimension_lower_bound,
    dq_supremum,
    extract_point,
    intersect_sequences,
    run_indices,
    scaling_ratio,
)
from .certify import BadCertificate, dual_margin, simultaneous_margin
from .core import (
    BadPointsError,
    BoxTooLarge,
    PreconditionViolated,
    RatInterval,
    WeightVector,
    coerce_scalar,
    format_rational,
    format_scalar,
    interval,
    parse_rational,
    round_half_away,
    weights,
)
from .dangerous import (
    DEFAULT_UNION_BUDGET,
    PolyCurve,
    TelemetryRow,
    monomial_curve,
    property_f,
)
from .lattice import (
    Box,
    closed_int_bound,
    count_in_box,
    delta_certify_ge_one,
    flow_lattice,
    lattice_det,
    strict_int_bound,
)
from .polynomials import poly

SCHEMA = 1
OUTPUT_ROOT_VAR = "BADPOINTS_OUTPUT_ROOT"

try:
    VERSION = metadata.version("badpoints")
except metadata.PackageNotFoundError:  # running from a source tree
    VERSION = "0.1.0"


# -- parsing ----------------------------------------------------------------


def _fractions(text: str) -> tuple[Fraction, ...]:
    return tuple(parse_rational(part) for part in text.split(","))


def _weight_vector(text: str) -> WeightVector:
    return weights(*_fractions(text))


def _rat_interval(text: str) -> RatInterval:
    lo, hi = _fractions(text)
    return interval(lo, hi)


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(part) for part in text.split(","))


def _curve(text: str, domain: RatInterval) -> PolyCurve:
    """veronese:N, or lowest-first coefficient lists joined by ';'."""
    if text.startswith("veronese:"):
        return monomial_curve(int(text.split(":", 1)[1]), domain)
    components = tuple(poly(_fractions(part)) for part in text.split(";"))
    return PolyCurve(components=components, domain=domain)


def _curve_text(curve: PolyCurve) -> str:
    return ";".join(",".join(format_rational(c) for c in comp) for comp in curve.components)


# -- encoding ---------------------------------------------------------------


def _canonical(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _pair(iv: RatInterval) -> list[str]:
    return [format_rational(iv.lo), format_rational(iv.hi)]


def _inequality(name: str, lhs: Any, relation: str, rhs: Any, ok: bool) -> dict:
    return {
        "name": name,
        "lhs": format_scalar(lhs),
        "relation": relation,
        "rhs": format_scalar(rhs),
        "ok": bool(ok),
    }


def _table(headers: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    widths = [len(h) for h in headers]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    lines = ["  ".join(h.rjust(w) for h, w in zip(headers, widths))]
    for row in rows:
        lines.append("  ".join(cell.rjust(w) for cell, w in zip(row, widths)))
    return "\n".join(lines)


def _approx(x: Any) -> str:
    scalar = coerce_scalar(x)
    value = float(scalar.coeff) * float(scalar.base) ** float(scalar.exponent)
    return f"{value:.6g}"


# -- persistence ------------------------------------------------------------


def _resolve_out(explicit: str | None, command: str) -> str:
    if explicit:
        return explicit
    return os.path.join(os.environ.get(OUTPUT_ROOT_VAR, "runs"), command)


def _emit_dir(run_dir: str, files: dict[str, str]) -> None:
    """Write every file into a scratch directory, then swap it in whole."""
    partial = run_dir.rstrip("/") + ".partial"
    if os.path.exists(partial):
        shutil.rmtree(partial)
    for rel, text in files.items():
        path = os.path.join(partial, rel)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        with open(path, "w") as fh:
            fh.write(text)
    if os.path.exists(run_dir):
        shutil.rmtree(run_dir)
    os.replace(partial, run_dir)


def _report_skeleton(command: str, inputs: dict, started: float) -> dict:
    return {
        "schema": SCHEMA,
        "version": VERSION,
        "command": command,
        "inputs": inputs,
        "timing": {"wall_seconds": round(time.perf_counter() - started, 6)},
    }


# -- config file ------------------------------------------------------------


def _load_config(ns: argparse.Namespace, parser: argparse.ArgumentParser) -> None:
    """Fill unset arguments from the config file; flags win."""
    if not ns.config:
        return
    try:
        with open(ns.config) as fh:
            data = json.load(fh)
    except (OSError, ValueError) as exc:
        parser.error(f"cannot read config {ns.config}: {exc}")
    if not isinstance(data, dict):
        parser.error(f"config {ns.config} must hold a JSON object")
    recorded = data.get("command")
    if recorded is not None and recorded != ns.command:
        parser.error(f"config is for '{recorded}', not '{ns.command}'")
    for key, value in data.items():
        if key in ("command", "schema"):
            continue
        attr = key.replace("-", "_")
        if not hasattr(ns, attr):
            parser.error(f"config key '{key}' is not a '{ns.command}' option")
        if getattr(ns, attr) is None:
            setattr(ns, attr, value)


def _require(ns: argparse.Namespace, parser: argparse.ArgumentParser, *names: str) -> None:
    for name in names:
        if getattr(ns, name.replace("-", "_")) is None:
            parser.error(f"--{name} is required (flag or config file)")


# -- certify ----------------------------------------------------------------


def _certificate_entry(cert: BadCertificate, threshold: Any | None) -> dict:
    entry = cert.to_dict()
    entry["schema"] = SCHEMA
    if threshold is not None:
        entry["threshold"] = format_scalar(threshold)
        entry["ok"] = cert.margin_at_least(threshold)
    return entry


def cmd_certify(ns: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    _load_config(ns, parser)
    _require(ns, parser, "y", "weights")
    if ns.dual is None:
        ns.dual = False
    y = _fractions(ns.y)
    r = _weight_vector(ns.weights)
    started = time.perf_counter()
    if ns.dual:
        _require(ns, parser, "H")
        cert = dual_margin(y, r, ns.H)
        bound_key, bound = "H", ns.H
    else:
        _require(ns, parser, "Q")
        cert = simultaneous_margin(y, r, ns.Q)
        bound_key, bound = "Q", ns.Q
    config = {
        "schema": SCHEMA,
        "command": "certify",
        "dual": ns.dual,
        "y": ns.y,
        "weights": ns.weights,
        bound_key: bound,
    }
    entry = _certificate_entry(cert, None)
    report = _report_skeleton("certify", config, started)
    report["certificates"] = [entry]
    report["checks"] = [
        _inequality("margin positive", cert.margin, ">", Fraction(0), coerce_scalar(cert.margin).sign() > 0)
    ]
    if ns.json:
        print(_canonical(entry), end="")
    else:
        print(f"{cert.kind} margin over heights <= {bound}: "
              f"{format_scalar(cert.margin)} (~{_approx(cert.margin)})")
        print(f"witness vector {cert.witness.vector} at height {cert.witness.height}")
    if ns.out is not None:
        run_dir = _resolve_out(ns.out, "certify")
        _emit_dir(run_dir, {
            "config.json": _canonical(config),
            "certificate.json": _canonical(entry),
            "report.json": _canonical(report),
        })
        if not ns.json:
            print(f"wrote {run_dir}")
    return 0


# -- construct / intersect ---------------------------------------------------


def _build_all(
    param_list: Sequence[ConstructionParams], jobs: int
) -> tuple[list[RSequence], list[list[TelemetryRow]]]:
    telemetries: list[list[TelemetryRow]] = [[] for _ in param_list]

    def build(i: int) -> RSequence:
        return build_r_sequence(param_list[i], telemetry=telemetries[i])

    if jobs > 1 and len(param_list) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            seqs = list(pool.map(build, range(len(param_list))))
    else:
        seqs = [build(i) for i in range(len(param_list))]
    return seqs, telemetries


def _level_stats(seq: RSequence) -> list[dict]:
    m = seq.params.depth_offset
    rows = []
    for lev in seq.levels:
        row: dict[str, Any] = {
            "q": lev.q,
            "t": lev.q - m,
            "survivors": lev.count,
            "removed": lev.removed_count,
        }
        if lev.q >= 1:
            row["dq"] = format_rational(compute_dq(seq, lev.q))
        rows.append(row)
    return rows


def _level_file(seq: RSequence, lev: Level, endpoint_limit: int = 4096) -> str:
    data: dict[str, Any] = {
        "schema": SCHEMA,
        "q": lev.q,
        "t": lev.q - seq.params.depth_offset,
        "survivors": lev.count,
        "runs": [list(run) for run in lev.survivors],
        "removed": {str(p): [list(run) for run in runs] for p, runs in sorted(lev.removed.items())},
    }
    if lev.q >= 1:
        data["dq"] = format_rational(compute_dq(seq, lev.q))
    if 0 < lev.count <= endpoint_limit:
        data["endpoints"] = [
            _pair(seq.params.child_interval(lev.q, i)) for i in run_indices(lev.survivors)
        ]
    return _canonical(data)


def _default_height(params: ConstructionParams) -> int:
    t_max = params.q_max - params.depth_offset
    if t_max < 1:
        return 0
    return closed_int_bound(coerce_scalar(params.base) ** t_max)


def _construct_outputs(
    seq: RSequence,
    components: Sequence[tuple[ConstructionParams, RSequence]],
    telemetries: Sequence[Sequence[TelemetryRow]],
    config: dict,
    started: float,
    pick: str,
    certify_height: int | None,
) -> tuple[dict[str, str], list[str]]:
    """Files for the run directory plus human-readable lines."""
    params = seq.params
    stats = _level_stats(seq)
    dsup = dq_supremum(seq) if seq.depth >= 1 else Fraction(0)
    dim = dimension_lower_bound(params.branching, dsup)

    lines = [
        f"curve {config['curve']} on [{config['domain']}]",
        f"branching R={params.branching}  offset m={params.depth_offset}  depth q_max={params.q_max}",
    ]
    table_rows = []
    for row in stats:
        dq_cell = row.get("dq", "-")
        approx = f"~{_approx(parse_rational(row['dq']))}" if "dq" in row else ""
        table_rows.append([str(row["q"]), str(row["t"]), str(row["survivors"]),
                           str(row["removed"]), dq_cell, approx])
    lines.append(_table(["q", "t", "survivors", "removed", "d_q", ""], table_rows))

    checks = [
        _inequality("removal supremum within the nonemptiness bound",
                    dsup, "<=", Fraction(1), dsup <= 1)
    ]
    verdict = ("all deeper levels stay nonempty" if dsup <= 1
               else "nonemptiness not certified at this depth")
    lines.append(f"removal supremum {format_rational(dsup)} (~{_approx(dsup)}); {verdict}")
    if dim is not None:
        lines.append(f"dimension lower bound {format_rational(dim)}")

    enclosure = extract_point(seq, pick=pick)
    point = (enclosure.lo + enclosure.hi) / 2
    lines.append(f"extracted {pick} enclosure [{format_rational(enclosure.lo)}, "
                 f"{format_rational(enclosure.hi)}]")

    cert_entries = []
    for comp_params, _ in components:
        height = certify_height if certify_height is not None else _default_height(comp_params)
        if height < 1:
            continue
        cert = dual_margin(comp_params.curve.point(point), comp_params.r, height)
        threshold = coerce_scalar(comp_params.kappa) / coerce_scalar(comp_params.base)
        entry = _certificate_entry(cert, threshold)
        cert_entries.append(entry)
        checks.append(_inequality(
            f"dual margin at heights <= {height} for weights ({', '.join(map(str, comp_params.r.entries))})",
            cert.margin, ">=", threshold, entry["ok"]))
        lines.append(f"dual margin {format_scalar(cert.margin)} (~{_approx(cert.margin)}) "
                     f">= {format_scalar(threshold)} at heights <= {height}: "
                     f"{'ok' if entry['ok'] else 'FAILED'}")

    certificate = {
        "schema": SCHEMA,
        "enclosure": _pair(enclosure),
        "point": format_rational(point),
        "levels": stats,
        "dq_supremum": format_rational(dsup),
        "dimension_lower_bound": None if dim is None else format_rational(dim),
        "certificates": cert_entries,
    }

    files = {"config.json": _canonical(config)}
    for lev in seq.levels:
        files[f"levels/q{lev.q:02d}.json"] = _level_file(seq, lev)
    files["levels/index.json"] = _canonical({
        "schema": SCHEMA,
        "depth": seq.depth,
        "first_empty": seq.first_empty,
        "aborted_at": seq.aborted_at,
    })
    telemetry_refs = []
    for i, rows in enumerate(telemetries):
        rel = f"telemetry/w{i}.csv"
        telemetry_refs.append(rel)
        files[rel] = "\n".join([TelemetryRow.csv_header()] + [row.csv() for row in rows]) + "\n"
    files["certificate.json"] = _canonical(certificate)

    report = _report_skeleton(config["command"], config, started)
    report["levels"] = stats
    report["certificates"] = "certificate.json"
    report["telemetry"] = telemetry_refs
    report["checks"] = checks
    files["report.json"] = _canonical(report)
    return files, lines


def cmd_construct(ns: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    _load_config(ns, parser)
    _require(ns, parser, "curve", "weights", "branching", "offset", "q-max")
    if ns.domain is None:
        ns.domain = "51/100,9/16"
    if ns.budget is None:
        ns.budget = DEFAULT_UNION_BUDGET
    if ns.pick is None:
        ns.pick = "leftmost"
    if ns.jobs is None:
        ns.jobs = 1
    if isinstance(ns.weights, str):
        ns.weights = [ns.weights]
    started = time.perf_counter()
    domain = _rat_interval(ns.domain)
    curve = _curve(ns.curve, domain)
    weight_vectors = [_weight_vector(text) for text in ns.weights]
    constants = property_f([curve], domain)
    param_list = [
        ConstructionParams(
            r=r, curve=curve, constants=constants, branching=ns.branching,
            depth_offset=ns.offset, q_max=ns.q_max, budget=ns.budget,
        )
        for r in weight_vectors
    ]
    seqs, telemetries = _build_all(param_list, ns.jobs)
    for params, seq in zip(param_list, seqs):
        if seq.first_empty is not None:
            q = seq.first_empty
            print(f"error: level {q} (t={q - params.depth_offset}) has no survivors for "
                  f"weights ({', '.join(map(str, params.r.entries))}); raise the depth "
                  f"offset m or the branching R", file=sys.stderr)
            return 1
    seq = seqs[0] if len(seqs) == 1 else intersect_sequences(seqs)
    config = {
        "schema": SCHEMA,
        "command": "construct",
        "curve": ns.curve,
        "domain": ns.domain,
        "weights": list(ns.weights),
        "branching": ns.branching,
        "offset": ns.offset,
        "q_max": ns.q_max,
        "budget": ns.budget,
        "pick": ns.pick,
        "certify_height": ns.certify_height,
        "jobs": ns.jobs,
    }
    files, lines = _construct_outputs(
        seq, list(zip(param_list, seqs)), telemetries, config, started,
        ns.pick, ns.certify_height,
    )
    run_dir = _resolve_out(ns.out, "construct")
    _emit_dir(run_dir, files)
    print("\n".join(lines))
    print(f"wrote {run_dir}")
    return 0


def _load_run(run_dir: str, single_only: bool = True) -> tuple[ConstructionParams, RSequence, dict]:
    """Rebuild a persisted construction; derived constants are recomputed.

    Intersection runs reload under their head parameters when single_only
    is off; the levels themselves are the intersected sequence either way.
    """
    with open(os.path.join(run_dir, "config.json")) as fh:
        config = json.load(fh)
    if config.get("command") not in ("construct", "intersect"):
        raise PreconditionViolated(f"{run_dir} is not a construction run")
    if single_only and len(config["weights"]) != 1:
        raise PreconditionViolated(f"{run_dir} holds an intersection, not a single sequence")
    domain = _rat_interval(config["domain"])
    curve = _curve(config["curve"], domain)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # the original build already warned
        params = ConstructionParams(
            r=_weight_vector(config["weights"][0]),
            curve=curve,
            constants=property_f([curve], domain),
            branching=config["branching"],
            depth_offset=config["offset"],
            q_max=config["q_max"],
            budget=config["budget"],
        )
    with open(os.path.join(run_dir, "levels", "index.json")) as fh:
        index = json.load(fh)
    levels = []
    for q in range(index["depth"] + 1):
        with open(os.path.join(run_dir, "levels", f"q{q:02d}.json")) as fh:
            data = json.load(fh)
        levels.append(Level(
            q=data["q"],
            survivors=tuple((a, b) for a, b in data["runs"]),
            removed={int(p): tuple((a, b) for a, b in runs)
                     for p, runs in data["removed"].items()},
        ))
    seq = RSequence(
        params=params, levels=tuple(levels),
        first_empty=index["first_empty"], aborted_at=index["aborted_at"],
    )
    return params, seq, config


def cmd_intersect(ns: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    _load_config(ns, parser)
    _require(ns, parser, "run")
    if isinstance(ns.run, str):
        ns.run = [ns.run]
    if len(ns.run) < 2:
        parser.error("intersect needs at least two --run directories")
    if ns.pick is None:
        ns.pick = "leftmost"
    started = time.perf_counter()
    loaded = [_load_run(run_dir) for run_dir in ns.run]
    seq = intersect_sequences([s for _, s, _ in loaded])
    head = loaded[0][2]
    config = {
        "schema": SCHEMA,
        "command": "intersect",
        "run": list(ns.run),
        "curve": head["curve"],
        "domain": head["domain"],
        "weights": [cfg["weights"][0] for _, _, cfg in loaded],
        "branching": head["branching"],
        "offset": head["offset"],
        "q_max": head["q_max"],
        "budget": head["budget"],
        "pick": ns.pick,
        "certify_height": ns.certify_height,
        "jobs": 1,
    }
    files, lines = _construct_outputs(
        seq, [(p, s) for p, s, _ in loaded], [[] for _ in loaded], config, started,
        ns.pick, ns.certify_height,
    )
    run_dir = _resolve_out(ns.out, "intersect")
    _emit_dir(run_dir, files)
    print("\n".join(lines))
    print(f"wrote {run_dir}")
    return 0


# -- count -------------------------------------------------------------------


def _flow_box_minimum(
    r: WeightVector, b: Any, t: int, y: Sequence[Fraction], budget: int
) -> tuple[Fraction, tuple[int, ...]] | None:
    """Exact min of |a_0 + a.y| over nonzero integer a with |a_i| < b^(r_i t).

    None when the box admits no nonzero vector (levels before removal starts).
    """
    caps = [strict_int_bound(coerce_scalar(b) ** (ri * t)) for ri in r.entries]
    total = 1
    for cap in caps:
        total *= 2 * cap + 1
    if total > budget:
        raise BoxTooLarge(f"admissible box exceeds budget ({total} > {budget})")
    best: tuple[Fraction, tuple[int, ...]] | None = None
    for a in itertools.product(*[range(-cap, cap + 1) for cap in caps]):
        if all(x == 0 for x in a):
            continue
        dot = sum(ai * yi for ai, yi in zip(a, y))
        a0 = -round_half_away(dot)
        dist = abs(a0 + dot)
        if best is None or dist < best[0]:
            best = (dist, (a0, *a))
    return best


def cmd_count(ns: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    _load_config(ns, parser)
    _require(ns, parser, "y", "weights", "branching", "offset", "t")
    started = time.perf_counter()
    r = _weight_vector(ns.weights)
    y = _fractions(ns.y)
    base = scaling_ratio(ns.branching, r)
    kappa = Fraction(1, ns.branching**ns.offset)
    lattice = flow_lattice(r, base, ns.t, kappa, y)
    determinant = lattice_det(lattice)
    gap = coerce_scalar(kappa) * coerce_scalar(base) ** (-ns.t)
    best = _flow_box_minimum(r, base, ns.t, y, DEFAULT_UNION_BUDGET)
    safe = best is None or gap.compare(best[0]) <= 0
    lattice_safe, violating = delta_certify_ge_one(lattice)
    config = {
        "schema": SCHEMA,
        "command": "count",
        "y": ns.y,
        "weights": ns.weights,
        "branching": ns.branching,
        "offset": ns.offset,
        "t": ns.t,
        "radius": ns.radius,
    }
    result = {
        "schema": SCHEMA,
        "base": format_scalar(base),
        "kappa": format_rational(kappa),
        "danger_gap": format_scalar(gap),
        "box_minimum": None if best is None else format_rational(best[0]),
        "box_minimum_vector": None if best is None else list(best[1]),
        "determinant": format_scalar(determinant),
        "safe": safe,
    }
    checks = []
    if best is not None:
        checks.append(_inequality(
            "closest admissible form value stays outside the danger gap",
            gap, "<=", best[0], safe))
    checks.append(_inequality(
        "verdict agrees with the lattice first-minimum test",
        int(safe), "=", int(lattice_safe), safe == lattice_safe))
    human = [
        f"flow lattice at t={ns.t}: base {format_scalar(base)}, kappa {format_rational(kappa)}",
        f"determinant {format_scalar(determinant)}, danger gap {format_scalar(gap)} "
        f"(~{_approx(gap)})",
    ]
    if best is None:
        human.append("no nonzero admissible vectors at this scale; trivially safe")
    else:
        human.append(f"closest admissible value {format_rational(best[0])} "
                     f"(~{_approx(best[0])}) at {list(best[1])}")
    human.append("point is " + ("outside every dangerous piece at this scale" if safe
                                else "inside a dangerous piece at this scale"))
    if safe != lattice_safe:
        human.append(f"WARNING: lattice test disagrees (witness {violating})")
    if ns.radius is not None:
        radius = parse_rational(ns.radius)
        box = Box(thetas=tuple(radius for _ in range(lattice.dim)))
        box_count = count_in_box(lattice, box)
        result["box_radius"] = format_rational(radius)
        result["count"] = box_count.count
        result["rank"] = box_count.rank
        human.insert(2, f"points in the open box of radius {ns.radius}: "
                        f"{box_count.count} (rank {box_count.rank})")
    report = _report_skeleton("count", config, started)
    report["result"] = result
    report["checks"] = checks
    if ns.json:
        print(_canonical(result), end="")
    else:
        print("\n".join(human))
    if ns.out is not None:
        run_dir = _resolve_out(ns.out, "count")
        _emit_dir(run_dir, {
            "config.json": _canonical(config),
            "result.json": _canonical(result),
            "report.json": _canonical(report),
        })
        if not ns.json:
            print(f"wrote {run_dir}")
    return 0


# -- algebraic ----------------------------------------------------------------


def cmd_algebraic(ns: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    _load_config(ns, parser)
    _require(ns, parser, "mode", "xi", "degree")
    if ns.nonvanishing is None:
        ns.nonvanishing = False
    started = time.perf_counter()
    xi = parse_rational(ns.xi)
    n = ns.degree
    config: dict[str, Any] = {
        "schema": SCHEMA, "command": "algebraic", "mode": ns.mode,
        "xi": ns.xi, "degree": n,
    }
    result: dict[str, Any] = {"schema": SCHEMA, "mode": ns.mode}
    human: list[str] = []
    if ns.mode == "value-margin":
        _require(ns, parser, "H")
        config.update({"H": ns.H, "nonvanishing": ns.nonvanishing})
        margin, witness = bn_margin(xi, n, ns.H, nonvanishing=ns.nonvanishing)
        result.update({
            "margin": format_rational(margin),
            "witness": list(witness.coefficients),
        })
        human.append(f"scaled polynomial value margin at heights <= {ns.H}: "
                     f"{format_rational(margin)} (~{_approx(margin)})")
        human.append(f"witness coefficients {list(witness.coefficients)}")
    elif ns.mode == "distance-margin":
        _require(ns, parser, "H")
        config["H"] = ns.H
        bracket, witness = bstar_margin(xi, n, ns.H)
        result.update({
            "bracket": [format_rational(bracket.lower), format_rational(bracket.upper)],
            "witness": {
                "coefficients": list(witness.poly.coefficients),
                "height": witness.height,
                "root_enclosure": _pair(witness.root_enclosure),
            },
        })
        human.append(f"scaled distance margin at heights <= {ns.H}: between "
                     f"{format_rational(bracket.lower)} and {format_rational(bracket.upper)}")
        human.append(f"witness {list(witness.poly.coefficients)} at height {witness.height}")
    elif ns.mode == "close-roots":
        _require(ns, parser, "c2", "h-range")
        config.update({"c2": ns.c2, "h_range": ns.h_range})
        lo, hi = _ints(ns.h_range)
        found = wstar_witnesses(xi, n, parse_rational(ns.c2), (lo, hi))
        result["witnesses"] = [
            {
                "coefficients": list(w.poly.coefficients),
                "height": w.height,
                "root_enclosure": _pair(w.root_enclosure),
            }
            for w in found
        ]
        human.append(f"{len(found)} algebraic numbers within {ns.c2} * H^-{n + 1} "
                     f"for heights in [{lo}, {hi}]")
        for w in found:
            human.append(f"  {list(w.poly.coefficients)} height {w.height} "
                         f"root in [{format_rational(w.root_enclosure.lo)}, "
                         f"{format_rational(w.root_enclosure.hi)}]")
    elif ns.mode == "small-poly":
        _require(ns, parser, "Q", "eps0")
        config.update({"Q": ns.Q, "eps0": ns.eps0, "deriv_bound": ns.deriv_bound})
        deriv_bound = None if ns.deriv_bound is None else parse_rational(ns.deriv_bound)
        found = minkowski_polynomial(xi, n, ns.Q, parse_rational(ns.eps0), deriv_bound=deriv_bound)
        result["coefficients"] = list(found.coefficients)
        result["value"] = format_rational(found.value(xi))
        result["derivative_value"] = format_rational(found.derivative().value(xi))
        human.append(f"small polynomial {list(found.coefficients)}")
        human.append(f"value {format_rational(found.value(xi))}, derivative "
                     f"{format_rational(found.derivative().value(xi))}")
    else:
        parser.error(f"unknown mode {ns.mode!r}")
    report = _report_skeleton("algebraic", config, started)
    report["result"] = result
    if ns.json:
        print(_canonical(result), end="")
    else:
        print("\n".join(human))
    if ns.out is not None:
        run_dir = _resolve_out(ns.out, "algebraic")
        _emit_dir(run_dir, {
            "config.json": _canonical(config),
            "result.json": _canonical(result),
            "report.json": _canonical(report),
        })
        if not ns.json:
            print(f"wrote {run_dir}")
    return 0


# -- sweep ---------------------------------------------------------------------


def cmd_sweep(ns: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    _load_config(ns, parser)
    _require(ns, parser, "curve", "weights", "branchings", "offsets", "q-extra")
    if ns.domain is None:
        ns.domain = "51/100,9/16"
    if ns.budget is None:
        ns.budget = DEFAULT_UNION_BUDGET
    if ns.dq_bound is None:
        ns.dq_bound = "1"
    if ns.jobs is None:
        ns.jobs = 1
    started = time.perf_counter()
    domain = _rat_interval(ns.domain)
    curve = _curve(ns.curve, domain)
    r = _weight_vector(ns.weights)
    constants = property_f([curve], domain)
    bound = None if ns.dq_bound == "none" else parse_rational(ns.dq_bound)
    branchings = _ints(ns.branchings) if isinstance(ns.branchings, str) else tuple(ns.branchings)
    offsets = _ints(ns.offsets) if isinstance(ns.offsets, str) else tuple(ns.offsets)
    pairs = [(R, m) for R in branchings for m in sorted(offsets)]

    def probe(pair: tuple[int, int]) -> dict:
        R, m = pair
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            params = ConstructionParams(
                r=r, curve=curve, constants=constants, branching=R,
                depth_offset=m, q_max=m + ns.q_extra, budget=ns.budget,
            )
            seq = build_r_sequence(params, abort_above_dq=bound)
        deepest = max(lev.q for lev in seq.levels if lev.count)
        dq_max = dq_supremum(seq) if seq.depth >= 1 else Fraction(0)
        if seq.first_empty is not None:
            status = f"empty at level {seq.first_empty}"
        elif seq.aborted_at is not None:
            status = f"removal sum over {format_rational(bound)} at level {seq.aborted_at}"
        else:
            status = "pass"
        return {
            "branching": R,
            "offset": m,
            "deepest_nonempty": deepest,
            "dq_max": format_rational(dq_max),
            "status": status,
        }

    if ns.jobs > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=ns.jobs) as pool:
            rows = list(pool.map(probe, pairs))
    else:
        rows = [probe(pair) for pair in pairs]
    selected = next((row for row in rows if row["status"] == "pass"), None)
    config = {
        "schema": SCHEMA,
        "command": "sweep",
        "curve": ns.curve,
        "domain": ns.domain,
        "weights": ns.weights,
        "branchings": list(branchings),
        "offsets": list(offsets),
        "q_extra": ns.q_extra,
        "dq_bound": ns.dq_bound,
        "budget": ns.budget,
        "jobs": ns.jobs,
    }
    result = {
        "schema": SCHEMA,
        "table": rows,
        "selected": None if selected is None else
                    {"branching": selected["branching"], "offset": selected["offset"]},
    }
    report = _report_skeleton("sweep", config, started)
    report["result"] = result
    if ns.json:
        print(_canonical(result), end="")
    else:
        print(_table(
            ["R", "m", "deepest", "d_q max", "status"],
            [[str(row["branching"]), str(row["offset"]), str(row["deepest_nonempty"]),
              row["dq_max"], row["status"]] for row in rows],
        ))
        if selected is None:
            print("no passing pair")
        else:
            print(f"selected R={selected['branching']} m={selected['offset']}")
    if ns.out is not None:
        run_dir = _resolve_out(ns.out, "sweep")
        _emit_dir(run_dir, {
            "config.json": _canonical(config),
            "result.json": _canonical(result),
            "report.json": _canonical(report),
        })
        if not ns.json:
            print(f"wrote {run_dir}")
    return 0


# -- report ---------------------------------------------------------------------


def cmd_report(ns: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    _load_config(ns, parser)
    _require(ns, parser, "run")
    with open(os.path.join(ns.run, "report.json")) as fh:
        report = json.load(fh)
    if ns.json:
        print(_canonical(report), end="")
        if not ns.verify:
            return 0
    else:
        print(f"{report['command']} run, version {report['version']}, "
              f"{report['timing']['wall_seconds']}s")
        if "levels" in report:
            print(_table(
                ["q", "t", "survivors", "removed", "d_q"],
                [[str(row["q"]), str(row["t"]), str(row["survivors"]),
                  str(row["removed"]), row.get("dq", "-")] for row in report["levels"]],
            ))
        for check in report.get("checks", []):
            mark = "ok" if check["ok"] else "FAILED"
            print(f"check {check['name']}: {check['lhs']} {check['relation']} "
                  f"{check['rhs']} {mark}")
    if not ns.verify:
        return 0
    failures = 0
    if report["command"] in ("construct", "intersect") and "levels" in report:
        _, seq, _ = _load_run(ns.run, single_only=False)
        for row in report["levels"]:
            if "dq" not in row:
                continue
            recomputed = compute_dq(seq, row["q"])
            if format_rational(recomputed) != row["dq"]:
                failures += 1
                print(f"verify: level {row['q']} removal sum mismatch "
                      f"({row['dq']} recorded, {format_rational(recomputed)} recomputed)")
        cert_path = os.path.join(ns.run, report["certificates"])
        with open(cert_path) as fh:
            certificate = json.load(fh)
        for entry in certificate["certificates"]:
            y = tuple(parse_rational(v) for v in entry["point"])
            r = weights(*[parse_rational(w) for w in entry["weights"]])
            cert = dual_margin(y, r, entry["bound"])
            if format_scalar(cert.margin) != entry["margin"]:
                failures += 1
                print(f"verify: certificate margin mismatch ({entry['margin']} recorded, "
                      f"{format_scalar(cert.margin)} recomputed)")
    print("verify: " + ("all recomputations match" if failures == 0 else f"{failures} mismatches"))
    return 1 if failures else 0


# -- entry point -------------------------------------------------------------


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="JSON file supplying defaults for the flags")
    sub.add_argument("--out", help="run directory (default: $%s/<command>)" % OUTPUT_ROOT_VAR)
    sub.add_argument("--json", action="store_true", help="machine output on stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="badpoints",
        description="Construct and certify weighted badly approximable points "
                    "on polynomial curves, all in exact arithmetic.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {VERSION}")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("certify", help="margin of a point against rational approximants")
    p.add_argument("--y", help="point coordinates, comma-separated rationals")
    p.add_argument("--weights", help="approximation weights, comma-separated rationals")
    p.add_argument("--dual", action="store_const", const=True, default=None,
                   help="dual-form margin over integer coefficient vectors")
    p.add_argument("--Q", type=int, help="denominator bound for the simultaneous form")
    p.add_argument("--H", type=int, help="height bound for the dual form")
    _add_common(p)

    p = subs.add_parser("construct", help="build a nested surviving-interval sequence")
    p.add_argument("--curve", help="veronese:N or ';'-joined coefficient lists, lowest first")
    p.add_argument("--domain", help="curve parameter interval lo,hi")
    p.add_argument("--weights", action="append",
                   help="weight vector; repeat to intersect several constructions")
    p.add_argument("--branching", type=int, help="children per interval, at least 4")
    p.add_argument("--offset", type=int, help="free levels before removal starts")
    p.add_argument("--q-max", type=int, dest="q_max", help="deepest level to build")
    p.add_argument("--budget", type=int, help="dangerous-union enumeration budget")
    p.add_argument("--pick", choices=("leftmost", "midmost"), help="which survivor to extract")
    p.add_argument("--certify-height", type=int, dest="certify_height",
                   help="dual margin height bound for the extracted point (0 skips)")
    p.add_argument("--jobs", type=int, help="parallel builds when several weight vectors")
    _add_common(p)

    p = subs.add_parser("intersect", help="intersect persisted constructions")
    p.add_argument("--run", action="append", help="construction run directory; repeat")
    p.add_argument("--pick", choices=("leftmost", "midmost"))
    p.add_argument("--certify-height", type=int, dest="certify_height")
    _add_common(p)

    p = subs.add_parser("count", help="lattice points of the unimodular flow at one scale")
    p.add_argument("--y", help="curve point, comma-separated rationals")
    p.add_argument("--weights", help="weight vector")
    p.add_argument("--branching", type=int, help="branching the scale ladder comes from")
    p.add_argument("--offset", type=int, help="free levels; sets the removal constant")
    p.add_argument("--t", type=int, help="flow scale")
    p.add_argument("--radius", help="also enumerate the open box of this radius")
    _add_common(p)

    p = subs.add_parser("algebraic", help="margins against integer polynomials and algebraic numbers")
    p.add_argument("--mode", choices=("value-margin", "distance-margin", "close-roots", "small-poly"))
    p.add_argument("--xi", help="evaluation point")
    p.add_argument("--degree", type=int, help="polynomial degree cap")
    p.add_argument("--H", type=int, help="height cap for the margin modes")
    p.add_argument("--c2", help="closeness constant for close-roots")
    p.add_argument("--h-range", dest="h_range", help="height range lo,hi for close-roots")
    p.add_argument("--Q", type=int, help="coefficient cap for small-poly")
    p.add_argument("--eps0", help="value shrink factor for small-poly")
    p.add_argument("--deriv-bound", dest="deriv_bound", help="derivative cap for small-poly")
    p.add_argument("--nonvanishing", action="store_const", const=True, default=None,
                   help="skip polynomials vanishing at the point")
    _add_common(p)

    p = subs.add_parser("sweep", help="search the (branching, offset) grid for a passing pair")
    p.add_argument("--curve")
    p.add_argument("--domain")
    p.add_argument("--weights", help="single weight vector")
    p.add_argument("--branchings", help="comma-separated branchings to try")
    p.add_argument("--offsets", help="comma-separated offsets to try")
    p.add_argument("--q-extra", type=int, dest="q_extra", help="levels past the offset to demand")
    p.add_argument("--dq-bound", dest="dq_bound", help="removal sum cap, or 'none'")
    p.add_argument("--budget", type=int)
    p.add_argument("--jobs", type=int)
    _add_common(p)

    p = subs.add_parser("report", help="re-render or re-verify a persisted run")
    p.add_argument("--run", help="run directory")
    p.add_argument("--verify", action="store_true", help="recompute removal sums and margins")
    _add_common(p)

    return parser


HANDLERS = {
    "certify": cmd_certify,
    "construct": cmd_construct,
    "intersect": cmd_intersect,
    "count": cmd_count,
    "algebraic": cmd_algebraic,
    "sweep": cmd_sweep,
    "report": cmd_report,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        return HANDLERS[ns.command](ns, parser)
    except BadPointsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
