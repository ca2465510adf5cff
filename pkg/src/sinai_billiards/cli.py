"""Command-line front end: ``sinai-billiard <command> [options]``.

Exit status: 0 on success, 2 for configuration errors, 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field

from . import __version__
from .dynamics import finite_horizon_check, free_flight_bounds
from .errors import (
    BilliardError,
    ConfigError,
    DegenerateLattice,
    IndexOutOfRange,
    InvalidInput,
    OverlappingScatterers,
    UnsupportedFamily,
)
from .geometry import build_table, min_curvature, min_gap, validate_domain
from .measures import Potential
from .orbits import census_to_csv, enumerate_fixed_points, grazing_orbit_scan
from .report import dump_csv, dump_json, dump_text, header
from .singularity import count_cells, curve_complexity, singularity_set
from .thermo import (
    entropy_from_cells,
    entropy_from_orbits,
    periodic_orbit_measure,
    s0_estimate,
    s0_grid,
    sparse_recurrence_check,
    srb_quadrature,
    tail_entropy_bound,
    usc_defect_bound,
    weak_star_distance,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
CONFIG_ERRORS = (ConfigError, InvalidInput, UnsupportedFamily, DegenerateLattice,
                 OverlappingScatterers, IndexOutOfRange)


@dataclass
class Result:
    record: dict
    columns: list | None = None
    rows: list = field(default_factory=list)
    lines: list | None = None
    raw_csv: str | None = None


def _flat(d, prefix=""):
    for k in sorted(d):
        v = d[k]
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            yield from _flat(v, key + ".")
        else:
            yield key, v


def _potential(text):
    if text in (None, "zero"):
        return Potential.zero()
    if text.startswith("tau:"):
        return Potential.scaled_tau(float(text[4:]))
    raise ConfigError(f"unknown potential {text!r}; use 'zero' or 'tau:<c>'")


def _need_table(args):
    if args.table is None:
        raise ConfigError(f"{args.command} needs --table")
    return args.table


# ------------------------------------------------------------ commands


def cmd_check_horizon(args):
    t = _need_table(args)
    v = finite_horizon_check(t, args.d_max)
    rec = {"finite": v.finite, "d_max": v.d_max, "witness": v.witness}
    return Result(rec, lines=[f"horizon: {'finite' if v.finite else 'infinite'}",
                              f"witness: {json.dumps(v.witness, sort_keys=True)}"])


def cmd_validate_domain(args):
    v = validate_domain(_need_table(args))
    rec = {"accepted": v.accepted, "violated": list(v.violated_constraints), "margin": v.margin}
    return Result(rec)


def cmd_srb_bound(args):
    tau, kappa = args.tau_min, args.kappa_min
    if tau is None or kappa is None:
        t = _need_table(args)
        tau = min_gap(t) if tau is None else tau
        kappa = min_curvature(t) if kappa is None else kappa
    val, err, _ = srb_quadrature(tau, kappa)
    rec = {"name": "srb_entropy_lower_bound", "value": val, "error_estimate": err,
           "inputs": {"tau_min": tau, "kappa_min": kappa},
           "half_log2": 0.5 * math.log(2.0)}
    return Result(rec, lines=[f"srb_entropy_lower_bound: {val:.10f}",
                              f"exceeds_half_log2: {val > 0.5 * math.log(2.0)}"])


def cmd_s0(args):
    t = _need_table(args)
    if args.n0 is not None and args.phi0 is not None:
        e = s0_estimate(t, args.n0, args.phi0, budget=args.budget, seed=args.seed)
        rec = {"n0": e.n0, "phi0": e.phi0, "value": e.value,
               "witness": [e.witness.scatterer, e.witness.r, e.witness.phi]}
        return Result(rec, ["n0", "phi0", "s0"], [[e.n0, e.phi0, e.value]])
    g = s0_grid(t, args.n0s, args.phi0s, budget=args.budget, seed=args.seed)
    rows = [list(r) for r in g.rows()]
    return Result({"grid": rows, "min": g.min(), "candidates": g.candidates},
                  ["n0", "phi0", "s0"], rows)


def cmd_cells(args):
    t = _need_table(args)
    rows = []
    for n in range(args.n_min, args.n_max + 1):
        c = count_cells(t, n, args.budget, seed=args.seed, workers=args.workers)
        rows.append([n, c.count, c.samples_used])
    rec = {"counts": rows}
    if len(rows) >= 3:
        g = entropy_from_cells([(r[0], r[1]) for r in rows if r[1] > 0])
        rec["growth"] = {"rate": g.rate, "increments": list(g.increments), "rates": list(g.rates)}
    return Result(rec, ["n", "cells", "samples_used"], rows)


def cmd_singularity(args):
    t = _need_table(args)
    cs = singularity_set(t, args.n, args.resolution)
    rec = {"order": cs.order, "curves": len(cs.curves), "vertices": cs.vertex_count()}
    return Result(rec, raw_csv=cs.to_csv())


def cmd_complexity(args):
    t = _need_table(args)
    rows = []
    for n in range(1, args.n_max + 1):
        e = curve_complexity(singularity_set(t, n, args.resolution), args.resolution)
        loc = e.location
        rows.append([n, e.K_n, e.K, loc.scatterer if loc else "", loc.r if loc else "",
                     loc.phi if loc else ""])
    return Result({"rows": rows, "caveat": "resolution-dependent"},
                  ["n", "K_n", "K_n_over_n", "scatterer", "r", "phi"], rows)


def _census(args, t, n):
    return enumerate_fixed_points(t, n, _potential(args.potential), block_budget=args.budget,
                                  max_itineraries=args.max_itineraries, seed=args.seed,
                                  workers=args.workers)


def cmd_orbits(args):
    t = _need_table(args)
    c = _census(args, t, args.n)
    rec = {"n": c.period, "count": c.count, "orbits": len(c.orbits), "weighted_sum": c.weighted_sum,
           "tried": c.tried, "partial": c.partial, "potential": c.potential}
    return Result(rec, raw_csv=census_to_csv(c))


def cmd_graze_scan(args):
    t = _need_table(args)
    hits = grazing_orbit_scan(t, args.n_max, args.threshold, block_budget=args.budget,
                              max_itineraries=args.max_itineraries, seed=args.seed,
                              workers=args.workers)
    rows = [[o.period, str(o.itinerary), o.length, m] for o, m in hits]
    rec = {"n_max": args.n_max, "threshold": args.threshold, "found": len(rows),
           "diagnostic": ("no grazing periodic orbit found" if not rows else "grazing orbits found")}
    return Result(rec, ["period", "itinerary", "length", "grazing_margin"], rows)


def cmd_sparse_recurrence(args):
    t = _need_table(args)
    kw = {}
    if args.mode == "estimated":
        kw = {"n0s": args.n0s, "phi0s": args.phi0s, "budget": args.budget, "seed": args.seed}
    rep = sparse_recurrence_check(t, _potential(args.potential), mode=args.mode,
                                  pressure_lb=args.pressure_lb, **kw)
    return Result(rep.to_dict(), lines=[f"sparse_recurrence[{args.mode}]: {rep.verdict} "
                                        f"(margin {rep.value:.6g})"])


def cmd_tail_bound(args):
    if None in (args.s0, args.K, args.tau_min, args.tau_max):
        raise ConfigError("tail-bound needs --s0, --K, --tau-min and --tau-max")
    return Result(tail_entropy_bound(args.s0, args.K, args.tau_min, args.tau_max).to_dict())


def cmd_usc_bound(args):
    if None in (args.P_mu, args.mass, args.P_top):
        raise ConfigError("usc-bound needs --P-mu, --mass and --P-top")
    return Result(usc_defect_bound(args.P_mu, args.mass, args.P_top, args.P_muS).to_dict())


def cmd_equidistribution(args):
    t = _need_table(args)
    ns = sorted(set(args.n_values) | {n + 2 for n in args.n_values})
    mus = {n: periodic_orbit_measure(_census(args, t, n)) for n in ns}
    rows = [[n, n + 2, weak_star_distance(mus[n], mus[n + 2], args.m, table=t)]
            for n in sorted(args.n_values)]
    return Result({"distances": rows, "m": args.m}, ["n", "n_plus_2", "distance"], rows)


def cmd_report(args):
    t = _need_table(args)
    lines = []
    rec = {}
    dom = None
    try:
        dom = validate_domain(t)
        lines.append(f"domain: {'accepted' if dom.accepted else 'rejected'} (margin {dom.margin:.6g})")
        rec["domain"] = {"accepted": dom.accepted, "margin": dom.margin,
                         "violated": list(dom.violated_constraints)}
    except UnsupportedFamily:
        lines.append("domain: not defined for this family")
    hz = finite_horizon_check(t, args.d_max)
    rec["horizon"] = {"finite": hz.finite, "witness": hz.witness}
    lines.append(f"horizon: {'finite' if hz.finite else 'infinite'}")
    fb = free_flight_bounds(t, seed=args.seed)
    rec["free_flight"] = {"tau_min": fb.tau_min, "tau_max": fb.tau_max}
    lines.append(f"tau_min: {fb.tau_min:.10f}  (exact)")
    lines.append(f"tau_max: {fb.tau_max:.10f}  (estimate)")
    srb, _, _ = srb_quadrature(fb.tau_min, min_curvature(t))
    rec["srb_entropy_lower_bound"] = srb
    lines.append(f"srb_entropy_lower_bound: {srb:.10f}")
    if not hz.finite:
        lines.append("finite-horizon estimators skipped")
        return Result(rec, lines=lines)
    paper = sparse_recurrence_check(t, mode="paper")
    rec["sparse_recurrence_paper"] = paper.to_dict()
    lines.append(f"sparse_recurrence[paper]: {paper.verdict} (margin {paper.value:.6g})")
    est = sparse_recurrence_check(t, mode="estimated", n0s=args.n0s, phi0s=args.phi0s,
                                  budget=args.budget // 5, seed=args.seed)
    rec["sparse_recurrence_estimated"] = est.to_dict()
    lines.append(f"sparse_recurrence[estimated]: {est.verdict} (margin {est.value:.6g}, "
                 f"s0 grid min {est.inputs['s0']:.4g})")
    counts = []
    for n in range(1, args.n_max + 1):
        c = count_cells(t, n, args.budget, seed=args.seed, workers=args.workers)
        counts.append((n, c.count))
        lines.append(f"cells[n={n}]: {c.count}")
    rec["cells"] = counts
    if len(counts) >= 3:
        g = entropy_from_cells(counts)
        rec["cell_growth_rate"] = g.rate
        lines.append(f"cell_growth_rate: {g.rate:.6f}")
    cens = []
    for n in range(2, args.n_max + 1):
        c = _census(args, t, n)
        cens.append(c)
        lines.append(f"fix[n={n}]: {c.count}")
    rec["fix"] = [(c.period, c.count) for c in cens]
    og = entropy_from_orbits(cens)
    rec["orbit_growth"] = {"sequence": list(og.sequence), "plateau": og.plateau}
    lines.append(f"orbit_growth_plateau: {og.plateau:.6f}")
    return Result(rec, lines=lines)


COMMANDS = {
    "check-horizon": cmd_check_horizon,
    "validate-domain": cmd_validate_domain,
    "srb-bound": cmd_srb_bound,
    "s0": cmd_s0,
    "cells": cmd_cells,
    "singularity": cmd_singularity,
    "complexity": cmd_complexity,
    "orbits": cmd_orbits,
    "graze-scan": cmd_graze_scan,
    "sparse-recurrence": cmd_sparse_recurrence,
    "tail-bound": cmd_tail_bound,
    "usc-bound": cmd_usc_bound,
    "equidistribution": cmd_equidistribution,
    "report": cmd_report,
}


# -------------------------------------------------------------- parsing


def _table_arg(value):
    try:
        if value.lstrip().startswith("{"):
            return build_table(json.loads(value))
        with open(value) as fh:
            return build_table(json.load(fh))
    except (OSError, json.JSONDecodeError) as exc:
        raise argparse.ArgumentTypeError(f"cannot read table spec: {exc}")
    except BilliardError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _common(p):
    p.add_argument("--table", type=_table_arg, help="table spec: JSON file or inline JSON")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="output file (default stdout)")
    p.add_argument("--format", choices=["json", "csv", "text"], default=None)
    p.add_argument("--budget", type=int, default=100_000, help="sample budget")


def build_parser():
    ap = argparse.ArgumentParser(prog="sinai-billiard", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the command described by a JSON config")
    p.add_argument("config")

    def add(name, help_):
        q = sub.add_parser(name, help=help_)
        _common(q)
        return q

    p = add("check-horizon", "finite-horizon verdict with corridor witness")
    p.add_argument("--d-max", type=int, default=10)
    add("validate-domain", "check parameters against the admissible domain")
    p = add("srb-bound", "lower bound for the SRB entropy")
    p.add_argument("--tau-min", type=float)
    p.add_argument("--kappa-min", type=float)
    for name in ("s0", "sparse-recurrence", "report"):
        p = add(name, {"s0": "grazing-frequency estimate",
                       "sparse-recurrence": "sparse recurrence check",
                       "report": "composite report"}[name])
        p.add_argument("--n0s", type=int, nargs="+", default=[5, 10, 20])
        p.add_argument("--phi0s", type=float, nargs="+", default=[1.0, 1.2, 1.4, 1.5])
        if name == "s0":
            p.add_argument("--n0", type=int)
            p.add_argument("--phi0", type=float)
        if name == "sparse-recurrence":
            p.add_argument("--mode", choices=["paper", "estimated"], default="paper")
            p.add_argument("--potential", default="zero")
            p.add_argument("--pressure-lb", type=float)
        if name == "report":
            p.add_argument("--n-max", type=int, default=6)
            p.add_argument("--d-max", type=int, default=10)
            p.add_argument("--potential", default="zero")
            p.add_argument("--max-itineraries", type=int, default=2_000_000)
    p = add("cells", "distinct itinerary counts")
    p.add_argument("--n-min", type=int, default=1)
    p.add_argument("--n-max", type=int, default=6)
    p = add("singularity", "singularity curves as CSV")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--resolution", type=float, default=0.02)
    p = add("complexity", "complexity K_n of singularity curves")
    p.add_argument("--n-max", type=int, default=3)
    p.add_argument("--resolution", type=float, default=0.02)
    for name in ("orbits", "graze-scan", "equidistribution"):
        p = add(name, {"orbits": "periodic orbit census",
                       "graze-scan": "search for grazing periodic orbits",
                       "equidistribution": "weak-* distances between periodic measures"}[name])
        p.add_argument("--potential", default="zero")
        p.add_argument("--max-itineraries", type=int, default=2_000_000)
        if name == "orbits":
            p.add_argument("--n", type=int, default=4)
        if name == "graze-scan":
            p.add_argument("--n-max", type=int, default=6)
            p.add_argument("--threshold", type=float, default=1e-3)
        if name == "equidistribution":
            p.add_argument("--n-values", type=int, nargs="+", default=[4, 6])
            p.add_argument("--m", type=int, default=32)
    p = add("tail-bound", "tail entropy bound")
    p.add_argument("--s0", type=float)
    p.add_argument("--K", type=float)
    p.add_argument("--tau-min", type=float)
    p.add_argument("--tau-max", type=float)
    p = add("usc-bound", "upper semicontinuity defect bound")
    p.add_argument("--P-mu", dest="P_mu", type=float)
    p.add_argument("--mass", type=float)
    p.add_argument("--P-top", dest="P_top", type=float)
    p.add_argument("--P-muS", dest="P_muS", type=float, default=0.0)
    return ap


def _config_args(ap, path):
    """Translate a JSON config into an argument list for the named command."""
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    run = cfg.get("run")
    if not isinstance(run, dict) or "command" not in run:
        raise ConfigError("config needs a 'run' block with a 'command'")
    command = run["command"]
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    argv = [command]
    table = {k: v for k, v in cfg.items() if k != "run"}
    if "table" in table:
        table = table["table"]
    if isinstance(table, str):
        argv += ["--table", table]
    elif table:
        argv += ["--table", json.dumps(table)]
    for key, val in run.items():
        if key == "command":
            continue
        flag = "--" + key.replace("_", "-")
        if isinstance(val, list):
            argv += [flag] + [str(v) for v in val]
        else:
            argv += [flag, str(val)]
    return argv


def emit(args, res: Result) -> str:
    head = header(args.command, args.table, args.seed, _params(args))
    fmt = args.format or ("csv" if (res.raw_csv or res.columns) else
                          "text" if res.lines else "json")
    if fmt == "json":
        return dump_json({**head, "result": res.record})
    if fmt == "csv":
        if res.raw_csv is not None:
            lines = "".join(f"# {k}: {head.get(k)}\n"
                            for k in ("tool", "version", "command", "seed", "table_sha256"))
            return lines + res.raw_csv
        if res.columns:
            return dump_csv(head, res.columns, res.rows)
        return dump_csv(head, ["key", "value"], list(_flat(res.record)))
    lines = res.lines if res.lines is not None else [f"{k}: {v}" for k, v in _flat(res.record)]
    return dump_text(head, lines)


def _params(args):
    skip = {"command", "table", "out", "format", "workers", "seed"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def main(argv=None) -> int:
    ap = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        if argv[:1] == ["run"] and len(argv) == 2 and not argv[1].startswith("-"):
            argv = _config_args(ap, argv[1])
        try:
            args = ap.parse_args(argv)
        except SystemExit as exc:
            return EXIT_OK if exc.code == 0 else EXIT_CONFIG
        text = emit(args, COMMANDS[args.command](args))
    except CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BilliardError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if args.out:
        try:
            with open(args.out, "w") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"error: cannot write {args.out}: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
