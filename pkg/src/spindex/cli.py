"""Command-line front end.

    spindex index --rotation 1.2
    spindex sphere --scenario rotation-golden --out out/
    spindex resonance 1.236 2.764
    spindex glue --scenario island-pair --out out/
    spindex run --scenario scenario.json --out out/
    spindex validate scenario.json

Exit codes: 0 when every enabled verdict passes, 1 when a verdict fails,
2 for scenario/schema errors.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

from threadpoolctl import threadpool_limits

from . import __version__, _io
from .index_core import SymplecticPath2, index_report, rotation_path
from .scenarios import BUILTIN, Scenario, ScenarioError, load, validate
from .resonance import ResonanceConfig, ResonanceError, check_generator_bound, find_resonances, verify_two_point_theorem
from .orbit_census import find_fixed_points

EXIT_OK, EXIT_FAIL, EXIT_SCHEMA = 0, 1, 2


def _threads(arg: int | None) -> int:
    if arg:
        return int(arg)
    env = os.environ.get("SPINDEX_THREADS")
    return int(env) if env else (os.cpu_count() or 1)


def _header(scn: Scenario, threads: int) -> dict:
    return {"schema_version": _io.SCHEMA_VERSION, "version": __version__, "scenario": scn.config,
            "threads": threads}


def run_census(scn: Scenario):
    cfg = scn.config
    return find_fixed_points(scn.hamiltonian(), int(cfg["k"]), tuple(cfg["census"]["grid"]),
                             float(cfg["census"]["newton_tol"]))


def run_resonance(census, scn: Scenario) -> dict:
    rcfg = scn.config["resonance"]
    if not rcfg.get("enabled", True):
        return {"skipped": "disabled"}
    if census.continuum_flag:
        return {"skipped": "continuum of fixed points"}
    cfg = ResonanceConfig(rcfg["N"], rcfg["n"], rcfg["a_max"], rcfg["tol"])
    out: dict = {}
    rs = find_resonances([o.delta for o in census.orbits], cfg)
    out["resonances"] = rs.to_dict()
    if rs.rank_estimate == 1:
        out["generator_bound"] = check_generator_bound(rs, cfg).to_dict()
    try:
        out["two_point"] = verify_two_point_theorem(census, cfg).to_dict()
    except ResonanceError as exc:
        out["two_point"] = {"passed": False, "message": str(exc)}
    return out


def run_glue(scn: Scenario, out_dir: Path | None) -> dict:
    from .blowup_glue import (blow_up, dichotomy_verdict, flux, glue, index_gap_report, index_precondition,
                              torus_census)

    cfg = scn.config
    gcfg = cfg["glue"]
    H = scn.hamiltonian()
    cyl = blow_up(H, int(cfg["k"]), grid=tuple(gcfg["grid"]))
    iso = glue(cyl, float(gcfg["tau"]))
    fv = flux(iso)
    tc = torus_census(iso, tuple(cfg["census"]["grid"]), float(cfg["census"]["newton_tol"]))
    gaps = {k: index_gap_report(tc, k=k) for k in gcfg["gap_iterates"]}
    plus, minus = tc.copy("+"), tc.copy("-")
    matched = len(plus) == len(minus) and all(
        abs(a.trace - b.trace) <= 1e-6 and abs(a.delta - b.delta) <= 1e-6 for a, b in zip(plus, minus))
    verdict = dichotomy_verdict(fv, tc)
    if out_dir is not None:
        cyl.write_grid_csv(out_dir / "cylinder_grid.csv")
        tc_rows = [(p.label, p.copy, p.s, p.theta, p.trace, p.classification, p.delta) for p in tc.points]
        _io.write_csv(out_dir / "torus_census.csv", ["label", "copy", "s", "theta", "trace", "class", "delta"], tc_rows)
        gap_rows = [(r.k, r.a, r.b, r.delta_a, r.delta_b, r.gap, int(r.equal), int(r.flagged))
                    for k in sorted(gaps) for r in gaps[k]]
        _io.write_csv(out_dir / "index_gaps.csv", ["k", "a", "b", "delta_a", "delta_b", "gap", "equal", "flagged"],
                      gap_rows)
        if cfg.get("plots", True) and any(gaps.values()):
            from .plots import gap_growth
            gap_growth(gaps, out_dir / "index_growth.svg")
    k_max = max(gaps) if gaps else None
    return {
        "cylinder": cyl.to_dict(),
        "total_area": iso.total_area,
        "flux": fv.to_dict(),
        "torus_census": tc.to_dict(),
        "copies_matched": matched,
        "dichotomy": verdict.to_dict(),
        "index_gaps": {str(k): [r.to_dict() for r in rows] for k, rows in gaps.items()},
        "index_above_one": {str(k): index_precondition(tc, k) for k in gaps},
        "gaps_resolved": all(r.equal or r.flagged for r in gaps[k_max]) if k_max else True,
        "passed": matched and verdict.verdict != "inconsistent" and tc.collar_fixed_points == 0,
    }


def run_scenario(scn: Scenario, out_dir: str | Path | None = None, threads: int = 1) -> tuple[dict, int]:
    """Full pipeline; returns the report and the exit code."""
    out = Path(out_dir) if out_dir is not None else None
    H = scn.hamiltonian()
    report = _header(scn, threads)
    census = run_census(scn)
    report["census"] = census.to_dict()
    ok = True
    if not census.continuum_flag:
        ok &= census.lefschetz == 2
    report["resonance"] = run_resonance(census, scn)
    for key in ("two_point", "generator_bound"):
        if key in report["resonance"]:
            ok &= bool(report["resonance"][key]["passed"])
    if scn.config["glue"].get("enabled") and not census.continuum_flag:
        report["glue"] = run_glue(scn, out)
        ok &= report["glue"]["passed"]
    report["passed"] = bool(ok)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        census.write_csv(out / "census.csv")
        if scn.config.get("plots", True):
            from .plots import phase_portrait
            phase_portrait(H, out / "phase.svg", census, seed=int(scn.config["seed"]))
        _io.write_json(out / "report.json", report)
    return report, EXIT_OK if ok else EXIT_FAIL


# -- subcommands ---------------------------------------------------------------

def _load_or_exit(args) -> Scenario | None:
    try:
        return load(args.scenario, seed=args.seed)
    except ScenarioError as exc:
        for d in exc.diagnostics:
            print(f"error: {d}", file=sys.stderr)
        return None
    except FileNotFoundError:
        print(f"error: no such scenario file or builtin: {args.scenario}", file=sys.stderr)
        return None


def cmd_index(args) -> int:
    if args.path_file:
        path = SymplecticPath2.from_json(Path(args.path_file).read_text())
    else:
        path = rotation_path(float(args.rotation) * math.pi)
    print(_io.dumps(index_report(path)))
    return EXIT_OK


def cmd_sphere(args) -> int:
    scn = _load_or_exit(args)
    if scn is None:
        return EXIT_SCHEMA
    census = run_census(scn)
    if args.out:
        out = Path(args.out)
        _io.write_json(out / "census.json", {"schema_version": _io.SCHEMA_VERSION, "scenario": scn.config,
                                             "census": census})
        census.write_csv(out / "census.csv")
    print(_io.dumps(census))
    return EXIT_OK if census.continuum_flag or census.lefschetz == 2 else EXIT_FAIL


def cmd_resonance(args) -> int:
    cfg = ResonanceConfig(args.N, args.n, args.a_max, args.tol)
    try:
        rs = find_resonances(args.deltas, cfg)
    except ResonanceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    out = {"schema_version": _io.SCHEMA_VERSION, "resonances": rs.to_dict()}
    if rs.rank_estimate == 1:
        out["generator_bound"] = check_generator_bound(rs, cfg)
    print(_io.dumps(out))
    return EXIT_OK


def cmd_glue(args) -> int:
    scn = _load_or_exit(args)
    if scn is None:
        return EXIT_SCHEMA
    out = Path(args.out) if args.out else None
    res = run_glue(scn, out)
    body = {"schema_version": _io.SCHEMA_VERSION, "scenario": scn.config, **res}
    if out is not None:
        _io.write_json(out / "glue.json", body)
    print(_io.dumps({k: body[k] for k in ("total_area", "flux", "dichotomy", "copies_matched", "passed")}))
    return EXIT_OK if res["passed"] else EXIT_FAIL


def cmd_run(args) -> int:
    scn = _load_or_exit(args)
    if scn is None:
        return EXIT_SCHEMA
    threads = _threads(args.threads)
    with threadpool_limits(limits=threads):
        report, code = run_scenario(scn, args.out, threads)
    summary = {"name": scn.name, "passed": report["passed"], "continuum_flag": report["census"]["continuum_flag"],
               "n_orbits": len(report["census"]["orbits"]), "out": str(args.out) if args.out else None}
    print(_io.dumps(summary))
    return code


def cmd_validate(args) -> int:
    text = Path(args.file).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        print(f"line {exc.lineno}: invalid JSON ({exc.msg})")
        return EXIT_SCHEMA
    diags = validate(data, text)
    for d in diags:
        print(d)
    return EXIT_SCHEMA if diags else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="spindex", description="Mean and Conley-Zehnder indices of sphere maps.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def scenario_flags(p):
        p.add_argument("--scenario", required=True,
                       help=f"scenario JSON file or builtin name ({', '.join(BUILTIN)})")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--threads", type=int, default=None, help="thread count (default: $SPINDEX_THREADS or cores)")
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")

    p = sub.add_parser("index", help="index report of a symplectic path")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--path-file", help="JSON path file")
    g.add_argument("--rotation", type=float, help="rotation path by pi * VALUE")
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("sphere", help="fixed-point census of a scenario")
    scenario_flags(p)
    p.set_defaults(func=cmd_sphere)

    p = sub.add_parser("resonance", help="resonance relations among mean indices")
    p.add_argument("deltas", type=float, nargs="+")
    p.add_argument("--N", type=int, default=2)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--a-max", type=int, default=6)
    p.add_argument("--tol", type=float, default=1e-6)
    p.set_defaults(func=cmd_resonance)

    p = sub.add_parser("glue", help="blow-up, torus gluing, flux and index gaps")
    scenario_flags(p)
    p.set_defaults(func=cmd_glue)

    p = sub.add_parser("run", help="full pipeline with JSON/CSV/SVG outputs")
    scenario_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("validate", help="schema and range checks without running")
    p.add_argument("file")
    p.set_defaults(func=cmd_validate)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return int(args.func(args))


if __name__ == "__main__":
    sys.exit(main())
