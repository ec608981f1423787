"""Command-line entry point.

Exit codes: 0 all checks pass, 1 a bound or check failed, 2 configuration
error, 3 numerical abort (lost unitarity, overflow, non-convergence).
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__, harness as H, io
from .config import KINDS, ExperimentConfig, load, validate
from .errors import ConfigError, ConvergenceError, NumericalBreakdown
from .geometry import tiling_constant
from .potentials import admissibility_report
from .propagator import EvolutionConfig, evolve
from .spectral import l2_norm

log = logging.getLogger("lightcone")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_ABORT = 0, 1, 2, 3
STATUS_CODE = {"pass": EXIT_OK, "fail": EXIT_FAIL, "error": EXIT_CONFIG, "abort": EXIT_ABORT}


@dataclass
class Outcome:
    id: str
    kind: str
    status: str
    report: dict | None = None
    csv: tuple | None = None
    snapshots: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    message: str = ""


# -- per-kind runners ------------------------------------------------------------

def _experiment(e: ExperimentConfig) -> H.BoundExperiment:
    times = e.time("times") or [e.time("T", 0.0)]
    return H.BoundExperiment(
        grid=e.grid, X=e.X, Y=e.Y if e.Y is not None else e.X, times=times,
        potential=e.potential, m=e.m, c=e.c, dt=e.time("dt", 1e-3),
        state=H.StateSpec.from_json(e.raw.get("state")),
        mode="operator" if e.raw.get("mode") == "operator" else "state",
        tolerance=e.raw.get("tolerance", H.BOUND_TOL), seed=e.seed)


def _bound_csv(rep: H.BoundReport):
    keys = list(rep.rows[0]) if rep.rows else list(rep.csv_columns)
    head = [k for k in rep.csv_columns if k in keys] + sorted(k for k in keys if k not in rep.csv_columns)
    return head, [[r[k] for k in head] for r in rep.rows]


def run_verify_bound(e):
    exp = _experiment(e)
    if e.raw.get("mode") == "conjugated":
        rows, warnings = [], []
        for t in exp.times:
            cr = H.conjugated_norm_check(exp, T=t)
            rows.append(cr.to_json())
            warnings += cr.warnings
        head = ["T", "ratio", "bound", "passed", "factor_X", "factor_Y", "half_dist_bound",
                "measured_leakage", "chain_bound"]
        rep = {"kind": "verify-bound-conjugated", "rows": rows, "passed": all(r["passed"] for r in rows)}
        return rep, (head, [[r[k] for k in head] for r in rows]), rep["passed"], warnings
    if not (exp.X.is_convex and exp.Y.is_convex):
        rep = H.nonconvex_bound_check(exp, r=e.block("nonconvex").get("r", 0.5))
    else:
        rep = H.state_norm_bound_check(exp)
    return rep.to_json(), _bound_csv(rep), rep.passed, rep.warnings


def run_sharpness(e):
    s = e.block("sharpness")
    rep = H.sharpness_run(e.grid, s["delta"], s["eps"], s["times"], tuple(s.get("speeds", (0.5,))),
                          s.get("seed_width", 0.1), s.get("margin_extra", 5.0))
    ok = rep.cone_ok and all(0 <= v <= 1 + 1e-12 for v in rep.measured)
    return rep.to_json(), (rep.csv_header(), rep.csv_rows()), ok, []


def run_check_potential(e):
    a = e.block("admissibility")
    rep = admissibility_report(e.potential, e.grid, e.time("T"), n_times=a.get("n_times", 11),
                               decomposition=a.get("decomposition", "form"))
    warnings = [] if rep.status == "pass" else [f"admissibility {rep.status}"]
    head = ["t", "klmn"]
    return rep.to_json(), (head, list(zip(rep.times, rep.klmn_per_time))), rep.status != "fail", warnings


def run_symbol_audit(e):
    rep = H.g0_and_symbol_audit(e.grid, e.block("audit").get("n_samples", 100), seed=e.seed)
    return rep, None, rep["passed"], []


def run_tiling_constant(e):
    t = e.block("tiling")
    K = tiling_constant(t["dist"], t["r"], t["d"])
    print(f"{K:.12g}")
    return {"dist": t["dist"], "r": t["r"], "d": t["d"], "tiling_constant": K}, None, True, []


def run_cone_profile(e):
    exp = _experiment(e)
    rows = H.light_cone_profile(exp, e.block("profile")["width"])
    head = list(H.PROFILE_COLUMNS)
    ok = all(r["passed"] for r in rows)
    return {"rows": rows, "passed": ok, "grid": e.grid.describe()}, (head, [[r[k] for k in head] for r in rows]), ok, []


def run_simulate(e):
    psi0, warnings = H.initial_state(e.grid, e.X, H.StateSpec.from_json(e.raw.get("state")))
    cfg = EvolutionConfig(dt=e.time("dt"), T=e.time("T"), m=e.m, c=e.c,
                          snapshot_every=e.block("simulate").get("snapshot_every"),
                          snapshot_times=tuple(e.time("times") or ()))
    traj = evolve(psi0, cfg, e.potential)
    warnings += traj.warnings
    snaps = [(f"snap_{i:05d}", wf, t) for i, (t, wf) in enumerate(zip(traj.times, traj.states))]
    rep = {"grid": e.grid.describe(), "potential": e.potential.to_json(), "T": cfg.T,
           "steps": cfg.n_steps, "dt": cfg.step, "max_drift": traj.max_drift,
           "snapshot_times": traj.times, "snapshot_norms": [l2_norm(w) for w in traj.states],
           "warnings": warnings}
    step_rows = [[k, k * cfg.step, float(nk)] for k, nk in enumerate(traj.norms)]
    return rep, (["step", "t", "norm"], step_rows), True, warnings, snaps


RUNNERS = {"simulate": run_simulate, "verify-bound": run_verify_bound, "sharpness": run_sharpness,
           "check-potential": run_check_potential, "symbol-audit": run_symbol_audit,
           "tiling-constant": run_tiling_constant, "cone-profile": run_cone_profile}


def run_one(e: ExperimentConfig) -> Outcome:
    """Run a single experiment; failures become an outcome status, never escape."""
    t0 = time.perf_counter()
    try:
        out = RUNNERS[e.kind](e)
    except (NumericalBreakdown, ConvergenceError) as exc:
        log.error("%s: numerical abort: %s", e.id, exc)
        return Outcome(e.id, e.kind, "abort", message=str(exc))
    except (ValueError, KeyError) as exc:
        log.error("%s: %s", e.id, exc)
        return Outcome(e.id, e.kind, "error", message=str(exc))
    report, csv, ok, warnings = out[:4]
    snaps = out[4] if len(out) > 4 else []
    if isinstance(report, dict):
        report = {**report, "timing": {"runtime_s": time.perf_counter() - t0}}
    return Outcome(e.id, e.kind, "pass" if ok else "fail", report, csv, snaps, list(warnings))


def run(experiments: list[ExperimentConfig], out_dir, jobs: int = 1, config_doc=None) -> tuple[int, dict]:
    """Run all experiments, write reports and the manifest; return (exit code, manifest)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    io.cleanup_stale(out_dir)
    started = io.now()
    if jobs > 1 and len(experiments) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(run_one, experiments))
    else:
        outcomes = [run_one(e) for e in experiments]

    # single writer: all files are written here, in experiment order
    entries = []
    for o in outcomes:
        files = []
        if o.report is not None:
            files.append(io.write_json(out_dir / f"{o.id}.json", o.report).name)
        if o.csv is not None:
            files.append(io.write_csv(out_dir / f"{o.id}.csv", *o.csv).name)
        for name, wf, t in o.snapshots:
            files += [str(p.relative_to(out_dir))
                      for p in io.write_snapshot(out_dir / f"{o.id}_snapshots", name, wf, t)]
        entries.append({"id": o.id, "kind": o.kind, "status": o.status, "warnings": o.warnings,
                        "message": o.message, "outputs": files})
    code = max((STATUS_CODE[o.status] for o in outcomes), default=EXIT_OK)
    manifest = {"config_hash": io.config_hash(config_doc) if config_doc is not None else None,
                "artifact_version": __version__, "started": started, "finished": io.now(),
                "experiments": entries, "exit_code": code}
    io.write_json(out_dir / "manifest.json", manifest)
    return code, manifest


# -- argument parsing --------------------------------------------------------------

HELP = {
    "simulate": "evolve a state and write snapshots",
    "verify-bound": "measure leakage into Y against the cone bound",
    "sharpness": "sub-luminal speed counterexample sweep",
    "check-potential": "admissibility report for a potential",
    "symbol-audit": "lattice audit of the complexified symbol",
    "tiling-constant": "lattice constant for non-convex sets",
    "cone-profile": "mass in distance shells over time",
}


def _parser():
    p = argparse.ArgumentParser(prog="lightcone", description="Light-cone bound simulator and checks.",
                                epilog="exit codes: 0 pass, 1 bound violated, 2 config error, "
                                       "3 numerical abort")
    sub = p.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        s = sub.add_parser(kind, help=HELP[kind])
        s.add_argument("--config", type=Path, required=kind != "tiling-constant",
                       help="JSON experiment file")
        s.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        s.add_argument("--jobs", type=int, default=1, help="parallel experiments")
        s.add_argument("--seed", type=int, default=None, help="override every experiment seed")
        if kind == "tiling-constant":
            s.add_argument("--dist", type=float, help="set distance")
            s.add_argument("--r", type=float, help="cube side")
            s.add_argument("--d", type=int, help="dimension")
    return p


def _setup_logging():
    level = os.environ.get("LIGHTCONE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv=None) -> int:
    _setup_logging()
    args = _parser().parse_args(argv)
    try:
        if args.config is not None:
            doc = load(args.config)
            if args.seed is not None:
                _set_seed(doc, args.seed)
            experiments = validate(doc, default_kind=args.kind)
        else:
            if None in (args.dist, args.r, args.d):
                raise ConfigError([("", "tiling-constant needs --config or all of --dist, --r, --d")])
            doc = {"schema_version": 1, "kind": "tiling-constant",
                   "tiling": {"dist": args.dist, "r": args.r, "d": args.d}}
            experiments = validate(doc, default_kind=args.kind)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    if args.jobs < 1:
        print("--jobs must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    code, manifest = run(experiments, args.out, args.jobs, doc)
    for ent in manifest["experiments"]:
        line = f"{ent['id']}: {ent['status']}"
        if ent["message"]:
            line += f" ({ent['message']})"
        print(line, file=sys.stderr)
    return code


def _set_seed(doc, seed):
    if "experiments" in doc:
        for e in doc["experiments"]:
            e["seed"] = seed
    else:
        doc["seed"] = seed


if __name__ == "__main__":
    sys.exit(main())
