"""Command-line front end: ``run``, ``certify``, ``refine`` and ``snapshot-diff``.

Outputs go to the scenario's ``outputs.dir`` (default ``esbgk_out``) unless
the ``ESBGK_OUTPUT_DIR`` environment variable is set.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from .phase_grid import DistSnapshot, build_grid
from .scenario import ScenarioError, load_scenario, mixture_state
from .snapshot import SnapshotError, read_snapshot, snapshot_diff, write_snapshot
from .solver import SolverError, decay_summary, run_homogeneous, run_transport
from .sweeps import DEFAULT_RANGES, REGIMES, certify_sweep, refinement_study

__all__ = ["CSV_COLUMNS", "csv_columns", "output_dir", "cmd_run", "cmd_certify",
           "cmd_refine", "cmd_snapshot_diff", "main"]

log = logging.getLogger("esbgk")

OUTPUT_ENV = "ESBGK_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "esbgk_out"
CSV_COLUMNS = ("t", "rho", "U", "T_tr", "T_int", "T_delta", "H_f", "D", "A",
               "rel_H_target", "theorem_gap", "l1_to_target", "kullback_bound",
               "mass_drift", "mom_drift", "energy_drift")
SNAPSHOT_MODES = ("none", "final", "stamps")


def csv_columns(d: int) -> list[str]:
    """Trajectory CSV header with the velocity components expanded."""
    cols = []
    for c in CSV_COLUMNS:
        cols.extend([f"U_{i + 1}" for i in range(d)] if c == "U" else [c])
    return cols


def output_dir(outputs: dict) -> Path:
    return Path(os.environ.get(OUTPUT_ENV) or outputs.get("dir", DEFAULT_OUTPUT_DIR))


def _fmt(x) -> str:
    return repr(float(x))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def _run_homogeneous(sc, grid, f0, out: Path) -> int:
    d = sc.params.d
    mode = sc.outputs.get("snapshots", "final")
    snap_dir = out / "snapshots"
    if mode != "none":
        snap_dir.mkdir(parents=True, exist_ok=True)

    csv_path = out / "trajectory.csv"
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(csv_columns(d))

        def on_stamp(t, f, traj):
            s, r, dr = traj.states[-1], traj.reports[-1], traj.drifts[-1]
            row = [t, s.rho, *s.U, s.T_tr, s.T_int, s.T_delta, r.H_f, r.D, r.A,
                   r.rel_H_target, r.theorem_gap, r.l1_to_target, r.kullback_bound,
                   dr["mass_drift"], dr["mom_drift"], dr["energy_drift"]]
            writer.writerow([_fmt(x) for x in row])
            if mode == "stamps":
                write_snapshot(snap_dir / f"stamp_{len(traj.times) - 1:05d}.snap",
                               DistSnapshot(f, grid, sc.params))
            if not r.passed:
                failed = [k for k, ok in r.certificates.items() if not ok]
                log.warning("t=%.6g: certificates failed: %s", t, ", ".join(failed))

        traj = run_homogeneous(f0, sc.solver, grid, on_stamp=on_stamp)

    if mode in ("final", "stamps") and traj.final is not None:
        write_snapshot(snap_dir / "final.snap", DistSnapshot(traj.final, grid, sc.params))
    final = traj.reports[-1].to_dict() if traj.reports else None
    report = {
        "scenario": sc.source,
        "passed": traj.passed,
        "failure": traj.failure,
        "n_stamps": len(traj.times),
        "t_final": traj.times[-1] if traj.times else None,
        "grid": dict(grid.spec.__dict__),
        "params": dict(sc.params.__dict__),
        "final_report": final,
        "max_drifts": {k: max(dr[k] for dr in traj.drifts) for k in traj.drifts[0]} if traj.drifts else {},
        "failed_stamps": [t for t, r in zip(traj.times, traj.reports) if not r.passed],
        "decay": decay_summary(traj, sc.params),
    }
    _write_json(out / "report.json", report)
    print(f"{'PASS' if traj.passed else 'FAIL'}: {len(traj.times)} stamps, outputs in {out}")
    return 0 if traj.passed else 1


def _run_transport(sc, grid, F0, out: Path) -> int:
    tr = sc.solver.transport
    res = run_transport(F0, sc.solver, grid)
    m0 = res.total_mass[0]
    with (out / "transport.csv").open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "total_mass", "mass_drift", "H_min", "H_max", "H_total"])
        for t, m, H in zip(res.times, res.total_mass, res.cell_H):
            writer.writerow([_fmt(x) for x in (t, m, abs(m - m0) / m0, H.min(), H.max(), tr.dx * H.sum())])
    finite = all(np.all(np.isfinite(H)) for H in res.cell_H)
    mass_drift = max(abs(m - m0) / m0 for m in res.total_mass)
    passed = res.failure is None and finite
    if sc.outputs.get("snapshots", "final") != "none" and res.final is not None:
        (out / "snapshots").mkdir(parents=True, exist_ok=True)
        write_snapshot(out / "snapshots" / "final.snap",
                       DistSnapshot(res.final, grid, sc.params, dx=tr.dx))
    _write_json(out / "report.json", {
        "scenario": sc.source, "passed": passed, "failure": res.failure,
        "n_stamps": len(res.times), "max_mass_drift": mass_drift, "cell_H_finite": finite,
        "grid": dict(grid.spec.__dict__), "params": dict(sc.params.__dict__),
    })
    print(f"{'PASS' if passed else 'FAIL'}: transport run, outputs in {out}")
    return 0 if passed else 1


def cmd_run(args) -> int:
    sc = load_scenario(args.scenario)
    out = output_dir(sc.outputs)
    out.mkdir(parents=True, exist_ok=True)
    grid, f0 = sc.build()
    if sc.solver.transport is None:
        return _run_homogeneous(sc, grid, f0, out)
    return _run_transport(sc, grid, f0, out)


def cmd_certify(args) -> int:
    ranges = dict(DEFAULT_RANGES)
    if args.nu is not None:
        ranges["nu"] = tuple(args.nu)
    if args.theta is not None:
        ranges["theta"] = tuple(args.theta)
    if args.delta is not None:
        ranges["delta"] = tuple(args.delta)
    ranges["d"] = args.d
    summary = certify_sweep(args.samples, args.seed, args.regime, ranges)
    print(json.dumps(_jsonable(summary.to_dict()), indent=2, sort_keys=True))
    return 0 if summary.passed else 1


def cmd_refine(args) -> int:
    sc = load_scenario(args.scenario)
    state = mixture_state(sc.components(), sc.params.delta)
    study = refinement_study(state, sc.params, sc.grid_spec(), factor=args.factor)
    result = study.to_dict()
    out = output_dir(sc.outputs)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "refine.json", result)
    print(json.dumps(_jsonable(result), indent=2, sort_keys=True))
    return 0


def cmd_snapshot_diff(args) -> int:
    a, b = read_snapshot(args.a), read_snapshot(args.b)
    result = snapshot_diff(a, b)
    print(json.dumps(_jsonable(result), indent=2, sort_keys=True))
    return 0 if result["bitwise_equal"] else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="esbgk", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario file")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("certify", help="closed-form certificate sweep over random states")
    p.add_argument("--regime", choices=REGIMES, required=True)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--d", type=int, choices=(1, 2, 3), default=3)
    p.add_argument("--nu", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--theta", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--delta", type=float, nargs=2, metavar=("LO", "HI"))
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("refine", help="grid-refinement study of the Gaussian H quadrature")
    p.add_argument("scenario")
    p.add_argument("--factor", type=int, default=2)
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("snapshot-diff", help="compare two snapshot files")
    p.add_argument("a")
    p.add_argument("b")
    p.set_defaults(func=cmd_snapshot_diff)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ScenarioError, SnapshotError, SolverError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
