"""Command-line entry point.

``hopflax run`` solves one scenario and writes ``trajectories.csv``,
``summary.json``, ``timing.json`` and, with ``--svg``, one SVG per snapshot
time. ``hopflax compare`` solves two scenarios that differ only in their
weights and writes ``compare.json``.

Exit status: 0 success, 2 bad arguments, 3 invalid scenario, 4 solver did
not converge (outputs are still written), 5 outputs could not be written.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from hopflax import scenario as scenario_mod
from hopflax import snapshots
from hopflax import solver as solver_mod
from hopflax.scenario import Scenario, ScenarioError

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INVALID = 3
EXIT_NOT_CONVERGED = 4
EXIT_WRITE = 5

# widest state among the supported models; keeps the CSV header fixed
STATE_COLUMNS = 3

# roundoff margin when classifying a control component as sitting on a kink
KINK_TOL = 1e-6

log = logging.getLogger("hopflax")


class UsageError(Exception):
    pass


class OutputError(Exception):
    pass


def _parse_times(text: str) -> list[float]:
    try:
        times = [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None
    if not times or any(not np.isfinite(t) or t < 0 for t in times):
        raise argparse.ArgumentTypeError("snapshot times must be finite and non-negative")
    return times


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hopflax", description="Multi-agent trajectory optimization via a saddle-point value solver.")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", type=Path, default=Path("results"), help="output directory (created if missing)")
    common.add_argument("--seed", type=_seed, help="override the scenario's random seed")
    common.add_argument("--max-iter", type=_positive_int, help="override the iteration cap")
    common.add_argument("--quiet", action="store_true", help="only print errors")

    run = sub.add_parser("run", parents=[common], help="solve one scenario")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario", type=Path, help="scenario document (YAML)")
    src.add_argument("--builtin", choices=sorted(scenario_mod.BUILTINS))
    run.add_argument("--snapshots", type=_parse_times, help="comma-separated physical times for SVG frames")
    run.add_argument("--svg", action="store_true", help="write SVG snapshots (default: five evenly spaced frames)")

    cmp_ = sub.add_parser("compare", parents=[common], help="solve two scenarios that differ only in weights")
    cmp_.add_argument("--scenario", type=Path, action="append", default=[], help="scenario document; repeatable")
    cmp_.add_argument("--builtin", action="append", default=[], choices=sorted(scenario_mod.BUILTINS), help="repeatable")
    return parser


def _load(path: Path | None, name: str | None) -> Scenario:
    if name is not None:
        return scenario_mod.builtin(name)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read scenario {path}: {exc.strerror or exc}") from None
    return scenario_mod.load_scenario(text)


def _with_overrides(sc: Scenario, args) -> Scenario:
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.max_iter is not None:
        changes["max_iter"] = args.max_iter
    if not changes:
        return sc
    return dataclasses.replace(sc, solver=dataclasses.replace(sc.solver, **changes))


def summarize(sc: Scenario, result: solver_mod.SolveResult) -> dict:
    """Diagnostics reported for one solve; every entry is deterministic."""
    chi_int, rho_int = solver_mod.penalty_integrals(sc, result)
    arrival = solver_mod.arrival_time(sc, result)
    final = [x[-1] for x in result.physical_trajectories]
    dists = solver_mod.goal_distances(sc, result)
    residuals = solver_mod.rollout_residuals(sc, result)
    relaxed = solver_mod.rollout_residuals(sc, result, kink_tol=KINK_TOL)
    summary = {
        "scenario": sc.name,
        "value": result.value,
        "iterations": result.iterations,
        "converged": result.converged,
        "final_change": float(result.residual_history[-1]),
        "horizon": result.horizon,
        "steps": result.J,
        "delta": result.delta,
        "weights": {"w1": sc.weights.w1, "w2": sc.weights.w2},
        "goal_cost": sc.weights.w1 * chi_int,
        "formation_cost": sc.weights.w2 * rho_int,
        "goal_penalty_integral": chi_int,
        "formation_penalty_integral": rho_int,
        "arrival_time": arrival,
        "min_obstacle_clearance": solver_mod.min_obstacle_clearance(sc, result),
        "rollout_residual": max(float(np.max(r)) for r in residuals),
        "rollout_residual_kink_relaxed": max(float(np.max(r)) for r in relaxed),
        "agents": [
            {
                "label": a.label,
                "model": a.model.name,
                "final_state": [float(v) for v in x],
                "goal_distance_at_horizon": float(d[-1]),
                # the endpoint sample carries no cost, so also report its neighbour
                "goal_distance_before_horizon": float(d[-2]),
                "rollout_residual": float(np.max(r)),
            }
            for a, x, d, r in zip(sc.agents, final, dists, residuals)
        ],
    }
    return summary


def trajectory_rows(sc: Scenario, result: solver_mod.SolveResult):
    """Header and rows of the trajectory table in physical time order.

    Columns are fixed; components an agent does not have are left empty.
    Floats use ``repr`` so they round-trip exactly.
    """
    width = STATE_COLUMNS
    header = ["time", "agent"] + [f"x{k + 1}" for k in range(width)] + [f"p{k + 1}" for k in range(width)]
    rows = []
    times = result.physical_times
    xs, ps = result.physical_trajectories, result.physical_costates
    for j, s in enumerate(times):
        for a, x, p in zip(sc.agents, xs, ps):
            pad = [""] * (width - x.shape[1])
            rows.append([repr(float(s)), a.label]
                        + [repr(float(v)) for v in x[j]] + pad
                        + [repr(float(v)) for v in p[j]] + pad)
    return header, rows


def _write(path: Path, text: str):
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from None


def _prepare_dir(out: Path):
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create output directory {out}: {exc.strerror or exc}") from None


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _snapshot_name(k: int, s: float) -> str:
    return f"snapshot_{k:02d}_t{s:.3f}.svg"


def write_run(out: Path, sc: Scenario, result, elapsed: float, snapshot_times=None):
    _prepare_dir(out)
    header, rows = trajectory_rows(sc, result)
    try:
        with open(out / "trajectories.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise OutputError(f"cannot write {out / 'trajectories.csv'}: {exc.strerror or exc}") from None
    _write(out / "summary.json", _dump_json(summarize(sc, result)))
    # wall-clock time is kept apart so the other outputs stay byte-identical
    _write(out / "timing.json", _dump_json({"wall_clock_seconds": elapsed, "iterations": result.iterations}))

    written = []
    if snapshot_times:
        times = result.physical_times
        trajs = result.physical_trajectories
        goals = np.array([a.goal[:2] for a in sc.agents])
        labels = [a.label for a in sc.agents]
        box = snapshots.view_box(sc.env, trajs, goals, times)
        for k, s in enumerate(snapshot_times):
            name = _snapshot_name(k, s)
            _write(out / name, snapshots.render(sc.env, labels, goals, times, trajs, s, box))
            written.append(name)
    return written


def _timed_solve(sc: Scenario):
    t0 = time.perf_counter()
    result = solver_mod.solve(sc)
    return result, time.perf_counter() - t0


def _workers() -> int:
    raw = os.environ.get("HOPFLAX_THREADS", "1")
    try:
        value = int(raw)
    except ValueError:
        raise UsageError(f"HOPFLAX_THREADS must be a positive integer, got {raw!r}") from None
    if value < 1:
        raise UsageError("HOPFLAX_THREADS must be at least 1")
    return value


def cmd_run(args) -> int:
    if args.snapshots and not args.svg:
        raise UsageError("--snapshots needs --svg")
    _workers()
    sc = _with_overrides(_load(args.scenario, args.builtin), args)
    log.info("solving %s (%d agents, J=%d)", sc.name, len(sc.agents), sc.solver.J)
    result, elapsed = _timed_solve(sc)
    times = None
    if args.svg:
        times = args.snapshots or [float(v) for v in np.linspace(0.0, sc.horizon, 5)]
    written = write_run(args.out, sc, result, elapsed, times)
    log.info("value %.6g after %d iterations (%s), %.1f s", result.value, result.iterations,
             "converged" if result.converged else "NOT converged", elapsed)
    for name in written:
        log.info("wrote %s", args.out / name)
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def _same_but_weights(a: Scenario, b: Scenario) -> bool:
    return dataclasses.replace(a, weights=b.weights, name=b.name) == b


def cmd_compare(args) -> int:
    refs = [(p, None) for p in args.scenario] + [(None, n) for n in args.builtin]
    if len(refs) != 2:
        raise UsageError("compare needs exactly two scenarios (any mix of --scenario and --builtin)")
    workers = _workers()
    runs = [_with_overrides(_load(p, n), args) for p, n in refs]
    if not _same_but_weights(*runs):
        raise ScenarioError("weights", "compared scenarios must be identical apart from their weights")

    if workers >= 2:
        with ProcessPoolExecutor(max_workers=2) as pool:
            solved = list(pool.map(_timed_solve, runs))
    else:
        solved = [_timed_solve(sc) for sc in runs]

    report = {"runs": []}
    for tag, sc, (result, _) in zip("ab", runs, solved):
        s = summarize(sc, result)
        report["runs"].append({
            "run": tag,
            "scenario": sc.name,
            "weights": s["weights"],
            "value": s["value"],
            "goal_cost": s["goal_cost"],
            "formation_cost": s["formation_cost"],
            "goal_penalty_integral": s["goal_penalty_integral"],
            "formation_penalty_integral": s["formation_penalty_integral"],
            "arrival_time": s["arrival_time"],
            "converged": s["converged"],
            "iterations": s["iterations"],
        })
    _prepare_dir(args.out)
    _write(args.out / "compare.json", _dump_json(report))
    _write(args.out / "timing.json", _dump_json({"wall_clock_seconds": [e for _, e in solved]}))

    if not args.quiet:
        cols = ("run", "scenario", "value", "goal_cost", "formation_cost", "formation_penalty_integral", "arrival_time")
        table = [list(cols)] + [
            [f"{r[c]:.6g}" if isinstance(r[c], float) else str(r[c]) for c in cols] for r in report["runs"]
        ]
        widths = [max(len(row[k]) for row in table) for k in range(len(cols))]
        for row in table:
            print("  ".join(cell.rjust(w) for cell, w in zip(row, widths)))
    ok = all(r.converged for r, _ in solved)
    return EXIT_OK if ok else EXIT_NOT_CONVERGED


def _configure_logging(quiet: bool):
    for h in list(log.handlers):
        log.removeHandler(h)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
    log.addHandler(handler)
    log.setLevel(logging.WARNING if quiet else logging.INFO)
    log.propagate = False


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    _configure_logging(args.quiet)
    handler = cmd_run if args.command == "run" else cmd_compare
    try:
        return handler(args)
    except UsageError as exc:
        print(f"hopflax: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ScenarioError as exc:
        print(f"hopflax: invalid scenario: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OutputError as exc:
        print(f"hopflax: {exc}", file=sys.stderr)
        return EXIT_WRITE
