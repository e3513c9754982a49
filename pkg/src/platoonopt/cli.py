"""Command-line front end for the platoon smoothing toolkit.

Subcommands bind scenario configs to the library operations:

  simulate          forward-run a scenario, dump trajectories + metrics
  optimize          run the penalty-loop solver, dump controls + audit
  grad-check        compare the adjoint gradient against finite differences
  sweep-penetration re-optimize with 0..N AVs, emit the comparison table
  gen-leader        write the scenario's leader profile as a t,v CSV
  report            tabulate saved runs against a baseline run

Every subcommand is deterministic for a given config + overrides; artifacts
are byte-identical across re-runs. Exit codes: 0 success, 2 configuration
or usage error, 3 runtime failure (collision, failed convergence).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .adjoint import adjoint_gradient, finite_difference_gradient
from .dynamics import CollisionError
from .objective import Metrics
from .optimizer import OptimizationResult, audit_feasibility
from .scenario import (
    ConfigError,
    ScenarioConfig,
    build_leader,
    build_problem,
    initial_schedule,
    load_config,
    relative_difference,
    report,
    simulate_scenario,
    solve_scenario,
    sweep_penetration,
    write_leader_csv,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _load(args: argparse.Namespace) -> ScenarioConfig:
    source: dict | str = args.config if args.config is not None else {}
    return load_config(source, overrides=args.set)


def _outdir(args: argparse.Namespace) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _metrics_document(cfg: ScenarioConfig, metrics: Metrics, **extra) -> dict:
    doc = {
        "n_vehicles": metrics.n_vehicles,
        "horizon": metrics.horizon,
        "av_indices": list(cfg.platoon.av_indices),
        "mode": cfg.objective.mode,
        "total_sq_acc": metrics.total_sq_acc,
        "per_vehicle_sq_acc": [float(v) for v in metrics.per_vehicle_sq_acc],
        "total_fuel": metrics.total_fuel,
        "per_vehicle_fuel": [float(v) for v in metrics.per_vehicle_fuel],
    }
    doc.update(extra)
    return doc


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_omega_csv(path: Path, result: OptimizationResult) -> None:
    c = result.omega_star
    cols = ",".join(f"av{i}" for i in result.layout.av_indices)
    lines = [f"t_start,t_end,{cols}" if cols else "t_start,t_end"]
    for k in range(c.omega.shape[0]):
        vals = ",".join(repr(float(w)) for w in c.omega[k])
        row = f"{float(c.tau[k])!r},{float(c.tau[k + 1])!r}"
        lines.append(f"{row},{vals}" if vals else row)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _audit_document(result: OptimizationResult, problem) -> dict:
    rep = audit_feasibility(
        result.states, problem.obj, problem.layout, problem.params, problem.leader
    )
    channels = {
        "min_headway": rep.min_headway,
        "max_headway": rep.max_headway,
        "velocity": rep.velocity,
    }
    history = [[float(x) for x in np.ravel(v)] for v in result.violation_history]
    return {
        name: {"margin": ch.margin, "time": ch.time, "vehicle": ch.vehicle}
        for name, ch in channels.items()
    } | {"worst_margin": rep.worst, "violation_history": history}


def _export_run(outdir: Path, cfg: ScenarioConfig, problem, states, c) -> Metrics:
    from .dynamics import acceleration_series
    from .objective import compute_metrics
    from .scenario import export_trajectories_csv

    acc = acceleration_series(states, problem.layout, problem.params, problem.leader, c)
    hw = states.headways(problem.params, problem.leader)
    export_trajectories_csv(states, acc, hw, problem.layout, outdir / "trajectories.csv")
    return compute_metrics(states, problem.layout, problem.params, problem.leader, c, cfg.energy)


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _load(args)
    out = _outdir(args)
    states, c, problem = simulate_scenario(cfg)
    metrics = _export_run(out, cfg, problem, states, c)
    _write_json(out / "metrics.json", _metrics_document(cfg, metrics, run="simulate"))
    (out / "resolved_config.json").write_text(cfg.to_json() + "\n", encoding="utf-8")
    print(
        f"simulate: {metrics.n_vehicles} vehicles over {metrics.horizon:g} s, "
        f"total_sq_acc = {metrics.total_sq_acc:.6g}, total_fuel = {metrics.total_fuel:.6g}"
    )
    print(f"artifacts: {out}/trajectories.csv, metrics.json, resolved_config.json")
    return EXIT_OK


def cmd_optimize(args: argparse.Namespace) -> int:
    cfg = _load(args)
    out = _outdir(args)
    t0 = time.perf_counter()
    result = solve_scenario(cfg)
    elapsed = time.perf_counter() - t0
    problem = build_problem(cfg)
    metrics = _export_run(out, cfg, problem, result.states, result.omega_star)
    _write_omega_csv(out / "omega.csv", result)
    _write_json(
        out / "metrics.json",
        _metrics_document(
            cfg,
            metrics,
            run="optimize",
            objective=result.objective_history[-1],
            converged=result.converged,
            reason=result.reason,
            mu_final=result.mu_final,
        ),
    )
    _write_json(out / "audit.json", _audit_document(result, problem))
    history = "\n".join(
        f"{k},{float(v)!r}" for k, v in enumerate(result.objective_history)
    )
    (out / "history.csv").write_text("iteration,objective\n" + history + "\n", encoding="utf-8")
    (out / "resolved_config.json").write_text(cfg.to_json() + "\n", encoding="utf-8")
    print(
        f"optimize: J = {result.objective_history[-1]:.6g} after "
        f"{len(result.objective_history) - 1} iterations in {elapsed:.1f} s; {result.reason}"
    )
    print(f"artifacts: {out}/omega.csv, trajectories.csv, metrics.json, audit.json, history.csv")
    return EXIT_OK if result.converged else EXIT_RUNTIME


def cmd_grad_check(args: argparse.Namespace) -> int:
    cfg = _load(args)
    problem = build_problem(cfg)
    c = initial_schedule(cfg, problem)
    if c.omega.size == 0:
        print("grad-check: scenario has no AVs, gradient is empty", file=sys.stderr)
        return EXIT_CONFIG
    t0 = time.perf_counter()
    grad, _ = adjoint_gradient(problem, c)
    fd = finite_difference_gradient(problem, c, args.step)
    elapsed = time.perf_counter() - t0
    err = float(np.max(np.abs(grad - fd)) / max(np.max(np.abs(fd)), 1e-300))
    print(f"grad-check: max relative error = {err:.3e} at step {args.step:g} ({elapsed:.1f} s)")
    if args.out is not None:
        out = _outdir(args)
        _write_json(
            out / "grad_check.json",
            {"step": args.step, "max_relative_error": err, "n_controls": int(c.omega.size)},
        )
    return EXIT_OK


def cmd_sweep_penetration(args: argparse.Namespace) -> int:
    cfg = _load(args)
    out = _outdir(args)
    t0 = time.perf_counter()
    rows, results = sweep_penetration(
        cfg, args.max_avs, warm_start=not args.no_warm_start, parallel=args.parallel
    )
    elapsed = time.perf_counter() - t0
    lines = [rows[0].csv_header()] + [r.to_csv_line() for r in rows]
    (out / "sweep.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    (out / "resolved_config.json").write_text(cfg.to_json() + "\n", encoding="utf-8")
    for row, result in zip(rows, results):
        leg = out / f"leg_{row.n_av}av"
        leg.mkdir(exist_ok=True)
        leg_cfg = load_config(
            {**cfg.document, "platoon": {**cfg.document["platoon"], "av_indices": list(row.av_indices)}},
            base_dir=cfg.base_dir,
        )
        _write_omega_csv(leg / "omega.csv", result)
        _write_json(
            leg / "metrics.json",
            _metrics_document(
                leg_cfg,
                result.final_metrics,
                run="sweep-leg",
                objective=result.objective_history[-1],
                converged=result.converged,
                reason=result.reason,
            ),
        )
    for line in lines:
        print(line)
    print(f"sweep: {len(rows)} legs in {elapsed:.1f} s; table in {out}/sweep.csv")
    return EXIT_OK if all(r.converged for r in rows) else EXIT_RUNTIME


def cmd_gen_leader(args: argparse.Namespace) -> int:
    cfg = _load(args)
    out = _outdir(args)
    leader = build_leader(cfg)
    path = out / "leader.csv"
    write_leader_csv(leader, path)
    print(
        f"gen-leader: {leader.grid.size} samples over {float(leader.grid[-1]):g} s, "
        f"v in [{float(leader.v.min()):.3f}, {float(leader.v.max()):.3f}] m/s -> {path}"
    )
    return EXIT_OK


def _read_metrics(rundir: Path) -> dict:
    path = rundir / "metrics.json"
    if not path.is_file():
        raise ConfigError(f"{rundir} has no metrics.json (not a run directory?)")
    doc = json.loads(path.read_text(encoding="utf-8"))
    for key in ("total_sq_acc", "total_fuel", "av_indices", "mode"):
        if key not in doc:
            raise ConfigError(f"{path} is missing key {key!r}")
    return doc


def cmd_report(args: argparse.Namespace) -> int:
    base_doc = _read_metrics(Path(args.baseline))
    baseline = _as_metrics(base_doc)
    entries = []
    docs = []
    for d in args.runs:
        doc = _read_metrics(Path(d))
        docs.append(doc)
        entries.append((Path(d).name, _as_metrics(doc)))
    table = report(entries, baseline)
    text = table.to_text()

    pairs = {}
    for doc in docs:
        key = tuple(doc["av_indices"])
        pairs.setdefault(key, {})[doc["mode"]] = doc["total_sq_acc"]
    delta_lines = []
    for key in sorted(pairs):
        modes = pairs[key]
        if "greedy" in modes and "full" in modes:
            delta = relative_difference(modes["greedy"], modes["full"])
            shown = "undefined" if delta is None else f"{delta:.2f}%"
            idx = ",".join(str(i) for i in key)
            delta_lines.append(f"greedy vs full (av = [{idx}]): {shown}")
    if delta_lines:
        text += "\n" + "\n".join(delta_lines) + "\n"

    print(text, end="")
    if args.out is not None:
        out = _outdir(args)
        (out / "report.csv").write_text(table.to_csv(), encoding="utf-8")
        (out / "report.txt").write_text(text, encoding="utf-8")
        print(f"artifacts: {out}/report.csv, report.txt")
    return EXIT_OK


def _as_metrics(doc: dict) -> Metrics:
    return Metrics(
        n_vehicles=int(doc["n_vehicles"]),
        horizon=float(doc["horizon"]),
        per_vehicle_sq_acc=np.asarray(doc["per_vehicle_sq_acc"], dtype=float),
        total_sq_acc=float(doc["total_sq_acc"]),
        per_vehicle_fuel=np.asarray(doc["per_vehicle_fuel"], dtype=float),
        total_fuel=float(doc["total_fuel"]),
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="platoonopt",
        description="Simulate and optimize mixed-autonomy platoons behind a prescribed leader.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="scenario JSON (defaults apply if omitted)")
    common.add_argument(
        "--set",
        metavar="KEY=VALUE",
        action="append",
        default=[],
        help="override a config key by dotted path (repeatable), e.g. --set leader.amplitude=6",
    )
    common.add_argument(
        "--seed",
        type=int,
        metavar="N",
        help="reserved; the current pipeline is deterministic and ignores it",
    )

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="forward simulation only")
    p.add_argument("--out", metavar="DIR", required=True, help="artifact directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("optimize", parents=[common], help="run the penalty-loop solver")
    p.add_argument("--out", metavar="DIR", required=True)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("grad-check", parents=[common], help="adjoint vs finite differences")
    p.add_argument("--step", type=float, default=1e-4, help="central difference step (default 1e-4)")
    p.add_argument("--out", metavar="DIR", help="optional: also write grad_check.json here")
    p.set_defaults(func=cmd_grad_check)

    p = sub.add_parser(
        "sweep-penetration", parents=[common], help="re-optimize with 0..N AVs, tabulate"
    )
    p.add_argument("--out", metavar="DIR", required=True)
    p.add_argument("--max-avs", type=int, required=True, help="largest AV count to solve")
    p.add_argument(
        "--no-warm-start",
        action="store_true",
        help="solve every leg cold from the config's initial schedule",
    )
    p.add_argument(
        "--parallel",
        type=int,
        metavar="N",
        help="worker processes for cold legs (requires --no-warm-start)",
    )
    p.set_defaults(func=cmd_sweep_penetration)

    p = sub.add_parser("gen-leader", parents=[common], help="write the leader profile as t,v CSV")
    p.add_argument("--out", metavar="DIR", required=True)
    p.set_defaults(func=cmd_gen_leader)

    p = sub.add_parser("report", help="tabulate saved runs against a baseline run")
    p.add_argument("runs", nargs="+", metavar="RUN_DIR", help="directories with metrics.json")
    p.add_argument("--baseline", metavar="RUN_DIR", required=True, help="all-human reference run")
    p.add_argument("--out", metavar="DIR", help="optional: write report.csv/report.txt here")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except CollisionError as e:
        print(f"runtime failure: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
