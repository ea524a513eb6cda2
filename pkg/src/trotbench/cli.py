"""Command-line front end.

Subcommands:

* ``run``      - one scaffolded optimization; writes history.csv, the best
  iteration's trace, p3_probe.csv, metrics.txt and figures into --out.
* ``replay``   - re-run a stored parameter vector at a fixed rope height.
* ``analyze``  - print metrics for a trace CSV.
* ``bo-bench`` - synthetic-objective benchmark of the optimizer against
  random search.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import analysis, config as config_mod, plots
from .bo import (
    Bounds,
    OptimizationHistory,
    ObjectiveError,
    ParamVector,
    run_bo_loop,
    random_search,
)
from .experiment import (
    ExperimentResult,
    compute_fitness,
    final_phase_best,
    run_experiment,
)
from .sim import SupportConfig, run_trial

USAGE_ERROR = 1
RUNTIME_ERROR = 2


class _Parser(argparse.ArgumentParser):
    """argparse defaults to exit code 2 on usage errors; we reserve 2 for runtime."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)


def _build_parser() -> _Parser:
    parser = _Parser(prog="trotbench", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_run = sub.add_parser("run", help="run one scaffolded optimization")
    p_run.add_argument("--condition", choices=["min", "red", "none"], required=True)
    # None means "not given": a config file value wins over the built-in default
    p_run.add_argument("--iters", type=int, default=None)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--config", help="flat key=value config file")
    p_run.add_argument("--save-traces", choices=["none", "best", "all"], default="best")
    p_run.add_argument("--no-plots", action="store_true")

    p_rep = sub.add_parser("replay", help="re-run a stored parameter vector")
    p_rep.add_argument("--params", required=True, help="key=value file with x0..x4")
    p_rep.add_argument("--height", type=float, default=None,
                       help="rope height in meters; omit to disable the rope")
    p_rep.add_argument("--duration", type=float, default=15.0)
    p_rep.add_argument("--seed", type=int, default=0)
    p_rep.add_argument("--out", required=True)
    p_rep.add_argument("--config", help="flat key=value config file")
    p_rep.add_argument("--no-plots", action="store_true")

    p_an = sub.add_parser("analyze", help="print metrics for a trace CSV")
    p_an.add_argument("--trace", required=True)
    p_an.add_argument("--mass", type=float, default=2.1)
    p_an.add_argument("--gravity", type=float, default=9.81)
    p_an.add_argument("--duration", type=float, default=15.0,
                      help="nominal trial length used to flag truncated traces")

    p_bb = sub.add_parser("bo-bench", help="synthetic benchmark vs random search")
    p_bb.add_argument("--objective", choices=["quad1d", "sphere5d"], required=True)
    p_bb.add_argument("--iters", type=int, default=30)
    p_bb.add_argument("--seeds", type=int, default=10)
    p_bb.add_argument("--out", help="optional output directory for CSV + figure")
    return parser


def _load_params_file(path: Path) -> ParamVector:
    values: dict[str, float] = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or key not in ("x0", "x1", "x2", "x3", "x4"):
            raise ValueError(f"{path}:{lineno}: expected 'x<i> = value'")
        values[key] = float(value)
    missing = {"x0", "x1", "x2", "x3", "x4"} - set(values)
    if missing:
        raise ValueError(f"{path}: missing keys {sorted(missing)}")
    return ParamVector(values["x0"], values["x1"], values["x2"], values["x3"], values["x4"])


def _write_metrics(path: Path, lines: Sequence[str]) -> None:
    path.write_text("\n".join(lines) + "\n")


def _cmd_run(args: argparse.Namespace) -> int:
    overrides = config_mod.load_config(args.config) if args.config else {}
    overrides["condition"] = args.condition
    if args.iters is not None:
        overrides["iters"] = args.iters
    if args.seed is not None:
        overrides["seed"] = args.seed
    cfg = config_mod.build_experiment_config(overrides)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    try:
        result = run_experiment(cfg)
    except ObjectiveError as exc:
        analysis.export_history(exc.history, out / "history.csv")
        for i, trace in enumerate(getattr(exc, "partial_traces", []), start=1):
            if args.save_traces == "all":
                analysis.export_trace(trace, out / f"trace_iter_{i}.csv")
        print(f"run failed at iteration {exc.iteration}: {exc}", file=sys.stderr)
        return RUNTIME_ERROR

    _write_run_outputs(result, out, args.save_traces, not args.no_plots)
    best = result.history.best_record()
    print(f"condition={cfg.schedule.condition} seed={cfg.seed} iters={cfg.n_iter}")
    print(f"best fitness {best.fitness:.4f} at iteration {best.iteration}")
    if result.probe is not None:
        print(f"probe at {result.probe.height} m: fitness {result.probe.fitness:.4f}")
    print(f"outputs in {out}")
    return 0


def _write_run_outputs(
    result: ExperimentResult, out: Path, save_traces: str, render: bool
) -> None:
    cfg = result.config
    analysis.export_history(result.history, out / "history.csv")

    best_iter, best_trace = result.best_trace()
    if save_traces == "all":
        for i, trace in enumerate(result.traces, start=1):
            analysis.export_trace(trace, out / f"trace_iter_{i}.csv")
    elif save_traces == "best":
        analysis.export_trace(best_trace, out / f"trace_iter_{best_iter}.csv")

    probe_lines = ["x0,x1,x2,x3,x4,height_m,fitness"]
    if result.probe is not None:
        p = result.probe
        arr = p.params.to_array()
        probe_lines.append(
            ",".join([f"{v:.9e}" for v in arr] + [f"{p.height:.9e}", f"{p.fitness:.9e}"])
        )
    (out / "p3_probe.csv").write_text("\n".join(probe_lines) + "\n")

    weight = cfg.model.weight
    best_metrics = analysis.metrics_of_trace(best_trace, weight)
    lines = [
        f"condition = {cfg.schedule.condition}",
        f"seed = {cfg.seed}",
        f"iterations = {cfg.n_iter}",
        f"best_iteration = {best_iter}",
        f"best_fitness = {result.history.best_record().fitness:.6f}",
        f"final_phase_best_fitness = {final_phase_best(result.history):.6f}",
    ]
    if result.probe is not None:
        lines += [
            f"probe_height_m = {result.probe.height}",
            f"probe_source_iteration = {result.probe.source_iteration}",
            f"probe_fitness = {result.probe.fitness:.6f}",
        ]
    lines.append("[best_trace]")
    lines += best_metrics.lines()
    _write_metrics(out / "metrics.txt", lines)

    if render:
        plots.plot_fitness_history(result.history, out / "fitness_history.png")
        plots.plot_trace(
            best_trace, out / f"trace_iter_{best_iter}.png",
            title=f"best iteration {best_iter}",
        )
        if result.probe is not None:
            plots.plot_trace(
                result.probe.trace, out / "trace_probe.png",
                title=f"probe at {result.probe.height} m",
            )


def _cmd_replay(args: argparse.Namespace) -> int:
    params = _load_params_file(Path(args.params))
    overrides = config_mod.load_config(args.config) if args.config else {}
    cfg = config_mod.build_experiment_config(overrides)
    if args.height is None:
        sup = SupportConfig.disabled()
    else:
        sup = SupportConfig(
            height=args.height,
            stiffness=cfg.rope_stiffness,
            damping=cfg.rope_damping,
            enabled=True,
        )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    trace = run_trial(
        params,
        sup,
        duration=args.duration,
        dt=cfg.dt,
        seed=args.seed,
        model=cfg.model,
        contact=cfg.contact,
        controller_cfg=cfg.controller,
        control_dt=cfg.control_dt,
        servo_tau=cfg.servo_tau,
        imu_noise=cfg.imu_noise,
    )
    analysis.export_trace(trace, out / "trace.csv")
    fitness = compute_fitness(trace, cfg.model)
    metrics = analysis.metrics_of_trace(trace, cfg.model.weight)
    height_txt = "disabled" if args.height is None else f"{args.height}"
    _write_metrics(
        out / "metrics.txt",
        [
            f"height_m = {height_txt}",
            f"duration_s = {args.duration}",
            f"seed = {args.seed}",
            f"fitness = {fitness:.6f}",
        ]
        + metrics.lines(),
    )
    if not args.no_plots:
        plots.plot_trace(trace, out / "trace.png", title=f"replay (height {height_txt})")
    print(f"fitness {fitness:.4f}, termination {trace.termination}, outputs in {out}")
    return 0


def _cmd_analyze(args: argparse.Namespace) -> int:
    table = analysis.read_trace(Path(args.trace))
    if table.t.size == 0:
        print("trace is empty", file=sys.stderr)
        return RUNTIME_ERROR
    covered = table.t[-1] + (table.dt if table.t.size > 1 else 0.0)
    termination = "completed" if covered >= args.duration - 1e-9 else "truncated"
    metrics = analysis.trace_metrics(
        table.t, table.z, table.rope_tension,
        weight=args.mass * args.gravity,
        termination=termination,
    )
    for line in metrics.lines():
        print(line)
    return 0


def _quad1d(p: ParamVector, _i: int) -> float:
    return -((p.x0 - 90.0) ** 2)


def _sphere5d(p: ParamVector, _i: int) -> float:
    unit = Bounds().normalize(p.to_array())
    return -float(np.sum((unit - 0.5) ** 2))


def _cmd_bo_bench(args: argparse.Namespace) -> int:
    objective = _quad1d if args.objective == "quad1d" else _sphere5d
    bo_hist: list[OptimizationHistory] = []
    rs_hist: list[OptimizationHistory] = []
    for seed in range(args.seeds):
        bo_hist.append(run_bo_loop(objective, n_iter=args.iters, seed=seed))
        rs_hist.append(random_search(objective, n_iter=args.iters, seed=seed))

    def best_values(hists: list[OptimizationHistory]) -> np.ndarray:
        return np.array([h.best_so_far()[-1] for h in hists])

    bo_best = best_values(bo_hist)
    rs_best = best_values(rs_hist)
    print(f"objective={args.objective} iters={args.iters} seeds={args.seeds}")
    print(
        "surrogate search: best value "
        f"median {np.median(bo_best):.6g} mean {np.mean(bo_best):.6g} "
        f"min {np.min(bo_best):.6g} max {np.max(bo_best):.6g}"
    )
    print(
        "random search:    best value "
        f"median {np.median(rs_best):.6g} mean {np.mean(rs_best):.6g} "
        f"min {np.min(rs_best):.6g} max {np.max(rs_best):.6g}"
    )
    if args.objective == "quad1d":
        bo_err = np.array(
            [abs(h.best_record().params.x0 - 90.0) for h in bo_hist]
        )
        rs_err = np.array(
            [abs(h.best_record().params.x0 - 90.0) for h in rs_hist]
        )
        print(
            f"|x0 - 90| mm: surrogate median {np.median(bo_err):.3f}, "
            f"random median {np.median(rs_err):.3f}"
        )
        print(
            f"seeds within 5 mm: surrogate {int(np.sum(bo_err <= 5.0))}/{args.seeds}, "
            f"random {int(np.sum(rs_err <= 5.0))}/{args.seeds}"
        )

    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with (out / "bo_bench.csv").open("w", newline="\n") as fh:
            fh.write("method,seed,iter,value,best_so_far\n")
            for method, hists in (("bo", bo_hist), ("random", rs_hist)):
                for seed, h in enumerate(hists):
                    running = h.best_so_far()
                    for rec, best in zip(h.records, running):
                        fh.write(
                            f"{method},{seed},{rec.iteration},"
                            f"{rec.fitness:.9e},{best:.9e}\n"
                        )
        plots.plot_benchmark_curves(
            [h.best_so_far() for h in bo_hist],
            [h.best_so_far() for h in rs_hist],
            out / "bo_bench.png",
        )
        print(f"outputs in {out}")
    return 0


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handlers = {
        "run": _cmd_run,
        "replay": _cmd_replay,
        "analyze": _cmd_analyze,
        "bo-bench": _cmd_bo_bench,
    }
    try:
        return handlers[args.command](args)
    except Exception as exc:  # noqa: BLE001 - exit-code contract over tracebacks
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
