"""Command-line entry points.

Subcommands: ``fit`` (trajectory log to spline dataset), ``run`` (single
episode), ``sweep`` (seeded experiment grid), ``stats`` (t-tests on a summary
table), ``print-config`` (dump the default experiment config). Exit codes:
0 on success, 2 for configuration or input-format errors, 3 for runtime
failures.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .errors import (
    ConfigError,
    DatasetFormatError,
    EpisodeDivergedError,
    LogParseError,
    SingularFitError,
)
from .experiments import (
    build_plan,
    config_to_dict,
    default_config,
    load_config,
    run_sweep,
    write_sweep_outputs,
)
from .fileio import (
    read_summary_table,
    read_trajectory_log,
    write_episode_trace,
    write_spline_dataset,
    write_test_table,
)
from .reference import ReferenceMode
from .sim import EpisodeConfig, run_episode
from .spline import fit_chunked, fit_least_squares
from .stats import SampleSummary, pooled_t_test, welch_t_test

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="admitlab",
        description="Compliant-control trajectory representation lab",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="convert a trajectory log into a spline dataset")
    p_fit.add_argument("log", help="input trajectory log (t,x0,... CSV)")
    p_fit.add_argument("--out", required=True, help="output spline dataset (JSON)")
    p_fit.add_argument("--n-ctrl", type=int, default=None,
                       help="control points for a single global fit")
    p_fit.add_argument("--chunk-duration", type=float, default=None,
                       help="fit one chunk per window of this many seconds")
    p_fit.add_argument("--samples-per-ctrl", type=int, default=4,
                       help="control-point density for chunked fits")
    p_fit.add_argument("--fit-mode", choices=["global-cut", "windowed"], default="global-cut",
                       help="chunked fitting strategy")

    p_run = sub.add_parser("run", help="run a single simulated episode")
    p_run.add_argument("--config", default=None, help="experiment config (JSON)")
    p_run.add_argument("--mode", choices=[m.value for m in ReferenceMode], default=None)
    p_run.add_argument("--f-action", type=int, default=None)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--out", required=True, help="output trace CSV path")

    p_sweep = sub.add_parser("sweep", help="run the full seeded experiment sweep")
    p_sweep.add_argument("--config", default=None, help="experiment config (JSON)")
    p_sweep.add_argument("--out", default=None, help="output directory")
    p_sweep.add_argument("--workers", type=int, default=None)
    p_sweep.add_argument("--seed", type=int, default=None, help="override seed base")
    p_sweep.add_argument("--no-traces", action="store_true",
                         help="skip per-episode trace files")

    p_stats = sub.add_parser("stats", help="t-tests on a group summary table")
    p_stats.add_argument("summaries", help="summary CSV (group,label,mean,var,n,alternative)")
    p_stats.add_argument("--out", default=None, help="output table path (default: stdout)")
    p_stats.add_argument("--baseline", default="baseline",
                         help="label of the baseline row in each group")
    p_stats.add_argument("--welch", action="store_true",
                         help="use Welch's test instead of the pooled test")

    sub.add_parser("print-config", help="print the default experiment config")
    return parser


def cmd_fit(args) -> int:
    log = read_trajectory_log(args.log)
    if args.chunk_duration is not None:
        chunks = []
        try:
            chunks = fit_chunked(
                log.times,
                log.positions,
                chunk_duration=args.chunk_duration,
                samples_per_ctrl=args.samples_per_ctrl,
                mode=args.fit_mode,
            )
        except SingularFitError as exc:
            raise SingularFitError(f"chunked fit failed: {exc}") from exc
    else:
        if args.n_ctrl is None:
            raise ConfigError("provide --n-ctrl for a global fit or --chunk-duration")
        chunks = [fit_least_squares(log.times, log.positions, args.n_ctrl)]
    write_spline_dataset(chunks, args.out)
    for idx, (traj, rms) in enumerate(chunks):
        print(f"chunk {idx}: n_ctrl={traj.n_ctrl} residual_rms={rms:.6e}")
    print(f"wrote {len(chunks)} chunk(s) to {args.out}")
    return EXIT_OK


def cmd_run(args) -> int:
    config = load_config(args.config) if args.config else default_config()
    cell = config.cells[0]
    if args.mode is not None:
        mode = ReferenceMode(args.mode)
        matching = [c for c in config.cells if c.mode is mode]
        cell = matching[0] if matching else dataclasses.replace(cell, mode=mode)
    if args.f_action is not None:
        cell = dataclasses.replace(cell, f_action=args.f_action)
    seed = args.seed if args.seed is not None else config.seed_base
    plan = build_plan(config.scenario, config.plan, config.plan.profiles[cell.plan_profile], seed)
    episode_cfg = EpisodeConfig(
        mode=cell.mode,
        f_action=cell.f_action,
        gains=config.gains,
        f_ctrl=config.f_ctrl,
        duration_max=config.duration_max,
        seed=seed,
        chunk_horizon=config.chunk_horizon,
        blend_overlap=config.blend_overlap,
    )
    trace = run_episode(plan, episode_cfg, config.scenario)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    summary_path = write_episode_trace(trace, out)
    outcome = (
        f"success at {trace.success_time:.3f} s" if trace.succeeded else "no success"
    )
    print(f"episode (mode={cell.mode.value}, f_action={cell.f_action} Hz, seed={seed}): {outcome}")
    print(f"trace: {out}\nsummary: {summary_path}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = load_config(args.config) if args.config else default_config()
    if args.workers is not None:
        config.workers = args.workers
    if args.seed is not None:
        config.seed_base = args.seed
    out_dir = Path(args.out) if args.out else Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.json").write_text(
        json.dumps(config_to_dict(config), indent=2, sort_keys=True) + "\n"
    )
    results = run_sweep(config, out_dir=out_dir, write_traces=not args.no_traces)
    write_sweep_outputs(config, results, out_dir)
    for name, res in results.items():
        if res.aborted:
            print(f"cell {name}: ABORTED ({res.failure_message})")
        else:
            n_success = len(res.success_times())
            print(f"cell {name}: {n_success}/{len(res.results)} successes")
    print(f"tables written to {out_dir}")
    if any(res.aborted for res in results.values()):
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_stats(args) -> int:
    rows = read_summary_table(args.summaries)
    test = welch_t_test if args.welch else pooled_t_test
    groups: dict[str, list] = {}
    for row in rows:
        groups.setdefault(row.group, []).append(row)
    out_rows = []
    for group, members in groups.items():
        baselines = [m for m in members if m.label == args.baseline]
        if not baselines:
            raise ConfigError(
                f"group {group!r} has no baseline row labeled {args.baseline!r}"
            )
        base = baselines[0]
        base_summary = SampleSummary(mean=base.mean, variance=base.var, n=base.n)
        out_rows.append(
            {"group": group, "method": base.label, "mean": base.mean, "var": base.var,
             "n": base.n, "t": None, "p": None, "significant": None}
        )
        for member in members:
            if member.label == args.baseline:
                continue
            summary = SampleSummary(mean=member.mean, variance=member.var, n=member.n)
            result = test(summary, base_summary, alternative=member.alternative)
            out_rows.append(
                {"group": group, "method": member.label, "mean": member.mean,
                 "var": member.var, "n": member.n, "t": result.t_stat,
                 "p": result.p_one_tailed, "significant": result.p_one_tailed < 0.05}
            )
    if args.out:
        write_test_table(out_rows, args.out)
        print(f"wrote {len(out_rows)} rows to {args.out}")
    else:
        for row in out_rows:
            if row["t"] is None:
                print(f"{row['group']},{row['method']}: baseline "
                      f"(mean={row['mean']:.4g}, var={row['var']:.4g}, n={row['n']})")
            else:
                sig = "yes" if row["significant"] else "no"
                print(f"{row['group']},{row['method']}: t={row['t']:.4f} "
                      f"p={row['p']:.4g} significant={sig}")
    return EXIT_OK


def cmd_print_config(_args) -> int:
    print(json.dumps(config_to_dict(default_config()), indent=2, sort_keys=True))
    return EXIT_OK


_HANDLERS = {
    "fit": cmd_fit,
    "run": cmd_run,
    "sweep": cmd_sweep,
    "stats": cmd_stats,
    "print-config": cmd_print_config,
}

_CONFIG_ERRORS = (ConfigError, DatasetFormatError, LogParseError, ValueError)
_RUNTIME_ERRORS = (SingularFitError, EpisodeDivergedError, OSError)


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except _RUNTIME_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except _CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
