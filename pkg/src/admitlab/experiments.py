"""Seeded experiment sweeps over (reference mode, action rate) cells.

A sweep runs N seeded episodes per cell on matched task instances (the seed
fixes the task geometry and perturbations; the cell fixes mode, action rate
and the plan speed profile), then aggregates completion-time summaries,
pairwise t-tests against a baseline cell, and cumulative-success curves.
Re-running a sweep with the same config produces byte-identical tables.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .control import Gains
from .errors import ConfigError
from .fileio import (
    SummaryRow,
    write_episode_trace,
    write_success_curve,
    write_summary_table,
    write_test_table,
)
from .reference import ReferenceMode
from .sim import (
    ConstantForce,
    EpisodeConfig,
    FreeSpace,
    MinimumJerkSegment,
    PegInHole,
    Plan,
    Scenario,
    SmoothBump,
    minimum_jerk_duration,
    run_episode,
)
from .stats import SampleSummary, cumulative_success_curve, pooled_t_test, rms_tracking_error
from .validation import check_vector


@dataclass(frozen=True)
class SpeedProfile:
    """Plan timing tied to the controller the demonstrations assume.

    Velocity-aware data collection yields faster, more dynamic plans than
    position-only collection: quicker transfers and insertion pokes with
    short dwells, since the demonstrator never had to wait out tracking lag.
    """

    transfer_speed: float
    descend_speed: float
    hover_dwell: float
    bottom_dwell: float


@dataclass(frozen=True)
class PlanParams:
    """Task-instance geometry for plan construction.

    Insertion plans consist of a transfer to the hole followed by repeated
    descend/dwell/retract attempts (the open-loop stand-in for a policy that
    retries until the part drops through). The seed draws per-attempt
    lateral imprecision and depth jitter, shared across cells.
    """

    start_offset: tuple[float, float] = (-0.25, 0.12)
    goal_offset: tuple[float, float] | None = None
    approach_height: float = 0.03
    descend_overshoot: float = 0.008
    lateral_std: float = 0.0015
    depth_jitter_std: float = 0.004
    perturbation: float = 0.0015
    attempts: int = 18
    profiles: dict = field(
        default_factory=lambda: {
            "baseline": SpeedProfile(
                transfer_speed=0.5, descend_speed=0.15, hover_dwell=0.3, bottom_dwell=0.35
            ),
            "velocity": SpeedProfile(
                transfer_speed=0.75, descend_speed=0.3, hover_dwell=0.05, bottom_dwell=0.15
            ),
        }
    )


@dataclass(frozen=True)
class CellConfig:
    """One sweep cell: a reference mode at an action rate with a plan profile."""

    name: str
    mode: ReferenceMode
    f_action: int
    plan_profile: str = "baseline"
    alternative: str = "less"


@dataclass
class ExperimentConfig:
    scenario: Scenario
    gains: Gains
    cells: list[CellConfig]
    episodes: int = 50
    seed_base: int = 1000
    f_ctrl: int = 500
    duration_max: float = 20.0
    chunk_horizon: float = 1.0
    blend_overlap: float = 0.1
    baseline_cell: str = "baseline"
    workers: int = 1
    out_dir: str = "sweep-out"
    plan: PlanParams = field(default_factory=PlanParams)

    def __post_init__(self):
        if self.episodes < 1:
            raise ConfigError("episodes must be at least 1")
        names = [c.name for c in self.cells]
        if len(set(names)) != len(names):
            raise ConfigError("cell names must be unique")
        if self.baseline_cell not in names:
            raise ConfigError(
                f"baseline cell {self.baseline_cell!r} is not among {names}"
            )
        for cell in self.cells:
            if cell.plan_profile not in self.plan.profiles:
                raise ConfigError(
                    f"cell {cell.name!r} references unknown plan profile {cell.plan_profile!r}"
                )


def build_plan(scenario: Scenario, params: PlanParams, profile: SpeedProfile, seed: int) -> Plan:
    """Construct the seeded task instance for one episode.

    The seed fixes the per-attempt lateral imprecision, depth jitter and
    waypoint perturbations of the instance; the speed profile fixes timing
    only, so cells with different profiles face the same geometry.
    """
    rng = np.random.default_rng(seed)
    if isinstance(scenario, PegInHole):
        offsets = rng.normal(0.0, params.lateral_std, size=params.attempts)
        jitters = rng.normal(0.0, params.depth_jitter_std, size=params.attempts)
        bump_fracs = (
            rng.uniform(0.25, 0.75, size=3),
            rng.uniform(0.05, 0.12, size=3),
            params.perturbation * rng.standard_normal((3, 2)),
        )
        cx, cy = scenario.hole_center
        start = scenario.hole_center + np.asarray(params.start_offset)
        hover0 = np.array([cx + offsets[0], cy + params.approach_height])
        t_transfer = minimum_jerk_duration(
            float(np.linalg.norm(hover0 - start)), profile.transfer_speed
        )
        segments = [
            MinimumJerkSegment(start=start, goal=hover0, t0=0.0, duration=t_transfer)
        ]
        t = t_transfer + profile.hover_dwell
        for k in range(params.attempts):
            hover = np.array([cx + offsets[k], cy + params.approach_height])
            bottom = np.array(
                [
                    cx + offsets[k],
                    cy - (scenario.insertion_depth + params.descend_overshoot + jitters[k]),
                ]
            )
            t_down = minimum_jerk_duration(
                float(np.linalg.norm(bottom - hover)), profile.descend_speed
            )
            segments.append(
                MinimumJerkSegment(start=hover, goal=bottom, t0=t, duration=t_down)
            )
            t += t_down + profile.bottom_dwell
            next_lat = offsets[k + 1] if k + 1 < params.attempts else offsets[k]
            up = np.array([cx + next_lat, cy + params.approach_height])
            t_up = minimum_jerk_duration(
                float(np.linalg.norm(up - bottom)), profile.descend_speed
            )
            segments.append(
                MinimumJerkSegment(start=bottom, goal=up, t0=t, duration=t_up)
            )
            t += t_up + profile.hover_dwell
        bumps = _transfer_bumps(bump_fracs, t_transfer)
        return Plan(segments=tuple(segments), bumps=bumps)

    start = check_vector(params.start_offset, name="start_offset")
    if params.goal_offset is None:
        raise ConfigError("free-space sweeps need a goal_offset in the plan parameters")
    goal = check_vector(params.goal_offset, dims=start.size, name="goal_offset")
    duration = minimum_jerk_duration(
        float(np.linalg.norm(goal - start)), profile.transfer_speed
    )
    bump_fracs = (
        rng.uniform(0.25, 0.75, size=3),
        rng.uniform(0.05, 0.12, size=3),
        params.perturbation * rng.standard_normal((3, start.size)),
    )
    segments = (MinimumJerkSegment(start=start, goal=goal, t0=0.0, duration=duration),)
    return Plan(segments=segments, bumps=_transfer_bumps(bump_fracs, duration))


def _transfer_bumps(bump_fracs, duration: float):
    centers, widths, amps = bump_fracs
    if duration <= 0.0 or not np.any(amps):
        return ()
    return tuple(
        SmoothBump(amplitude=a, center=float(c * duration), width=float(w * duration))
        for a, c, w in zip(amps, centers, widths)
    )


@dataclass
class EpisodeResult:
    cell: str
    seed: int
    success_time: float | None
    rms_error: float
    peak_force: float


@dataclass
class CellResult:
    cell: CellConfig
    results: list[EpisodeResult]
    aborted: bool = False
    failure_message: str | None = None

    def success_times(self) -> list[float]:
        return [r.success_time for r in self.results if r.success_time is not None]

    def summary(self) -> SampleSummary | None:
        times = self.success_times()
        if len(times) < 2:
            return None
        arr = np.asarray(times)
        return SampleSummary(mean=float(arr.mean()), variance=float(arr.var(ddof=1)), n=len(times))


def _episode_job(args):
    config, cell, seed, out_dir = args
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
        stop_on_success=True,
    )
    trace = run_episode(plan, episode_cfg, config.scenario)
    if out_dir is not None:
        cell_dir = Path(out_dir) / "cells" / cell.name
        cell_dir.mkdir(parents=True, exist_ok=True)
        write_episode_trace(trace, cell_dir / f"episode_{seed}.csv")
    return EpisodeResult(
        cell=cell.name,
        seed=seed,
        success_time=trace.success_time,
        rms_error=rms_tracking_error(trace),
        peak_force=trace.peak_force(),
    )


def run_sweep(
    config: ExperimentConfig, out_dir=None, write_traces: bool = True
) -> dict[str, CellResult]:
    """Run every cell; an episode failure aborts its cell, never the sweep."""
    trace_dir = str(out_dir) if (out_dir is not None and write_traces) else None
    cell_results: dict[str, CellResult] = {}
    for cell in config.cells:
        jobs = [
            (config, cell, config.seed_base + i, trace_dir)
            for i in range(config.episodes)
        ]
        results: list[EpisodeResult] = []
        aborted = False
        message = None
        try:
            if config.workers > 1:
                with ProcessPoolExecutor(max_workers=config.workers) as pool:
                    results = list(pool.map(_episode_job, jobs))
            else:
                results = [_episode_job(job) for job in jobs]
        except Exception as exc:  # noqa: BLE001 - cell-level containment is the contract
            aborted = True
            message = f"{type(exc).__name__}: {exc}"
            results = []
        results.sort(key=lambda r: r.seed)
        cell_results[cell.name] = CellResult(
            cell=cell, results=results, aborted=aborted, failure_message=message
        )
    return cell_results


def sweep_tables(config: ExperimentConfig, cell_results: dict[str, CellResult]):
    """Summary rows, test rows and success curves from sweep results."""
    baseline = cell_results[config.baseline_cell]
    baseline_summary = baseline.summary()

    summary_rows = []
    test_rows = []
    for cell in config.cells:
        res = cell_results[cell.name]
        summary = res.summary()
        n_success = len(res.success_times())
        if summary is None:
            summary_rows.append(
                SummaryRow(
                    group="sweep", label=cell.name, mean=math.nan, var=math.nan,
                    n=n_success, alternative=cell.alternative,
                )
            )
            continue
        summary_rows.append(
            SummaryRow(
                group="sweep", label=cell.name, mean=summary.mean, var=summary.variance,
                n=summary.n, alternative=cell.alternative,
            )
        )
        row = {
            "group": "sweep",
            "method": cell.name,
            "mean": summary.mean,
            "var": summary.variance,
            "n": summary.n,
            "t": None,
            "p": None,
            "significant": None,
        }
        if cell.name != config.baseline_cell and baseline_summary is not None:
            result = pooled_t_test(summary, baseline_summary, alternative=cell.alternative)
            row.update(
                t=result.t_stat, p=result.p_one_tailed,
                significant=result.p_one_tailed < 0.05,
            )
        test_rows.append(row)

    grid = np.round(np.arange(0.0, config.duration_max + 1e-9, 0.1), 10)
    curves = {}
    for cell in config.cells:
        res = cell_results[cell.name]
        if res.results:
            curves[cell.name] = cumulative_success_curve(res.results, grid)
        else:
            curves[cell.name] = np.zeros_like(grid)
    return summary_rows, test_rows, grid, curves


def write_sweep_outputs(
    config: ExperimentConfig, cell_results: dict[str, CellResult], out_dir
) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary_rows, test_rows, grid, curves = sweep_tables(config, cell_results)
    write_summary_table(summary_rows, out / "summary.csv")
    write_test_table(test_rows, out / "tests.csv")
    write_success_curve(grid, curves, out / "success_curves.csv")
    failures = {
        name: res.failure_message
        for name, res in cell_results.items()
        if res.aborted
    }
    status = {
        "cells": {
            name: {
                "episodes": len(res.results),
                "successes": len(res.success_times()),
                "aborted": res.aborted,
                "failure": res.failure_message,
            }
            for name, res in cell_results.items()
        },
        "failures_tallied": len(failures),
    }
    (out / "status.json").write_text(json.dumps(status, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Config (de)serialization


def default_config() -> ExperimentConfig:
    """The flagship comparison: matched FD / position-only / mismatch cells.

    The mismatch cell executes plans built for finite-difference tracking
    under the position-only controller. Gains are a compliant set (soft
    stiffness, critical damping) appropriate for the tight-tolerance
    insertion task.
    """
    return ExperimentConfig(
        scenario=PegInHole(),
        gains=Gains.critically_damped(dims=2, stiffness=200.0, inertia=4.0),
        cells=[
            CellConfig(name="fd", mode=ReferenceMode.FINITE_DIFFERENCE, f_action=15,
                       plan_profile="velocity", alternative="less"),
            CellConfig(name="baseline", mode=ReferenceMode.POSITION_ONLY, f_action=15,
                       plan_profile="baseline", alternative="less"),
            CellConfig(name="mismatch", mode=ReferenceMode.POSITION_ONLY, f_action=15,
                       plan_profile="velocity", alternative="greater"),
        ],
    )


def config_to_dict(config: ExperimentConfig) -> dict:
    scenario: dict
    if isinstance(config.scenario, PegInHole):
        scenario = {
            "kind": "peg_in_hole",
            "hole_center": list(map(float, config.scenario.hole_center)),
            "hole_halfwidth": config.scenario.hole_halfwidth,
            "clearance": config.scenario.clearance,
            "wall_stiffness": config.scenario.wall_stiffness,
            "wall_damping": config.scenario.wall_damping,
            "funnel_halfangle": config.scenario.funnel_halfangle,
            "insertion_depth": config.scenario.insertion_depth,
        }
    elif isinstance(config.scenario, ConstantForce):
        scenario = {"kind": "constant_force", "force": list(map(float, config.scenario.force))}
    else:
        scenario = {"kind": "free_space"}
    return {
        "scenario": scenario,
        "gains": {
            "inertia": list(map(float, config.gains.inertia)),
            "damping": list(map(float, config.gains.damping)),
            "stiffness": list(map(float, config.gains.stiffness)),
        },
        "cells": [
            {
                "name": c.name,
                "mode": c.mode.value,
                "f_action": c.f_action,
                "plan_profile": c.plan_profile,
                "alternative": c.alternative,
            }
            for c in config.cells
        ],
        "episodes": config.episodes,
        "seed_base": config.seed_base,
        "f_ctrl": config.f_ctrl,
        "duration_max": config.duration_max,
        "chunk_horizon": config.chunk_horizon,
        "blend_overlap": config.blend_overlap,
        "baseline_cell": config.baseline_cell,
        "workers": config.workers,
        "out_dir": config.out_dir,
        "plan": {
            "start_offset": list(config.plan.start_offset),
            "goal_offset": (
                None if config.plan.goal_offset is None else list(config.plan.goal_offset)
            ),
            "approach_height": config.plan.approach_height,
            "descend_overshoot": config.plan.descend_overshoot,
            "lateral_std": config.plan.lateral_std,
            "depth_jitter_std": config.plan.depth_jitter_std,
            "perturbation": config.plan.perturbation,
            "attempts": config.plan.attempts,
            "profiles": {
                name: asdict(profile) for name, profile in config.plan.profiles.items()
            },
        },
    }


def config_from_dict(doc: dict) -> ExperimentConfig:
    try:
        sdoc = doc["scenario"]
        kind = sdoc["kind"]
        if kind == "peg_in_hole":
            scenario: Scenario = PegInHole(
                hole_center=np.asarray(sdoc.get("hole_center", [0.0, 0.0])),
                hole_halfwidth=sdoc.get("hole_halfwidth", 0.01),
                clearance=sdoc.get("clearance", 0.0005),
                wall_stiffness=sdoc.get("wall_stiffness", 5.0e4),
                wall_damping=sdoc.get("wall_damping", 100.0),
                funnel_halfangle=sdoc.get("funnel_halfangle", math.radians(30.0)),
                insertion_depth=sdoc.get("insertion_depth", 0.02),
            )
        elif kind == "constant_force":
            scenario = ConstantForce(force=np.asarray(sdoc["force"]))
        elif kind == "free_space":
            scenario = FreeSpace()
        else:
            raise ConfigError(f"unknown scenario kind {kind!r}")
        gdoc = doc["gains"]
        gains = Gains(
            inertia=np.asarray(gdoc["inertia"]),
            damping=np.asarray(gdoc["damping"]),
            stiffness=np.asarray(gdoc["stiffness"]),
        )
        pdoc = doc.get("plan", {})
        profiles = {
            name: SpeedProfile(**prof)
            for name, prof in pdoc.get(
                "profiles", config_to_dict(default_config())["plan"]["profiles"]
            ).items()
        }
        plan = PlanParams(
            start_offset=tuple(pdoc.get("start_offset", (-0.25, 0.12))),
            goal_offset=(
                None if pdoc.get("goal_offset") is None else tuple(pdoc["goal_offset"])
            ),
            approach_height=pdoc.get("approach_height", 0.03),
            descend_overshoot=pdoc.get("descend_overshoot", 0.008),
            lateral_std=pdoc.get("lateral_std", 0.0015),
            depth_jitter_std=pdoc.get("depth_jitter_std", 0.004),
            perturbation=pdoc.get("perturbation", 0.0015),
            attempts=int(pdoc.get("attempts", 18)),
            profiles=profiles,
        )
        cells = [
            CellConfig(
                name=c["name"],
                mode=ReferenceMode(c["mode"]),
                f_action=int(c["f_action"]),
                plan_profile=c.get("plan_profile", "baseline"),
                alternative=c.get("alternative", "less"),
            )
            for c in doc["cells"]
        ]
        return ExperimentConfig(
            scenario=scenario,
            gains=gains,
            cells=cells,
            episodes=int(doc.get("episodes", 50)),
            seed_base=int(doc.get("seed_base", 1000)),
            f_ctrl=int(doc.get("f_ctrl", 500)),
            duration_max=float(doc.get("duration_max", 20.0)),
            chunk_horizon=float(doc.get("chunk_horizon", 1.0)),
            blend_overlap=float(doc.get("blend_overlap", 0.1)),
            baseline_cell=doc.get("baseline_cell", "baseline"),
            workers=int(doc.get("workers", 1)),
            out_dir=doc.get("out_dir", "sweep-out"),
            plan=plan,
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid experiment config: {exc}") from exc


def load_config(path) -> ExperimentConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return config_from_dict(doc)
