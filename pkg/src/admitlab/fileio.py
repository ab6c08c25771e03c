"""Persistence for trajectory logs, spline datasets, episode traces and stats tables.

All time series are delimited text with normative headers; structured
documents are JSON with an explicit format/version pair. Floats are written
with ``repr`` so values round-trip exactly and repeated runs produce
byte-identical files.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DatasetFormatError, DatasetVersionError, LogParseError
from .sim import EpisodeTrace
from .spline import BSplineTrajectory
from .stats import rms_tracking_error

SPLINE_DATASET_FORMAT = "spline-dataset"
SPLINE_DATASET_VERSION = 1


@dataclass
class TrajectoryLog:
    """Recorded positions over time plus optional header metadata."""

    times: np.ndarray
    positions: np.ndarray
    source: str | None = None
    sample_rate_hz: float | None = None

    @property
    def dims(self) -> int:
        return self.positions.shape[1]


def _fmt(x: float) -> str:
    return repr(float(x))


def write_trajectory_log(log: TrajectoryLog, path) -> None:
    """Write a log as `t,x0,...,x{d-1}` rows with `# key: value` metadata lines."""
    path = Path(path)
    d = log.dims
    lines = []
    if log.source is not None:
        lines.append(f"# source: {log.source}")
    if log.sample_rate_hz is not None:
        lines.append(f"# sample_rate_hz: {_fmt(log.sample_rate_hz)}")
    lines.append("t," + ",".join(f"x{i}" for i in range(d)))
    for t, row in zip(log.times, log.positions):
        lines.append(",".join([_fmt(t)] + [_fmt(v) for v in row]))
    path.write_text("\n".join(lines) + "\n")


def read_trajectory_log(path) -> TrajectoryLog:
    """Parse a trajectory log, validating monotone time and column counts.

    Raises LogParseError carrying the 1-based line number of the first
    offending row.
    """
    path = Path(path)
    source = None
    sample_rate = None
    header = None
    times: list[float] = []
    rows: list[list[float]] = []
    n_cols = None
    with path.open() as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line.lstrip("#").strip()
                if ":" in body:
                    key, _, value = body.partition(":")
                    key, value = key.strip(), value.strip()
                    if key == "source":
                        source = value
                    elif key == "sample_rate_hz":
                        try:
                            sample_rate = float(value)
                        except ValueError:
                            raise LogParseError(f"bad sample_rate_hz {value!r}", lineno)
                continue
            if header is None:
                header = [c.strip() for c in line.split(",")]
                expected = ["t"] + [f"x{i}" for i in range(len(header) - 1)]
                if header != expected:
                    raise LogParseError(
                        f"header must be 't,x0,...', got {','.join(header)}", lineno
                    )
                n_cols = len(header)
                continue
            cells = line.split(",")
            if len(cells) != n_cols:
                raise LogParseError(
                    f"expected {n_cols} columns, got {len(cells)}", lineno
                )
            try:
                values = [float(c) for c in cells]
            except ValueError:
                raise LogParseError(f"non-numeric value in row {line!r}", lineno)
            if times and values[0] <= times[-1]:
                raise LogParseError(
                    f"time {values[0]} is not after previous time {times[-1]}", lineno
                )
            times.append(values[0])
            rows.append(values[1:])
    if header is None:
        raise LogParseError("missing header line")
    if not rows:
        raise LogParseError("log contains no samples")
    return TrajectoryLog(
        times=np.array(times),
        positions=np.array(rows),
        source=source,
        sample_rate_hz=sample_rate,
    )


def write_spline_dataset(chunks, path) -> None:
    """Write fitted chunks as a versioned JSON document.

    ``chunks`` is a sequence of (BSplineTrajectory, fit_residual_rms) pairs.
    The per-chunk field names {degree, knots, dims, control_points,
    fit_residual_rms} are part of the format contract.
    """
    doc = {
        "format": SPLINE_DATASET_FORMAT,
        "version": SPLINE_DATASET_VERSION,
        "chunks": [
            {
                "degree": traj.degree,
                "knots": [float(k) for k in traj.knots],
                "dims": traj.dims,
                "control_points": [[float(v) for v in row] for row in traj.control_points],
                "fit_residual_rms": float(rms),
            }
            for traj, rms in chunks
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def read_spline_dataset(path) -> list[tuple[BSplineTrajectory, float]]:
    """Read a spline dataset, rejecting unknown formats and versions."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"not a valid JSON document: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != SPLINE_DATASET_FORMAT:
        raise DatasetFormatError(
            f"expected format {SPLINE_DATASET_FORMAT!r}, got {doc.get('format')!r}"
            if isinstance(doc, dict)
            else "document root must be an object"
        )
    if doc.get("version") != SPLINE_DATASET_VERSION:
        raise DatasetVersionError(
            f"unsupported dataset version {doc.get('version')!r}, "
            f"expected {SPLINE_DATASET_VERSION}"
        )
    chunks = []
    for idx, entry in enumerate(doc.get("chunks", [])):
        try:
            traj = BSplineTrajectory(
                degree=int(entry["degree"]),
                knots=np.array(entry["knots"], dtype=float),
                control_points=np.array(entry["control_points"], dtype=float),
            )
            rms = float(entry["fit_residual_rms"])
            if traj.dims != int(entry["dims"]):
                raise ValueError(
                    f"dims field {entry['dims']} does not match control points"
                )
        except (KeyError, TypeError, ValueError) as exc:
            raise DatasetFormatError(f"malformed chunk {idx}: {exc}") from exc
        chunks.append((traj, rms))
    return chunks


def reference_trace_header(dims: int) -> str:
    """Header for emitted reference traces: the log format plus velocity and
    acceleration columns."""
    cols = ["t"]
    for prefix in ("x", "v", "a"):
        cols.extend(f"{prefix}{i}" for i in range(dims))
    return ",".join(cols)


def write_reference_trace(source, times, dims: int, path) -> None:
    """Sample a reference source on a time grid and write t,x...,v...,a... rows."""
    path = Path(path)
    lines = [reference_trace_header(dims)]
    for t in times:
        s = source.sample(float(t))
        row = [float(t), *s.position, *s.velocity, *s.acceleration]
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def trace_header(dims: int) -> str:
    """Normative episode-trace header: reference pos/vel/acc, plant pos/vel,
    commanded acceleration, external force, tracking error."""
    blocks = [
        ("xd", dims), ("vd", dims), ("ad", dims),
        ("x", dims), ("v", dims), ("acmd", dims), ("f", dims), ("e", dims),
    ]
    cols = ["t"]
    for prefix, d in blocks:
        cols.extend(f"{prefix}{i}" for i in range(d))
    return ",".join(cols)


def write_episode_trace(trace: EpisodeTrace, path) -> Path:
    """Write one episode as CSV plus a side-car JSON summary.

    Returns the summary path (trace path with a .json suffix).
    """
    path = Path(path)
    d = trace.dims
    lines = [trace_header(d)]
    stacked = np.hstack(
        [
            trace.times[:, None],
            trace.ref_position,
            trace.ref_velocity,
            trace.ref_acceleration,
            trace.position,
            trace.velocity,
            trace.accel_cmd,
            trace.external_force,
            trace.error,
        ]
    )
    for row in stacked:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")

    summary = {
        "success": trace.succeeded,
        "success_time": trace.success_time,
        "rms_error": rms_tracking_error(trace),
        "peak_force": trace.peak_force(),
        "clamp_events": trace.clamp_events,
    }
    summary_path = path.with_suffix(".json")
    summary_path.write_text(json.dumps(summary, indent=2) + "\n")
    return summary_path


@dataclass
class SummaryRow:
    """One group summary as consumed by the stats command."""

    group: str
    label: str
    mean: float
    var: float
    n: int
    alternative: str = "less"


SUMMARY_HEADER = ["group", "label", "mean", "var", "n", "alternative"]


def write_summary_table(rows: list[SummaryRow], path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_HEADER)
        for row in rows:
            writer.writerow(
                [row.group, row.label, _fmt(row.mean), _fmt(row.var), row.n, row.alternative]
            )


def read_summary_table(path) -> list[SummaryRow]:
    path = Path(path)
    rows = []
    with path.open() as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != SUMMARY_HEADER:
            raise DatasetFormatError(
                f"summary table header must be {','.join(SUMMARY_HEADER)}"
            )
        for record in reader:
            try:
                rows.append(
                    SummaryRow(
                        group=record["group"],
                        label=record["label"],
                        mean=float(record["mean"]),
                        var=float(record["var"]),
                        n=int(record["n"]),
                        alternative=record["alternative"] or "less",
                    )
                )
            except (TypeError, ValueError) as exc:
                raise DatasetFormatError(f"malformed summary row {record}: {exc}") from exc
    if not rows:
        raise DatasetFormatError("summary table contains no rows")
    return rows


TEST_TABLE_HEADER = ["group", "method", "mean", "var", "n", "t", "p", "significant_at_0.05"]


def write_test_table(rows: list[dict], path) -> None:
    """Write an aggregate comparison table, one row per tested method.

    Baseline rows carry empty t/p/significance cells.
    """
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TEST_TABLE_HEADER)
        for row in rows:
            writer.writerow(
                [
                    row["group"],
                    row["method"],
                    _fmt(row["mean"]),
                    _fmt(row["var"]),
                    row["n"],
                    _fmt(row["t"]) if row.get("t") is not None else "",
                    _fmt(row["p"]) if row.get("p") is not None else "",
                    "" if row.get("significant") is None else ("yes" if row["significant"] else "no"),
                ]
            )


def write_success_curve(grid: np.ndarray, curves: dict[str, np.ndarray], path) -> None:
    """Cumulative-success fractions per cell on a shared time grid."""
    path = Path(path)
    names = list(curves)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + names)
        for j, t in enumerate(grid):
            writer.writerow([_fmt(t)] + [_fmt(curves[name][j]) for name in names])
