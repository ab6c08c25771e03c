"""Reference generation from low-frequency action chunks.

Turns discrete target sequences into high-frequency (position, velocity,
acceleration) samples under three representations: zero-order hold without
velocity feedforward, linear interpolation with piecewise-constant
finite-difference velocities, and continuous B-spline queries. Also provides
low-pass-filtered velocity estimation for recorded trajectories and a
smoothstep crossfade for chunk transitions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Protocol

import numpy as np

from .spline import BSplineTrajectory, evaluate
from .validation import check_positions, check_times, readonly

# Guard against float round-off when mapping times to action-tick indices;
# well below any supported tick length (>= 1/500 s).
_TICK_EPS = 1e-9


class ReferenceMode(Enum):
    """The three action-chunk representations."""

    POSITION_ONLY = "zoh"
    FINITE_DIFFERENCE = "fd"
    SPLINE = "spline"


@dataclass(frozen=True)
class ActionChunk:
    """A sequence of discrete pose targets at a fixed low rate.

    ``targets`` has shape (H, d); ``velocities``, when present, matches it.
    """

    start_time: float
    dt_action: float
    targets: np.ndarray
    velocities: np.ndarray | None = None

    def __post_init__(self):
        if self.dt_action <= 0:
            raise ValueError("dt_action must be positive")
        targets = check_positions(self.targets, name="targets")
        if targets.shape[0] < 1:
            raise ValueError("a chunk needs at least one target")
        object.__setattr__(self, "targets", readonly(targets))
        if self.velocities is not None:
            vel = check_positions(self.velocities, name="velocities")
            if vel.shape != targets.shape:
                raise ValueError(
                    f"velocities shape {vel.shape} must match targets shape {targets.shape}"
                )
            object.__setattr__(self, "velocities", readonly(vel))

    @property
    def horizon(self) -> int:
        return self.targets.shape[0]

    @property
    def dims(self) -> int:
        return self.targets.shape[1]

    def end_time(self) -> float:
        return self.start_time + (self.horizon - 1) * self.dt_action


@dataclass(frozen=True)
class ReferenceSample:
    """Desired position, velocity and acceleration at one query time."""

    position: np.ndarray
    velocity: np.ndarray
    acceleration: np.ndarray

    def __post_init__(self):
        for name in ("position", "velocity", "acceleration"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, readonly(arr))


def _tick_index(chunk: ActionChunk, t: float) -> int:
    if t < chunk.start_time - _TICK_EPS:
        raise ValueError(
            f"query time {t} precedes chunk start {chunk.start_time}"
        )
    return int(math.floor((t - chunk.start_time) / chunk.dt_action + _TICK_EPS))


def zoh_reference(chunk: ActionChunk, t: float) -> ReferenceSample:
    """Zero-order hold: latest target held, velocity feedforward zero.

    Right-continuous at action ticks; past the last target the terminal
    position is held.
    """
    j = min(_tick_index(chunk, t), chunk.horizon - 1)
    zero = np.zeros(chunk.dims)
    return ReferenceSample(chunk.targets[j].copy(), zero, zero.copy())


def fd_reference(chunk: ActionChunk, t: float) -> ReferenceSample:
    """Linear interpolation with piecewise-constant finite-difference velocity.

    Between consecutive targets the velocity is (next - current) / dt; past
    the last target the position is held with zero velocity. Acceleration is
    always zero in this representation.
    """
    j = _tick_index(chunk, t)
    zero = np.zeros(chunk.dims)
    if j >= chunk.horizon - 1:
        return ReferenceSample(chunk.targets[-1].copy(), zero, zero.copy())
    frac = (t - chunk.start_time) / chunk.dt_action - j
    a, b = chunk.targets[j], chunk.targets[j + 1]
    velocity = (b - a) / chunk.dt_action
    return ReferenceSample(a + frac * (b - a), velocity, zero)


def spline_reference(traj: BSplineTrajectory, t: float) -> ReferenceSample:
    """Query a spline trajectory for position, velocity and acceleration.

    Out-of-domain times clamp to the nearest endpoint with velocity and
    acceleration forced to zero (terminal hold).
    """
    if t < traj.t_start or t > traj.t_end:
        edge = traj.t_start if t < traj.t_start else traj.t_end
        zero = np.zeros(traj.dims)
        return ReferenceSample(evaluate(traj, edge, 0), zero, zero.copy())
    return ReferenceSample(
        evaluate(traj, t, 0), evaluate(traj, t, 1), evaluate(traj, t, 2)
    )


def lowpass_differentiate(times, positions, cutoff_hz: float) -> np.ndarray:
    """Backward finite differences passed through a first-order low-pass.

    The filter is an exponential IIR with time constant 1/(2*pi*cutoff_hz),
    initialized at zero velocity, mirroring how velocities are estimated from
    high-rate teleoperation position streams. The first output row is zero.
    """
    t = check_times(times)
    pos = check_positions(positions, n_times=t.size)
    if t.size < 2:
        raise ValueError("need at least two samples to differentiate")
    dts = np.diff(t)
    nyquist = 0.5 / float(np.mean(dts))
    if not 0.0 < cutoff_hz < nyquist:
        raise ValueError(
            f"cutoff_hz must lie in (0, {nyquist:.3f}) for this sampling rate, got {cutoff_hz}"
        )
    tau = 1.0 / (2.0 * math.pi * cutoff_hz)
    out = np.zeros_like(pos)
    state = np.zeros(pos.shape[1])
    for j in range(1, t.size):
        raw = (pos[j] - pos[j - 1]) / dts[j - 1]
        alpha = 1.0 - math.exp(-dts[j - 1] / tau)
        state = state + alpha * (raw - state)
        out[j] = state
    return out


def smoothstep(u: float) -> float:
    """Cubic smoothstep, clamped to [0, 1] outside the unit interval."""
    if u <= 0.0:
        return 0.0
    if u >= 1.0:
        return 1.0
    return u * u * (3.0 - 2.0 * u)


class ReferenceSource(Protocol):
    """Anything that can be queried for a reference sample at a time."""

    def sample(self, t: float) -> ReferenceSample: ...


def blend_chunks(
    previous: ReferenceSource,
    next_source: ReferenceSource,
    switch_time: float,
    overlap: float,
    t: float,
) -> ReferenceSample:
    """Crossfade between two reference sources over an overlap window.

    Inside [switch_time, switch_time + overlap] the output is the convex
    combination with smoothstep weight applied to position, velocity and
    acceleration; outside the window it is the pure previous or next source.
    Zero overlap degenerates to a hard switch at switch_time.
    """
    if overlap < 0:
        raise ValueError("overlap must be non-negative")
    if overlap == 0.0:
        return next_source.sample(t) if t >= switch_time else previous.sample(t)
    w = smoothstep((t - switch_time) / overlap)
    if w <= 0.0:
        return previous.sample(t)
    if w >= 1.0:
        return next_source.sample(t)
    a = previous.sample(t)
    b = next_source.sample(t)
    return ReferenceSample(
        (1.0 - w) * a.position + w * b.position,
        (1.0 - w) * a.velocity + w * b.velocity,
        (1.0 - w) * a.acceleration + w * b.acceleration,
    )


@dataclass(frozen=True)
class ZohChunkReference:
    """Reference source wrapping ``zoh_reference`` over one chunk."""

    chunk: ActionChunk

    def sample(self, t: float) -> ReferenceSample:
        return zoh_reference(self.chunk, t)


@dataclass(frozen=True)
class FdChunkReference:
    """Reference source wrapping ``fd_reference`` over one chunk."""

    chunk: ActionChunk

    def sample(self, t: float) -> ReferenceSample:
        return fd_reference(self.chunk, t)


@dataclass
class SplineReference:
    """Reference source wrapping a spline; counts out-of-domain clamps."""

    trajectory: BSplineTrajectory
    clamp_count: int = 0

    def sample(self, t: float) -> ReferenceSample:
        if t < self.trajectory.t_start or t > self.trajectory.t_end:
            self.clamp_count += 1
        return spline_reference(self.trajectory, t)


@dataclass(frozen=True)
class BlendedReference:
    """Reference source crossfading from ``previous`` to ``next_source``."""

    previous: ReferenceSource
    next_source: ReferenceSource
    switch_time: float
    overlap: float

    def sample(self, t: float) -> ReferenceSample:
        return blend_chunks(self.previous, self.next_source, self.switch_time, self.overlap, t)


def chunk_from_samples(
    positions: np.ndarray, start_time: float, dt_action: float
) -> ActionChunk:
    """Build a chunk directly from already-downsampled targets."""
    return ActionChunk(start_time=start_time, dt_action=dt_action, targets=positions)


def make_source(
    mode: ReferenceMode,
    chunk: ActionChunk | None = None,
    trajectory: BSplineTrajectory | None = None,
) -> ReferenceSource:
    """Reference source for a mode from its chunk or fitted trajectory."""
    if mode is ReferenceMode.POSITION_ONLY:
        if chunk is None:
            raise ValueError("position-only mode needs an action chunk")
        return ZohChunkReference(chunk)
    if mode is ReferenceMode.FINITE_DIFFERENCE:
        if chunk is None:
            raise ValueError("finite-difference mode needs an action chunk")
        return FdChunkReference(chunk)
    if trajectory is None:
        raise ValueError("spline mode needs a fitted trajectory")
    return SplineReference(trajectory)
