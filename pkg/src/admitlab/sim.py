"""Deterministic planar simulator.

Minimum-jerk ground-truth plans, penalty-contact scenarios (free space,
constant push, tight-tolerance peg-in-funnel), and the episode runner that
ties chunked reference generation to the admittance controller at decoupled
action and control rates. Episodes are pure functions of (plan, config,
scenario): identical inputs give bit-identical traces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .control import ControllerState, Gains, admittance_accel, step
from .errors import ConfigError, EpisodeDivergedError
from .reference import (
    ActionChunk,
    BlendedReference,
    FdChunkReference,
    ReferenceMode,
    SplineReference,
    ZohChunkReference,
)
from .spline import fit_least_squares
from .validation import check_vector, readonly

# ---------------------------------------------------------------------------
# Ground-truth plans


@dataclass(frozen=True)
class MinimumJerkSegment:
    """Quintic point-to-point profile, at rest at both ends.

    Position follows start + s(u) * (goal - start) with
    s(u) = 10u^3 - 15u^4 + 6u^5; the peak speed is 15/8 * distance/duration.
    Outside [t0, t0 + duration] the nearer endpoint is held at rest.
    """

    start: np.ndarray
    goal: np.ndarray
    t0: float
    duration: float

    def __post_init__(self):
        start = check_vector(self.start, name="start")
        goal = check_vector(self.goal, dims=start.size, name="goal")
        if self.duration < 0:
            raise ValueError("duration must be non-negative")
        object.__setattr__(self, "start", readonly(start))
        object.__setattr__(self, "goal", readonly(goal))

    def _shape(self, t: float) -> tuple[float, float, float]:
        if self.duration == 0.0:
            return (1.0, 0.0, 0.0) if t >= self.t0 else (0.0, 0.0, 0.0)
        u = (t - self.t0) / self.duration
        if u <= 0.0:
            return 0.0, 0.0, 0.0
        if u >= 1.0:
            return 1.0, 0.0, 0.0
        s = u**3 * (10.0 - 15.0 * u + 6.0 * u**2)
        ds = u**2 * (30.0 - 60.0 * u + 30.0 * u**2) / self.duration
        dds = u * (60.0 - 180.0 * u + 120.0 * u**2) / self.duration**2
        return s, ds, dds

    @property
    def t_end(self) -> float:
        return self.t0 + self.duration

    def position(self, t: float) -> np.ndarray:
        s, _, _ = self._shape(t)
        return self.start + s * (self.goal - self.start)

    def velocity(self, t: float) -> np.ndarray:
        _, ds, _ = self._shape(t)
        return ds * (self.goal - self.start)

    def acceleration(self, t: float) -> np.ndarray:
        _, _, dds = self._shape(t)
        return dds * (self.goal - self.start)


@dataclass(frozen=True)
class SmoothBump:
    """Gaussian-windowed waypoint perturbation with analytic derivatives."""

    amplitude: np.ndarray
    center: float
    width: float

    def position(self, t: float) -> np.ndarray:
        z = (t - self.center) / self.width
        return self.amplitude * math.exp(-0.5 * z * z)

    def velocity(self, t: float) -> np.ndarray:
        z = (t - self.center) / self.width
        return self.amplitude * (-z / self.width) * math.exp(-0.5 * z * z)

    def acceleration(self, t: float) -> np.ndarray:
        z = (t - self.center) / self.width
        return self.amplitude * ((z * z - 1.0) / self.width**2) * math.exp(-0.5 * z * z)


@dataclass(frozen=True)
class Plan:
    """Piecewise minimum-jerk plan with optional smooth perturbations.

    Segments are consecutive in time; before the first and after the last
    segment the respective endpoint is held. Exact velocity and acceleration
    are available at any time, so ground truth for feedforward is analytic.
    """

    segments: tuple[MinimumJerkSegment, ...]
    bumps: tuple[SmoothBump, ...] = ()

    def __post_init__(self):
        if not self.segments:
            raise ValueError("a plan needs at least one segment")
        for a, b in zip(self.segments, self.segments[1:]):
            if b.t0 < a.t_end - 1e-12:
                raise ValueError("plan segments must not overlap")

    @property
    def dims(self) -> int:
        return self.segments[0].start.size

    @property
    def t_end(self) -> float:
        return self.segments[-1].t_end

    def _active(self, t: float) -> MinimumJerkSegment:
        for seg in self.segments:
            if t < seg.t_end:
                return seg
        return self.segments[-1]

    def position(self, t: float) -> np.ndarray:
        out = self._active(t).position(t)
        for bump in self.bumps:
            out = out + bump.position(t)
        return out

    def velocity(self, t: float) -> np.ndarray:
        out = self._active(t).velocity(t)
        for bump in self.bumps:
            out = out + bump.velocity(t)
        return out

    def acceleration(self, t: float) -> np.ndarray:
        out = self._active(t).acceleration(t)
        for bump in self.bumps:
            out = out + bump.acceleration(t)
        return out

    def sample_positions(self, times: np.ndarray) -> np.ndarray:
        return np.stack([self.position(float(t)) for t in times])


def minimum_jerk_duration(distance: float, peak_speed: float) -> float:
    """Duration for which the quintic's peak speed equals peak_speed."""
    if peak_speed <= 0:
        raise ValueError("peak_speed must be positive")
    return 15.0 / 8.0 * distance / peak_speed


def make_transfer_plan(
    start,
    goal,
    peak_speed: float,
    seed: int | None = None,
    perturbation: float = 0.0,
    t0: float = 0.0,
) -> Plan:
    """Point-to-point minimum-jerk plan, optionally with seeded perturbations.

    The duration is chosen so the quintic's peak speed equals ``peak_speed``.
    When a seed is given and ``perturbation`` > 0, a few smooth bumps of that
    amplitude scale are superimposed as a stand-in for human waypoint
    variation; the profile stays analytically differentiable.
    """
    start = check_vector(start, name="start")
    goal = check_vector(goal, dims=start.size, name="goal")
    distance = float(np.linalg.norm(goal - start))
    duration = minimum_jerk_duration(distance, peak_speed) if distance > 0 else 0.0
    segment = MinimumJerkSegment(start=start, goal=goal, t0=t0, duration=duration)
    bumps: tuple[SmoothBump, ...] = ()
    if seed is not None and perturbation > 0.0 and duration > 0.0:
        rng = np.random.default_rng(seed)
        n_bumps = 3
        centers = t0 + duration * rng.uniform(0.25, 0.75, size=n_bumps)
        widths = duration * rng.uniform(0.05, 0.12, size=n_bumps)
        amps = perturbation * rng.standard_normal((n_bumps, start.size))
        bumps = tuple(
            SmoothBump(amplitude=readonly(a), center=float(c), width=float(w))
            for a, c, w in zip(amps, centers, widths)
        )
    return Plan(segments=(segment,), bumps=bumps)


# ---------------------------------------------------------------------------
# Contact scenarios


@dataclass(frozen=True)
class FreeSpace:
    """No environment; contact force is identically zero."""


@dataclass(frozen=True)
class ConstantForce:
    """A fixed external push, independent of state."""

    force: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "force", readonly(check_vector(self.force, name="force")))


@dataclass(frozen=True)
class PegInHole:
    """Planar chamfered hole in a table top; x is lateral, y is vertical.

    The hole mouth has half-width ``hole_halfwidth`` at the table plane and
    narrows along the chamfer (half-angle from vertical ``funnel_halfangle``)
    down to the straight channel of half-width ``clearance``. Success means
    the peg point is laterally within the clearance and deeper than
    ``insertion_depth`` below the table plane. Walls are penalty
    spring-dampers, repulsive only.
    """

    hole_center: np.ndarray = field(default_factory=lambda: np.zeros(2))
    hole_halfwidth: float = 0.01
    clearance: float = 0.0005
    wall_stiffness: float = 5.0e4
    wall_damping: float = 100.0
    funnel_halfangle: float = math.radians(30.0)
    insertion_depth: float = 0.02

    def __post_init__(self):
        center = check_vector(self.hole_center, dims=2, name="hole_center")
        object.__setattr__(self, "hole_center", readonly(center))
        if self.clearance <= 0:
            raise ValueError("clearance must be positive")
        if self.hole_halfwidth <= self.clearance:
            raise ValueError("hole_halfwidth must exceed the clearance")
        if self.wall_stiffness <= 0:
            raise ValueError("wall_stiffness must be positive")
        if self.wall_damping < 0:
            raise ValueError("wall_damping must be non-negative")
        if not 0 < self.funnel_halfangle < math.pi / 2:
            raise ValueError("funnel_halfangle must lie in (0, pi/2)")
        if self.insertion_depth <= 0:
            raise ValueError("insertion_depth must be positive")

    @property
    def funnel_depth(self) -> float:
        return (self.hole_halfwidth - self.clearance) / math.tan(self.funnel_halfangle)

    def boundary_halfwidth(self, depth_below_top: float) -> float:
        """Lateral half-width of the free opening at a given depth (>= 0)."""
        if depth_below_top >= self.funnel_depth:
            return self.clearance
        return self.hole_halfwidth - depth_below_top * math.tan(self.funnel_halfangle)

    def is_inserted(self, position: np.ndarray) -> bool:
        lateral = abs(position[0] - self.hole_center[0])
        depth = self.hole_center[1] - position[1]
        return lateral <= self.clearance and depth >= self.insertion_depth


Scenario = FreeSpace | ConstantForce | PegInHole

# Finite extent used for the table and channel wall segments; generous for a
# desk-scale workspace.
_FAR = 10.0


def _segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> tuple[float, np.ndarray]:
    ab = b - a
    denom = float(ab @ ab)
    u = 0.0 if denom == 0.0 else float(np.clip((p - a) @ ab / denom, 0.0, 1.0))
    closest = a + u * ab
    return float(np.linalg.norm(p - closest)), closest


def contact_force(scenario: Scenario, position, velocity) -> np.ndarray:
    """Environment-on-robot force at the current plant state.

    Free space returns zero and a constant push returns its fixed vector.
    The peg-in-hole fixture applies a penalty force along the escape
    direction whenever the point is inside the solid: magnitude
    stiffness * penetration + damping * approach speed, clamped repulsive.
    """
    position = np.asarray(position, dtype=float)
    velocity = np.asarray(velocity, dtype=float)
    if isinstance(scenario, FreeSpace):
        return np.zeros_like(position)
    if isinstance(scenario, ConstantForce):
        return scenario.force.copy()

    geo: PegInHole = scenario
    local = position - geo.hole_center
    x, y = float(local[0]), float(local[1])
    ax = abs(x)
    sgn = 1.0 if x >= 0.0 else -1.0

    # Solid occupies y < 0 outside the funnel/channel opening.
    if y >= 0.0 or ax < geo.boundary_halfwidth(-y):
        return np.zeros_like(position)

    # Distance from the (mirrored) point to the free-space boundary polyline:
    # table face, chamfer face, channel face.
    q = np.array([ax, y])
    w, c, df = geo.hole_halfwidth, geo.clearance, geo.funnel_depth
    faces = (
        (np.array([w, 0.0]), np.array([_FAR, 0.0])),
        (np.array([c, -df]), np.array([w, 0.0])),
        (np.array([c, -_FAR]), np.array([c, -df])),
    )
    best_d, best_closest = math.inf, None
    for a, b in faces:
        d, closest = _segment_distance(q, a, b)
        if d < best_d:
            best_d, best_closest = d, closest
    if best_d <= 0.0:
        return np.zeros_like(position)

    escape = (best_closest - q) / best_d
    normal = np.array([sgn * escape[0], escape[1]])
    v_local = np.array([sgn * velocity[0], velocity[1]])
    approach = -float(v_local @ escape)
    magnitude = geo.wall_stiffness * best_d + geo.wall_damping * approach
    if magnitude <= 0.0:
        return np.zeros_like(position)
    return magnitude * normal


# ---------------------------------------------------------------------------
# Episodes


@dataclass(frozen=True)
class EpisodeConfig:
    """Rates, gains and plumbing for one simulated episode.

    Action ticks are laid out at exact 1/f_action offsets inside each chunk,
    so the control rate need not be an integer multiple of the action rate.
    Chunks of ``chunk_horizon`` seconds are cut from the plan and crossfaded
    over ``blend_overlap`` seconds at each boundary. Spline-mode chunks are
    refit from plan samples at the control rate with a control point density
    of roughly f_action (capped at one per ``spline_samples_per_ctrl`` raw
    samples).
    """

    mode: ReferenceMode
    f_action: int
    gains: Gains
    f_ctrl: int = 500
    duration_max: float = 20.0
    seed: int = 0
    chunk_horizon: float = 1.0
    blend_overlap: float = 0.1
    integrator: str = "semi_implicit"
    inner_loop_tau: float = 0.0
    stop_on_success: bool = False
    spline_degree: int = 3
    spline_samples_per_ctrl: int = 4

    def __post_init__(self):
        if self.f_action < 1 or self.f_ctrl < self.f_action:
            raise ConfigError(
                f"need f_ctrl >= f_action >= 1, got f_ctrl={self.f_ctrl}, f_action={self.f_action}"
            )
        if self.duration_max <= 0:
            raise ConfigError("duration_max must be positive")
        if self.chunk_horizon <= 0 or self.blend_overlap < 0:
            raise ConfigError("chunk_horizon must be positive and blend_overlap non-negative")
        if self.chunk_horizon * self.f_action < 1:
            raise ConfigError("chunk_horizon must span at least one action tick")


@dataclass
class EpisodeTrace:
    """Time series of one episode plus the success time, if any.

    All arrays share the same length; ``error`` is reference minus plant
    position per step.
    """

    times: np.ndarray
    ref_position: np.ndarray
    ref_velocity: np.ndarray
    ref_acceleration: np.ndarray
    position: np.ndarray
    velocity: np.ndarray
    accel_cmd: np.ndarray
    external_force: np.ndarray
    error: np.ndarray
    success_time: float | None = None
    clamp_events: int = 0

    def __post_init__(self):
        n = self.times.shape[0]
        for name in (
            "ref_position",
            "ref_velocity",
            "ref_acceleration",
            "position",
            "velocity",
            "accel_cmd",
            "external_force",
            "error",
        ):
            if getattr(self, name).shape[0] != n:
                raise ValueError(f"{name} length does not match times")
        if self.success_time is not None and self.success_time > self.times[-1] + 1e-9:
            raise ValueError("success_time lies beyond the recorded horizon")

    @property
    def dims(self) -> int:
        return self.position.shape[1]

    @property
    def succeeded(self) -> bool:
        return self.success_time is not None

    def peak_force(self) -> float:
        return float(np.max(np.linalg.norm(self.external_force, axis=1)))


def _build_chunk_source(plan: Plan, cfg: EpisodeConfig, t0: float):
    """Cut one chunk from the plan starting at t0, per the configured mode."""
    window = cfg.chunk_horizon + 2.0 * cfg.blend_overlap
    dt_action = 1.0 / cfg.f_action
    if cfg.mode in (ReferenceMode.POSITION_ONLY, ReferenceMode.FINITE_DIFFERENCE):
        n_targets = int(math.ceil(window / dt_action)) + 1
        ticks = t0 + dt_action * np.arange(n_targets)
        chunk = ActionChunk(
            start_time=t0, dt_action=dt_action, targets=plan.sample_positions(ticks)
        )
        if cfg.mode is ReferenceMode.POSITION_ONLY:
            return ZohChunkReference(chunk)
        return FdChunkReference(chunk)

    dt = 1.0 / cfg.f_ctrl
    n_samples = int(round(window / dt)) + 1
    times = t0 + dt * np.arange(n_samples)
    positions = plan.sample_positions(times)
    n_ctrl = max(
        cfg.spline_degree + 1,
        min(int(round(window * cfg.f_action)) + 1, n_samples // cfg.spline_samples_per_ctrl),
    )
    traj, _ = fit_least_squares(times, positions, n_ctrl, cfg.spline_degree)
    return SplineReference(traj)


def run_episode(plan: Plan, cfg: EpisodeConfig, scenario: Scenario) -> EpisodeTrace:
    """Simulate one episode: chunked reference generation plus admittance control.

    At every chunk boundary the plan is resampled into the mode's
    representation; at every control tick the active (possibly crossfading)
    source is queried, the contact force evaluated at the plant state, and
    the controller stepped. The success time is recorded the first time the
    scenario's insertion predicate holds. Non-finite state aborts with a
    diagnostic error; spline fit failures propagate.
    """
    if cfg.gains.dims != plan.dims:
        raise ConfigError(
            f"gains have {cfg.gains.dims} axes but the plan has {plan.dims}"
        )
    dt = 1.0 / cfg.f_ctrl
    n_steps = int(round(cfg.duration_max * cfg.f_ctrl))
    chunk_ticks = max(1, int(round(cfg.chunk_horizon * cfg.f_ctrl)))

    d = plan.dims
    times = dt * np.arange(n_steps)
    rec = {
        name: np.empty((n_steps, d))
        for name in (
            "ref_position",
            "ref_velocity",
            "ref_acceleration",
            "position",
            "velocity",
            "accel_cmd",
            "external_force",
            "error",
        )
    }

    state = ControllerState.at_rest(plan.position(0.0))
    plant_pos = state.position.copy()
    plant_vel = state.velocity.copy()
    source = None
    spline_sources: list[SplineReference] = []
    success_time: float | None = None
    recorded = n_steps

    for i in range(n_steps):
        t = float(times[i])
        if i % chunk_ticks == 0:
            incoming = _build_chunk_source(plan, cfg, t)
            if isinstance(incoming, SplineReference):
                spline_sources.append(incoming)
            if source is None:
                source = incoming
            else:
                source = BlendedReference(source, incoming, t, cfg.blend_overlap)

        ref = source.sample(t)
        f_ext = contact_force(scenario, plant_pos, plant_vel)
        a_cmd = admittance_accel(state, ref, f_ext, cfg.gains)
        if not np.all(np.isfinite(a_cmd)):
            raise EpisodeDivergedError(
                f"state diverged (mode={cfg.mode.value}, seed={cfg.seed})", t
            )

        rec["ref_position"][i] = ref.position
        rec["ref_velocity"][i] = ref.velocity
        rec["ref_acceleration"][i] = ref.acceleration
        rec["position"][i] = plant_pos
        rec["velocity"][i] = plant_vel
        rec["accel_cmd"][i] = a_cmd
        rec["external_force"][i] = f_ext
        rec["error"][i] = ref.position - plant_pos

        if (
            success_time is None
            and isinstance(scenario, PegInHole)
            and scenario.is_inserted(plant_pos)
        ):
            success_time = t
            if cfg.stop_on_success:
                recorded = i + 1
                break

        state = step(state, ref, f_ext, cfg.gains, dt, method=cfg.integrator)
        if cfg.inner_loop_tau > 0.0:
            alpha = 1.0 - math.exp(-dt / cfg.inner_loop_tau)
            new_plant = plant_pos + alpha * (state.position - plant_pos)
            plant_vel = (new_plant - plant_pos) / dt
            plant_pos = new_plant
        else:
            plant_pos = state.position.copy()
            plant_vel = state.velocity.copy()

        if not (np.all(np.isfinite(plant_pos)) and np.all(np.isfinite(plant_vel))):
            raise EpisodeDivergedError(
                f"state diverged (mode={cfg.mode.value}, seed={cfg.seed})", t
            )

    return EpisodeTrace(
        times=times[:recorded],
        success_time=success_time,
        clamp_events=sum(s.clamp_count for s in spline_sources),
        **{name: arr[:recorded] for name, arr in rec.items()},
    )
