"""Cartesian admittance control with optional velocity feedforward.

The controller renders a mass-spring-damper relation between the tracking
error and the measured external force, commanding an acceleration

    a_cmd = a_ref + inv(inertia) @ (damping @ ev + stiffness @ ep + f_ext)

with ep = x_ref - x_cmd and ev = v_ref - v_cmd. The external force follows
the environment-on-robot convention, so a constant push yields the static
deflection x - x_ref = inv(stiffness) @ f_ext. Gain matrices are diagonal
and stored as per-axis vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .reference import ReferenceSample
from .validation import check_vector, readonly

# Per-axis defaults: compliant stiffness with critical damping.
DEFAULT_INERTIA = 2.0
DEFAULT_STIFFNESS = 400.0

MAX_DT = 0.01  # control rates of at least 100 Hz


@dataclass(frozen=True)
class Gains:
    """Diagonal desired inertia, damping and stiffness (one entry per axis)."""

    inertia: np.ndarray
    damping: np.ndarray
    stiffness: np.ndarray

    def __post_init__(self):
        inertia = check_vector(self.inertia, name="inertia")
        damping = check_vector(self.damping, dims=inertia.size, name="damping")
        stiffness = check_vector(self.stiffness, dims=inertia.size, name="stiffness")
        if np.any(inertia <= 0):
            raise ValueError("inertia entries must be strictly positive")
        if np.any(damping < 0) or np.any(stiffness < 0):
            raise ValueError("damping and stiffness entries must be non-negative")
        object.__setattr__(self, "inertia", readonly(inertia))
        object.__setattr__(self, "damping", readonly(damping))
        object.__setattr__(self, "stiffness", readonly(stiffness))

    @property
    def dims(self) -> int:
        return self.inertia.size

    @classmethod
    def critically_damped(
        cls,
        dims: int,
        stiffness: float = DEFAULT_STIFFNESS,
        inertia: float = DEFAULT_INERTIA,
        damping_ratio: float = 1.0,
    ) -> "Gains":
        """Uniform per-axis gains with damping = ratio * 2*sqrt(K*M)."""
        d = damping_ratio * 2.0 * math.sqrt(stiffness * inertia)
        return cls(
            inertia=np.full(dims, inertia),
            damping=np.full(dims, d),
            stiffness=np.full(dims, stiffness),
        )


@dataclass(frozen=True)
class ControllerState:
    """Commanded position and velocity tracked by the (ideal) inner loop."""

    position: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        pos = check_vector(self.position, name="position")
        vel = check_vector(self.velocity, dims=pos.size, name="velocity")
        object.__setattr__(self, "position", readonly(pos))
        object.__setattr__(self, "velocity", readonly(vel))

    @classmethod
    def at_rest(cls, position) -> "ControllerState":
        pos = np.asarray(position, dtype=float)
        return cls(position=pos, velocity=np.zeros_like(pos))


@dataclass(frozen=True)
class TrackingError:
    """Position and velocity error of the commanded state w.r.t. the reference."""

    position_error: np.ndarray
    velocity_error: np.ndarray


def tracking_error(state: ControllerState, ref: ReferenceSample) -> TrackingError:
    return TrackingError(
        position_error=ref.position - state.position,
        velocity_error=ref.velocity - state.velocity,
    )


def admittance_accel(
    state: ControllerState,
    ref: ReferenceSample,
    external_force: np.ndarray,
    gains: Gains,
) -> np.ndarray:
    """Commanded Cartesian acceleration of the admittance law.

    Affine in the position error, velocity error, external force and
    reference acceleration; a zero-error, zero-force query at zero reference
    acceleration returns zero (equilibrium).
    """
    ep = ref.position - state.position
    ev = ref.velocity - state.velocity
    return ref.acceleration + (
        gains.damping * ev + gains.stiffness * ep + external_force
    ) / gains.inertia


def step(
    state: ControllerState,
    ref: ReferenceSample,
    external_force: np.ndarray,
    gains: Gains,
    dt: float,
    method: str = "semi_implicit",
) -> ControllerState:
    """Advance the commanded state by one control period.

    The default integrator is semi-implicit Euler (velocity first, then
    position with the new velocity), which keeps the energy of undamped
    oscillatory gains bounded. "rk4" is available for convergence studies;
    it holds the reference and force constant over the step.
    """
    if not 0.0 < dt <= MAX_DT:
        raise ValueError(f"dt must lie in (0, {MAX_DT}] s, got {dt}")
    if method == "semi_implicit":
        a = admittance_accel(state, ref, external_force, gains)
        v = state.velocity + a * dt
        x = state.position + v * dt
        return ControllerState(position=x, velocity=v)
    if method == "rk4":
        return _step_rk4(state, ref, external_force, gains, dt)
    raise ValueError(f"unknown integrator {method!r}")


def _step_rk4(state, ref, external_force, gains, dt):
    def accel(x, v):
        ep = ref.position - x
        ev = ref.velocity - v
        return ref.acceleration + (
            gains.damping * ev + gains.stiffness * ep + external_force
        ) / gains.inertia

    x0, v0 = state.position, state.velocity
    k1x, k1v = v0, accel(x0, v0)
    k2x, k2v = v0 + 0.5 * dt * k1v, accel(x0 + 0.5 * dt * k1x, v0 + 0.5 * dt * k1v)
    k3x, k3v = v0 + 0.5 * dt * k2v, accel(x0 + 0.5 * dt * k2x, v0 + 0.5 * dt * k2v)
    k4x, k4v = v0 + dt * k3v, accel(x0 + dt * k3x, v0 + dt * k3v)
    x = x0 + dt / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
    v = v0 + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
    return ControllerState(position=x, velocity=v)


def steady_state_lag(gains: Gains, ref_velocity, velocity_feedforward: bool) -> np.ndarray:
    """Analytical tracking error when following a constant-velocity reference.

    Without velocity feedforward the damping term drags against the motion
    and the error settles at inv(stiffness) @ damping @ v; with feedforward
    the lag is exactly zero. Serves as the oracle for simulated ramp runs.
    """
    v = check_vector(ref_velocity, dims=gains.dims, name="ref_velocity")
    if np.any(gains.stiffness <= 0):
        raise ValueError("steady-state lag requires strictly positive stiffness")
    if velocity_feedforward:
        return np.zeros(gains.dims)
    return gains.damping * v / gains.stiffness
