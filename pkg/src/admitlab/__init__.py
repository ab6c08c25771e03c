"""admitlab: compliant-control trajectory representations on a desk-scale simulator.

Cubic B-spline trajectory engine, admittance control with velocity
feedforward, three reference-generation modes for low-frequency action
chunks, a deterministic planar contact simulator, and completion-time
statistics.
"""

from .control import ControllerState, Gains, admittance_accel, steady_state_lag, step
from .errors import (
    ConfigError,
    DatasetFormatError,
    DatasetVersionError,
    DomainError,
    EpisodeDivergedError,
    LogParseError,
    SingularFitError,
)
from .reference import (
    ActionChunk,
    BlendedReference,
    FdChunkReference,
    ReferenceMode,
    ReferenceSample,
    SplineReference,
    ZohChunkReference,
    blend_chunks,
    fd_reference,
    lowpass_differentiate,
    spline_reference,
    zoh_reference,
)
from .sim import (
    ConstantForce,
    EpisodeConfig,
    EpisodeTrace,
    FreeSpace,
    PegInHole,
    Plan,
    contact_force,
    make_transfer_plan,
    run_episode,
)
from .spline import (
    BSplineTrajectory,
    SplineTrajectoryFitter,
    basis,
    basis_derivative,
    evaluate,
    evaluate_many,
    fit_chunked,
    fit_least_squares,
    make_clamped_uniform_knots,
)
from .stats import (
    SampleSummary,
    TestResult,
    cumulative_success_curve,
    pooled_t_test,
    regularized_incomplete_beta,
    rms_tracking_error,
    student_t_cdf,
    summarize,
    welch_t_test,
)

__version__ = "0.1.0"

__all__ = [
    "ActionChunk",
    "BSplineTrajectory",
    "BlendedReference",
    "ConfigError",
    "ConstantForce",
    "ControllerState",
    "DatasetFormatError",
    "DatasetVersionError",
    "DomainError",
    "EpisodeConfig",
    "EpisodeDivergedError",
    "EpisodeTrace",
    "FdChunkReference",
    "FreeSpace",
    "Gains",
    "LogParseError",
    "PegInHole",
    "Plan",
    "ReferenceMode",
    "ReferenceSample",
    "SampleSummary",
    "SingularFitError",
    "SplineReference",
    "SplineTrajectoryFitter",
    "TestResult",
    "ZohChunkReference",
    "admittance_accel",
    "basis",
    "basis_derivative",
    "blend_chunks",
    "contact_force",
    "cumulative_success_curve",
    "evaluate",
    "evaluate_many",
    "fd_reference",
    "fit_chunked",
    "fit_least_squares",
    "lowpass_differentiate",
    "make_clamped_uniform_knots",
    "make_transfer_plan",
    "pooled_t_test",
    "regularized_incomplete_beta",
    "rms_tracking_error",
    "run_episode",
    "spline_reference",
    "steady_state_lag",
    "step",
    "student_t_cdf",
    "summarize",
    "welch_t_test",
    "zoh_reference",
]
