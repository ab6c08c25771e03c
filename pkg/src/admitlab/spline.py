"""Cubic B-spline trajectories.

Construction of clamped uniform knot vectors, Cox-de Boor basis evaluation
with analytical first and second derivatives, curve evaluation with local
support, and least-squares extraction of control points from sampled
trajectories. All trajectory objects are immutable; evaluation and fitting
are pure functions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .errors import DomainError, SingularFitError
from .validation import as_float_array, check_positions, check_times, readonly

DEFAULT_DEGREE = 3

# Rank-deficiency threshold for the least-squares system: reject when
# s_min / s_max falls below this (an empty knot span produces exact zeros).
RANK_RTOL = 1e-10


def make_clamped_uniform_knots(
    n_ctrl: int, degree: int, t_start: float, t_end: float
) -> np.ndarray:
    """Clamped knot vector with uniformly spaced interior knots.

    The first and last knots repeat degree+1 times so the curve interpolates
    its end control points; total length is n_ctrl + degree + 1.
    """
    if degree < 1:
        raise ValueError("degree must be at least 1")
    if n_ctrl < degree + 1:
        raise ValueError(f"need at least degree+1={degree + 1} control points, got {n_ctrl}")
    if not t_end > t_start:
        raise ValueError(f"t_end ({t_end}) must be greater than t_start ({t_start})")
    # n_ctrl - degree + 1 breakpoints from t_start to t_end, ends repeated.
    breaks = np.linspace(t_start, t_end, n_ctrl - degree + 1)
    return np.concatenate([np.full(degree, t_start), breaks, np.full(degree, t_end)])


def _degree_zero(i: int, t: float, knots: np.ndarray) -> float:
    # Half-open [t_i, t_{i+1}), extended so that at the very last knot the
    # final non-empty span is treated as closed (clamped right endpoint).
    if knots[i] <= t < knots[i + 1]:
        return 1.0
    if t == knots[-1] and knots[i] < t <= knots[i + 1]:
        return 1.0
    return 0.0


def basis(i: int, k: int, t: float, knots) -> float:
    """Value of the B-spline basis function of index i and degree k at t.

    Uses the Cox-de Boor recursion with the 0/0 := 0 convention required by
    repeated (clamped) knots.
    """
    knots = np.asarray(knots, dtype=float)
    if i < 0 or i + k + 1 >= len(knots):
        raise IndexError(f"basis index {i} out of range for degree {k} with {len(knots)} knots")
    if k == 0:
        return _degree_zero(i, t, knots)
    out = 0.0
    left_den = knots[i + k] - knots[i]
    if left_den > 0.0:
        out += (t - knots[i]) / left_den * basis(i, k - 1, t, knots)
    right_den = knots[i + k + 1] - knots[i + 1]
    if right_den > 0.0:
        out += (knots[i + k + 1] - t) / right_den * basis(i + 1, k - 1, t, knots)
    return out


def basis_derivative(i: int, k: int, t: float, knots, order: int = 1) -> float:
    """First or second derivative of the basis function of index i, degree k.

    The derivative of a degree-k basis function is a knot-span-scaled
    combination of two degree-(k-1) basis functions; second derivatives apply
    the same recurrence twice. Shares the 0/0 := 0 convention with ``basis``.
    """
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order}")
    if order > k:
        raise ValueError(f"cannot take derivative of order {order} of a degree-{k} basis")
    knots = np.asarray(knots, dtype=float)
    if i < 0 or i + k + 1 >= len(knots):
        raise IndexError(f"basis index {i} out of range for degree {k} with {len(knots)} knots")

    def lower(j: int) -> float:
        if order == 1:
            return basis(j, k - 1, t, knots)
        return basis_derivative(j, k - 1, t, knots, order - 1)

    out = 0.0
    left_den = knots[i + k] - knots[i]
    if left_den > 0.0:
        out += k / left_den * lower(i)
    right_den = knots[i + k + 1] - knots[i + 1]
    if right_den > 0.0:
        out -= k / right_den * lower(i + 1)
    return out


def find_span(knots: np.ndarray, degree: int, t: float) -> int:
    """Index of the knot span containing t, restricted to the valid domain.

    Valid spans are degree..n where n is the last control-point index; the
    right domain endpoint maps to span n so clamped curves evaluate on a
    closed interval.
    """
    n = len(knots) - degree - 2
    span = int(np.searchsorted(knots, t, side="right")) - 1
    return min(max(span, degree), n)


def _basis_rows(knots: np.ndarray, degree: int, span: int, t: float) -> list[np.ndarray]:
    """Nonzero basis values at t for every degree 0..degree.

    rows[d][r] = B_{span-d+r, d}(t). The triangular scheme touches only the
    degree+1 locally supported functions and never divides by an empty span.
    """
    rows = [np.ones(1)]
    left = np.empty(degree)
    right = np.empty(degree)
    for d in range(1, degree + 1):
        left[d - 1] = t - knots[span + 1 - d]
        right[d - 1] = knots[span + d] - t
        prev = rows[-1]
        cur = np.empty(d + 1)
        saved = 0.0
        for r in range(d):
            tmp = prev[r] / (right[r] + left[d - 1 - r])
            cur[r] = saved + right[r] * tmp
            saved = left[d - 1 - r] * tmp
        cur[d] = saved
        rows.append(cur)
    return rows


def _derivative_row(values: np.ndarray, knots: np.ndarray, span: int, d: int) -> np.ndarray:
    """Apply the derivative recurrence once.

    ``values`` holds the d nonzero degree-(d-1) quantities (basis values or
    their derivatives) with indices span-d+1..span; the result holds the d+1
    degree-d derivatives with indices span-d..span. Empty spans contribute 0.
    """
    out = np.zeros(d + 1)
    for r in range(d + 1):
        i = span - d + r
        den_l = knots[i + d] - knots[i]
        if den_l > 0.0 and r >= 1:
            out[r] += d / den_l * values[r - 1]
        den_r = knots[i + d + 1] - knots[i + 1]
        if den_r > 0.0 and r <= d - 1:
            out[r] -= d / den_r * values[r]
    return out


def _local_basis(knots: np.ndarray, degree: int, span: int, t: float, order: int) -> np.ndarray:
    """Nonzero values of the order-th basis derivative at t (order 0, 1 or 2)."""
    rows = _basis_rows(knots, degree, span, t)
    if order == 0:
        return rows[degree]
    if order == 1:
        return _derivative_row(rows[degree - 1], knots, span, degree)
    d1_lower = _derivative_row(rows[degree - 2], knots, span, degree - 1)
    return _derivative_row(d1_lower, knots, span, degree)


@dataclass(frozen=True)
class BSplineTrajectory:
    """A d-dimensional B-spline curve over time.

    ``knots`` is non-decreasing with length n_ctrl + degree + 1 and
    ``control_points`` has shape (n_ctrl, dims). The evaluation domain is the
    closed interval [knots[degree], knots[n_ctrl]].
    """

    degree: int
    knots: np.ndarray
    control_points: np.ndarray

    def __post_init__(self):
        knots = as_float_array(self.knots, "knots")
        ctrl = check_positions(self.control_points, name="control_points")
        if self.degree < 1:
            raise ValueError("degree must be at least 1")
        if np.any(np.diff(knots) < 0):
            raise ValueError("knot sequence must be non-decreasing")
        if len(knots) != len(ctrl) + self.degree + 1:
            raise ValueError(
                f"expected {len(ctrl) + self.degree + 1} knots for {len(ctrl)} "
                f"control points of degree {self.degree}, got {len(knots)}"
            )
        if not knots[self.degree] < knots[len(ctrl)]:
            raise ValueError("evaluation domain is empty")
        object.__setattr__(self, "knots", readonly(knots))
        object.__setattr__(self, "control_points", readonly(ctrl))

    @property
    def dims(self) -> int:
        return self.control_points.shape[1]

    @property
    def n_ctrl(self) -> int:
        return self.control_points.shape[0]

    @property
    def t_start(self) -> float:
        return float(self.knots[self.degree])

    @property
    def t_end(self) -> float:
        return float(self.knots[self.n_ctrl])

    def interior_knots(self) -> np.ndarray:
        return self.knots[self.degree + 1 : self.n_ctrl]


def evaluate(traj: BSplineTrajectory, t: float, order: int = 0) -> np.ndarray:
    """Position (order 0), velocity (order 1) or acceleration (order 2) at t.

    Only the degree+1 locally supported control points are touched. Raises
    DomainError outside the closed evaluation domain.
    """
    if order not in (0, 1, 2):
        raise ValueError(f"order must be 0, 1 or 2, got {order}")
    if not traj.t_start <= t <= traj.t_end:
        raise DomainError(
            f"t={t} outside evaluation domain [{traj.t_start}, {traj.t_end}]"
        )
    span = find_span(traj.knots, traj.degree, t)
    values = _local_basis(traj.knots, traj.degree, span, t, order)
    ctrl = traj.control_points[span - traj.degree : span + 1]
    return values @ ctrl


def evaluate_many(traj: BSplineTrajectory, times, order: int = 0) -> np.ndarray:
    """Evaluate at an array of times; returns a (len(times), dims) matrix."""
    ts = np.atleast_1d(np.asarray(times, dtype=float))
    out = np.empty((ts.size, traj.dims))
    for j, t in enumerate(ts):
        out[j] = evaluate(traj, float(t), order)
    return out


def design_matrix(knots: np.ndarray, degree: int, times: np.ndarray) -> np.ndarray:
    """Dense collocation matrix A with A[j, i] = B_{i,degree}(times[j])."""
    n_ctrl = len(knots) - degree - 1
    A = np.zeros((len(times), n_ctrl))
    for j, t in enumerate(times):
        span = find_span(knots, degree, float(t))
        A[j, span - degree : span + 1] = _local_basis(knots, degree, span, float(t), 0)
    return A


def fit_least_squares(
    times,
    positions,
    n_ctrl: int,
    degree: int = DEFAULT_DEGREE,
    rank_rtol: float = RANK_RTOL,
) -> tuple[BSplineTrajectory, float]:
    """Least-squares control-point extraction from sampled positions.

    Builds a clamped uniform knot vector over [times[0], times[-1]] and solves
    min_P sum_j ||x_j - sum_i B_i(t_j) P_i||^2 per axis via one shared SVD.
    Returns the fitted trajectory and the fit residual RMS
    sqrt(mean_j ||x_j - x(t_j)||^2).

    Raises SingularFitError when the collocation matrix is rank deficient
    (s_min/s_max < rank_rtol), which happens when a knot span contains no
    samples; a silent garbage solution is never returned.
    """
    t = check_times(times)
    pos = check_positions(positions, n_times=t.size)
    if n_ctrl < degree + 1:
        raise ValueError(f"need n_ctrl >= degree+1={degree + 1}, got {n_ctrl}")
    if t.size < n_ctrl:
        raise ValueError(f"need at least n_ctrl={n_ctrl} samples, got {t.size}")
    knots = make_clamped_uniform_knots(n_ctrl, degree, float(t[0]), float(t[-1]))
    A = design_matrix(knots, degree, t)
    u, s, vt = np.linalg.svd(A, full_matrices=False)
    if s[-1] < rank_rtol * s[0]:
        raise SingularFitError(
            f"rank-deficient fit: singular value ratio {s[-1] / s[0]:.3e} < {rank_rtol:.0e} "
            f"(n_ctrl={n_ctrl}, {t.size} samples; check for knot spans without samples)"
        )
    ctrl = vt.T @ ((u.T @ pos) / s[:, None])
    residual = A @ ctrl - pos
    residual_rms = float(np.sqrt(np.mean(np.sum(residual**2, axis=1))))
    return BSplineTrajectory(degree=degree, knots=knots, control_points=ctrl), residual_rms


def fit_chunked(
    times,
    positions,
    chunk_duration: float,
    degree: int = DEFAULT_DEGREE,
    samples_per_ctrl: int = 4,
    mode: str = "global-cut",
) -> list[tuple[BSplineTrajectory, float]]:
    """Split a recording into fixed-duration chunks of spline control points.

    mode="windowed" fits each chunk's raw samples independently.
    mode="global-cut" (default) first fits one spline over the whole
    recording, then refits each chunk window to dense samples of that global
    curve, so chunk boundaries inherit the global fit's smoothness.
    """
    if mode not in ("windowed", "global-cut"):
        raise ValueError(f"unknown chunking mode {mode!r}")
    if chunk_duration <= 0:
        raise ValueError("chunk_duration must be positive")
    if samples_per_ctrl < 1:
        raise ValueError("samples_per_ctrl must be at least 1")
    t = check_times(times)
    pos = check_positions(positions, n_times=t.size)

    source_t, source_pos = t, pos
    if mode == "global-cut":
        n_global = max(degree + 1, t.size // samples_per_ctrl)
        global_traj, _ = fit_least_squares(t, pos, n_global, degree)
        source_t = np.linspace(float(t[0]), float(t[-1]), max(t.size, 2))
        source_pos = evaluate_many(global_traj, source_t, 0)

    chunks: list[tuple[BSplineTrajectory, float]] = []
    t0, t_last = float(t[0]), float(t[-1])
    n_chunks = max(1, int(np.ceil((t_last - t0) / chunk_duration - 1e-9)))
    for c in range(n_chunks):
        lo = t0 + c * chunk_duration
        hi = min(t0 + (c + 1) * chunk_duration, t_last)
        mask = (source_t >= lo - 1e-12) & (source_t <= hi + 1e-12)
        wt, wp = source_t[mask], source_pos[mask]
        n_ctrl = max(degree + 1, wt.size // samples_per_ctrl)
        if wt.size < n_ctrl:
            raise SingularFitError(
                f"chunk {c} covering [{lo:.3f}, {hi:.3f}] s has only {wt.size} samples"
            )
        try:
            chunks.append(fit_least_squares(wt, wp, n_ctrl, degree))
        except SingularFitError as exc:
            raise SingularFitError(f"chunk {c}: {exc}") from exc
    return chunks


class SplineTrajectoryFitter(BaseEstimator):
    """Estimator wrapper around the least-squares spline fit.

    Follows the fit/predict convention: X is sample times with shape (n,) or
    (n, 1), y is positions with shape (n,) or (n, d). After fitting, the
    curve and its derivatives are queried through ``predict``.

    Parameters
    ----------
    n_ctrl : int or "auto"
        Number of control points; "auto" uses one per ``samples_per_ctrl``
        input samples (at least degree+1).
    degree : int
        Spline degree, cubic by default.
    samples_per_ctrl : int
        Density used when n_ctrl="auto".
    """

    def __init__(self, n_ctrl="auto", degree: int = DEFAULT_DEGREE, samples_per_ctrl: int = 4):
        self.n_ctrl = n_ctrl
        self.degree = degree
        self.samples_per_ctrl = samples_per_ctrl

    def _times(self, X) -> np.ndarray:
        arr = as_float_array(X, "X")
        if arr.ndim == 2 and arr.shape[1] == 1:
            arr = arr[:, 0]
        if arr.ndim != 1:
            raise ValueError(f"X must be sample times of shape (n,) or (n, 1), got {arr.shape}")
        return arr

    def fit(self, X, y):
        t = check_times(self._times(X), "X")
        pos = check_positions(y, n_times=t.size, name="y")
        if self.n_ctrl == "auto":
            n_ctrl = max(self.degree + 1, t.size // self.samples_per_ctrl)
        else:
            n_ctrl = int(self.n_ctrl)
        self.trajectory_, self.residual_rms_ = fit_least_squares(t, pos, n_ctrl, self.degree)
        self.n_features_in_ = 1
        return self

    def predict(self, X, order: int = 0) -> np.ndarray:
        if not hasattr(self, "trajectory_"):
            raise RuntimeError("fit must be called before predict")
        return evaluate_many(self.trajectory_, self._times(X), order)
