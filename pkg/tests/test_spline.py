"""Spline engine tests: basis recursion, derivatives, evaluation, fitting."""

import numpy as np
import pytest

from admitlab import spline as sp
from admitlab.errors import DomainError, SingularFitError
from admitlab.spline import (
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


def cubic_trajectory(n_ctrl=8, t_end=2.0, dims=2, seed=0):
    knots = make_clamped_uniform_knots(n_ctrl, 3, 0.0, t_end)
    ctrl = np.random.default_rng(seed).normal(size=(n_ctrl, dims))
    return BSplineTrajectory(degree=3, knots=knots, control_points=ctrl)


class TestKnots:
    def test_no_interior_knots(self):
        np.testing.assert_allclose(
            make_clamped_uniform_knots(4, 3, 0.0, 1.0), [0, 0, 0, 0, 1, 1, 1, 1]
        )

    def test_single_interior_knot_at_midpoint(self):
        np.testing.assert_allclose(
            make_clamped_uniform_knots(5, 3, 0.0, 1.0), [0, 0, 0, 0, 0.5, 1, 1, 1, 1]
        )

    def test_uniform_interior_spacing(self):
        np.testing.assert_allclose(
            make_clamped_uniform_knots(6, 3, 0.0, 3.0), [0, 0, 0, 0, 1, 2, 3, 3, 3, 3]
        )

    def test_too_few_control_points(self):
        with pytest.raises(ValueError, match="degree"):
            make_clamped_uniform_knots(3, 3, 0.0, 1.0)

    def test_bad_interval(self):
        with pytest.raises(ValueError, match="t_end"):
            make_clamped_uniform_knots(5, 3, 1.0, 1.0)


class TestBasis:
    def test_degree_zero_half_open(self):
        knots = np.arange(5.0)
        assert basis(1, 0, 1.0, knots) == 1.0
        assert basis(1, 0, 1.7, knots) == 1.0
        assert basis(1, 0, 2.0, knots) == 0.0
        assert basis(1, 0, 0.9, knots) == 0.0

    def test_uniform_cubic_values_at_knot(self):
        # Computed independently with a reference spline library.
        knots = np.arange(8.0)
        values = [basis(i, 3, 3.0, knots) for i in range(4)]
        np.testing.assert_allclose(values, [1 / 6, 2 / 3, 1 / 6, 0.0], atol=1e-15)

    def test_partition_of_unity_at_grid(self):
        knots = make_clamped_uniform_knots(9, 3, 0.0, 2.0)
        for t in np.linspace(0.0, 2.0, 1000):
            total = sum(basis(i, 3, float(t), knots) for i in range(9))
            assert abs(total - 1.0) < 1e-12

    def test_right_endpoint_is_one(self):
        knots = make_clamped_uniform_knots(5, 3, 0.0, 1.0)
        assert basis(4, 3, 1.0, knots) == pytest.approx(1.0, abs=1e-15)

    def test_index_out_of_range(self):
        knots = make_clamped_uniform_knots(4, 3, 0.0, 1.0)
        with pytest.raises(IndexError):
            basis(5, 3, 0.5, knots)


class TestBasisDerivative:
    def test_derivative_sum_is_zero(self):
        knots = make_clamped_uniform_knots(9, 3, 0.0, 2.0)
        for t in np.linspace(0.0, 2.0, 50):
            total = sum(basis_derivative(i, 3, float(t), knots, 1) for i in range(9))
            assert abs(total) < 1e-10

    def test_first_derivative_matches_finite_difference(self):
        knots = make_clamped_uniform_knots(9, 3, 0.0, 2.0)
        rng = np.random.default_rng(3)
        h = 1e-5
        checked = 0
        while checked < 100:
            t = float(rng.uniform(0.05, 1.95))
            if np.min(np.abs(knots - t)) < 3 * h:
                continue
            i = int(rng.integers(0, 9))
            analytic = basis_derivative(i, 3, t, knots, 1)
            fd = (basis(i, 3, t + h, knots) - basis(i, 3, t - h, knots)) / (2 * h)
            assert abs(analytic - fd) <= 1e-6 * max(abs(analytic), 0.1)
            checked += 1

    def test_second_derivative_matches_finite_difference(self):
        knots = make_clamped_uniform_knots(9, 3, 0.0, 2.0)
        rng = np.random.default_rng(4)
        h = 1e-4
        checked = 0
        while checked < 100:
            t = float(rng.uniform(0.05, 1.95))
            if np.min(np.abs(knots - t)) < 3 * h:
                continue
            i = int(rng.integers(0, 9))
            analytic = basis_derivative(i, 3, t, knots, 2)
            fd = (
                basis_derivative(i, 3, t + h, knots, 1)
                - basis_derivative(i, 3, t - h, knots, 1)
            ) / (2 * h)
            assert abs(analytic - fd) <= 1e-4 * max(abs(analytic), 0.1)
            checked += 1

    def test_second_derivative_piecewise_linear(self):
        # Three-point collinearity of the cubic's second derivative per span.
        knots = make_clamped_uniform_knots(8, 3, 0.0, 2.0)
        spans = np.unique(knots)
        for lo, hi in zip(spans[:-1], spans[1:]):
            ts = lo + (hi - lo) * np.array([0.2, 0.5, 0.8])
            for i in range(8):
                v = [basis_derivative(i, 3, float(t), knots, 2) for t in ts]
                assert abs((v[1] - v[0]) - (v[2] - v[1])) < 1e-9

    def test_order_validation(self):
        knots = make_clamped_uniform_knots(4, 3, 0.0, 1.0)
        with pytest.raises(ValueError):
            basis_derivative(0, 3, 0.5, knots, 3)
        with pytest.raises(ValueError):
            basis_derivative(0, 1, 0.5, np.array([0.0, 0.0, 1.0, 1.0]), 2)


class TestEvaluate:
    def test_constant_curve(self):
        knots = make_clamped_uniform_knots(6, 3, 0.0, 1.0)
        ctrl = np.full((6, 2), 0.7)
        traj = BSplineTrajectory(degree=3, knots=knots, control_points=ctrl)
        for t in np.linspace(0, 1, 17):
            np.testing.assert_allclose(evaluate(traj, float(t), 0), [0.7, 0.7], atol=1e-14)
            np.testing.assert_allclose(evaluate(traj, float(t), 1), 0.0, atol=1e-12)
            np.testing.assert_allclose(evaluate(traj, float(t), 2), 0.0, atol=1e-11)

    def test_clamped_endpoint_interpolation(self):
        traj = cubic_trajectory()
        np.testing.assert_allclose(evaluate(traj, 0.0, 0), traj.control_points[0], atol=1e-14)
        np.testing.assert_allclose(evaluate(traj, 2.0, 0), traj.control_points[-1], atol=1e-14)

    def test_straight_line_constant_velocity(self):
        # Control points spaced by the Greville abscissae trace a straight
        # line at constant speed; validated against finite differences.
        knots = make_clamped_uniform_knots(7, 3, 0.0, 2.0)
        greville = np.array([knots[i + 1 : i + 4].mean() for i in range(7)])
        direction = np.array([0.3, -0.1])
        ctrl = greville[:, None] * direction
        traj = BSplineTrajectory(degree=3, knots=knots, control_points=ctrl)
        h = 1e-6
        for t in np.linspace(0.1, 1.9, 11):
            vel = evaluate(traj, float(t), 1)
            np.testing.assert_allclose(vel, direction, rtol=1e-9)
            fd = (evaluate(traj, float(t + h), 0) - evaluate(traj, float(t - h), 0)) / (2 * h)
            np.testing.assert_allclose(vel, fd, rtol=1e-6)

    def test_domain_violation(self):
        traj = cubic_trajectory()
        with pytest.raises(DomainError):
            evaluate(traj, -0.01, 0)
        with pytest.raises(DomainError):
            evaluate(traj, 2.01, 0)

    def test_c2_continuity_at_interior_knots(self):
        traj = cubic_trajectory(n_ctrl=9)
        for knot in traj.interior_knots():
            t = float(knot)
            span_right = sp.find_span(traj.knots, 3, t)
            span_left = span_right - 1
            for order in (0, 1, 2):
                right = sp._local_basis(traj.knots, 3, span_right, t, order) @ (
                    traj.control_points[span_right - 3 : span_right + 1]
                )
                left = sp._local_basis(traj.knots, 3, span_left, t, order) @ (
                    traj.control_points[span_left - 3 : span_left + 1]
                )
                np.testing.assert_allclose(left, right, atol=1e-9)

    def test_local_support(self):
        # Perturbing one control point changes the curve only on its support.
        traj = cubic_trajectory(n_ctrl=10, t_end=2.0, dims=1, seed=5)
        i = 4
        bumped = traj.control_points.copy()
        bumped[i, 0] += 1.0
        traj2 = BSplineTrajectory(degree=3, knots=traj.knots, control_points=bumped)
        support = (traj.knots[i], traj.knots[i + 4])
        for t in np.linspace(0.0, 2.0, 400):
            a = evaluate(traj, float(t), 0)
            b = evaluate(traj2, float(t), 0)
            inside = support[0] < t < support[1]
            if not inside:
                assert a[0] == b[0]

    def test_partition_of_unity_fine_grid(self):
        traj = cubic_trajectory(n_ctrl=9, dims=1)
        ones = BSplineTrajectory(
            degree=3, knots=traj.knots, control_points=np.ones((9, 1))
        )
        values = evaluate_many(ones, np.linspace(0.0, 2.0, 1000), 0)
        assert np.max(np.abs(values - 1.0)) < 1e-12


class TestFit:
    def test_round_trip_recovers_control_points(self):
        traj = cubic_trajectory(n_ctrl=8, dims=2, seed=1)
        ts = np.linspace(0.0, 2.0, 40)
        pos = evaluate_many(traj, ts, 0)
        fitted, rms = fit_least_squares(ts, pos, 8)
        np.testing.assert_allclose(fitted.control_points, traj.control_points, atol=1e-9)
        assert rms < 1e-9

    def test_constant_samples_give_constant_control_points(self):
        ts = np.linspace(0.0, 1.0, 20)
        pos = np.full((20, 2), 3.5)
        fitted, rms = fit_least_squares(ts, pos, 5)
        np.testing.assert_allclose(fitted.control_points, 3.5, atol=1e-12)
        assert rms < 1e-12

    def test_single_span_reproduces_cubic(self):
        ts = np.linspace(0.0, 1.0, 25)
        pos = (2.0 * ts**3 - 1.5 * ts**2 + 0.25 * ts + 0.1)[:, None]
        _, rms = fit_least_squares(ts, pos, 4)
        assert rms < 1e-10

    def test_rank_deficient_span_is_an_error(self):
        # All samples in the first half leave later knot spans empty.
        ts = np.linspace(0.0, 0.4, 30)
        ts = np.concatenate([ts, [2.0]])
        pos = np.sin(ts)[:, None]
        with pytest.raises(SingularFitError, match="rank-deficient"):
            fit_least_squares(ts, pos, 12)

    def test_preconditions(self):
        ts = np.linspace(0.0, 1.0, 5)
        pos = np.zeros((5, 1))
        with pytest.raises(ValueError, match="n_ctrl"):
            fit_least_squares(ts, pos, 3)
        with pytest.raises(ValueError, match="samples"):
            fit_least_squares(ts, pos, 6)

    def test_chunked_windowed_and_global(self):
        ts = np.linspace(0.0, 4.0, 400)
        pos = np.stack([np.sin(ts), np.cos(0.5 * ts)], axis=1)
        for mode in ("windowed", "global-cut"):
            chunks = fit_chunked(ts, pos, chunk_duration=1.0, mode=mode)
            assert len(chunks) == 4
            for traj, rms in chunks:
                assert rms < 1e-3


class TestEstimator:
    def test_fit_predict(self):
        ts = np.linspace(0.0, 2.0, 60)
        pos = np.stack([np.sin(ts), ts**2], axis=1)
        est = SplineTrajectoryFitter(n_ctrl=10)
        est.fit(ts, pos)
        pred = est.predict(ts)
        assert est.residual_rms_ < 1e-3
        np.testing.assert_allclose(pred, pos, atol=5e-3)

    def test_auto_control_point_density(self):
        ts = np.linspace(0.0, 2.0, 64)
        est = SplineTrajectoryFitter().fit(ts, np.sin(ts))
        assert est.trajectory_.n_ctrl == 16

    def test_get_params_round_trip(self):
        est = SplineTrajectoryFitter(n_ctrl=7, samples_per_ctrl=3)
        params = est.get_params()
        assert params == {"n_ctrl": 7, "degree": 3, "samples_per_ctrl": 3}
        clone = SplineTrajectoryFitter(**params)
        assert clone.get_params() == params

    def test_predict_before_fit(self):
        with pytest.raises(RuntimeError, match="fit"):
            SplineTrajectoryFitter().predict([0.0])

    def test_column_vector_times(self):
        ts = np.linspace(0.0, 1.0, 30)
        est = SplineTrajectoryFitter(n_ctrl=6).fit(ts[:, None], np.cos(ts))
        pred = est.predict(np.array([[0.5]]), order=1)
        assert pred.shape == (1, 1)
        assert pred[0, 0] == pytest.approx(-np.sin(0.5), abs=1e-3)


class TestAgainstReferenceImplementation:
    @pytest.mark.parametrize("seed", range(8))
    def test_evaluation_matches_scipy(self, seed):
        from scipy.interpolate import BSpline as SciPySpline

        rng = np.random.default_rng(seed)
        n_ctrl = int(rng.integers(4, 12))
        t0 = float(rng.uniform(-2.0, 2.0))
        t1 = t0 + float(rng.uniform(0.5, 4.0))
        knots = make_clamped_uniform_knots(n_ctrl, 3, t0, t1)
        ctrl = rng.normal(size=(n_ctrl, 1))
        traj = BSplineTrajectory(degree=3, knots=knots, control_points=ctrl)
        reference = SciPySpline(knots, ctrl[:, 0], 3, extrapolate=False)
        ts = rng.uniform(t0, t1, size=60)
        for order, tol in ((0, 1e-12), (1, 1e-10), (2, 1e-8)):
            ours = evaluate_many(traj, ts, order)[:, 0]
            theirs = reference.derivative(order)(ts) if order else reference(ts)
            np.testing.assert_allclose(ours, theirs, atol=tol)


class TestTrajectoryValidation:
    def test_knot_count_mismatch(self):
        with pytest.raises(ValueError, match="knots"):
            BSplineTrajectory(
                degree=3,
                knots=np.linspace(0, 1, 9),
                control_points=np.zeros((4, 2)),
            )

    def test_decreasing_knots(self):
        knots = np.array([0, 0, 0, 0, 0.7, 0.3, 1, 1, 1, 1], dtype=float)
        with pytest.raises(ValueError, match="non-decreasing"):
            BSplineTrajectory(degree=3, knots=knots, control_points=np.zeros((6, 1)))

    def test_immutable_arrays(self):
        traj = cubic_trajectory()
        with pytest.raises(ValueError):
            traj.control_points[0, 0] = 99.0
