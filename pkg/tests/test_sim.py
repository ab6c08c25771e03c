"""Simulator tests: plans, penalty contact, episode runner, cross-rate invariants."""

import numpy as np
import pytest

from admitlab.control import Gains
from admitlab.errors import ConfigError, EpisodeDivergedError
from admitlab.reference import ReferenceMode
from admitlab.sim import (
    ConstantForce,
    EpisodeConfig,
    FreeSpace,
    MinimumJerkSegment,
    PegInHole,
    Plan,
    contact_force,
    make_transfer_plan,
    minimum_jerk_duration,
    run_episode,
)
from admitlab.stats import rms_tracking_error

FD = ReferenceMode.FINITE_DIFFERENCE
ZOH = ReferenceMode.POSITION_ONLY
SPL = ReferenceMode.SPLINE


def insertion_plan(offset=0.0, v_transfer=0.5, v_descend=0.15, dwell=0.3, depth=0.03):
    start = np.array([-0.25, 0.12])
    hover = np.array([offset, 0.03])
    target = np.array([offset, -depth])
    t1 = minimum_jerk_duration(float(np.linalg.norm(hover - start)), v_transfer)
    t2 = minimum_jerk_duration(float(np.linalg.norm(target - hover)), v_descend)
    return Plan(
        segments=(
            MinimumJerkSegment(start=start, goal=hover, t0=0.0, duration=t1),
            MinimumJerkSegment(start=hover, goal=target, t0=t1 + dwell, duration=t2),
        )
    )


class TestMinimumJerk:
    def test_degenerate_point_plan(self):
        plan = make_transfer_plan([0.2, 0.1], [0.2, 0.1], peak_speed=0.5)
        for t in (0.0, 0.5, 3.0):
            np.testing.assert_allclose(plan.position(t), [0.2, 0.1])
            np.testing.assert_allclose(plan.velocity(t), 0.0)

    def test_rest_to_rest_boundary_conditions(self):
        plan = make_transfer_plan([0.0, 0.0], [0.3, 0.4], peak_speed=0.5)
        for t in (0.0, plan.t_end):
            np.testing.assert_allclose(plan.velocity(t), 0.0, atol=1e-12)
            np.testing.assert_allclose(plan.acceleration(t), 0.0, atol=1e-12)
        np.testing.assert_allclose(plan.position(0.0), [0.0, 0.0])
        np.testing.assert_allclose(plan.position(plan.t_end), [0.3, 0.4])

    def test_peak_speed_closed_form(self):
        start, goal = np.zeros(2), np.array([0.3, 0.4])
        plan = make_transfer_plan(start, goal, peak_speed=0.8)
        duration = plan.segments[0].duration
        distance = 0.5
        assert 15 / 8 * distance / duration == pytest.approx(0.8, abs=1e-9)
        mid_speed = float(np.linalg.norm(plan.velocity(duration / 2)))
        assert mid_speed == pytest.approx(0.8, abs=1e-9)

    def test_seeded_perturbation_deterministic(self):
        a = make_transfer_plan([0.0], [0.4], 0.5, seed=3, perturbation=0.002)
        b = make_transfer_plan([0.0], [0.4], 0.5, seed=3, perturbation=0.002)
        c = make_transfer_plan([0.0], [0.4], 0.5, seed=4, perturbation=0.002)
        ts = np.linspace(0, a.t_end, 40)
        np.testing.assert_array_equal(a.sample_positions(ts), b.sample_positions(ts))
        assert np.any(a.sample_positions(ts) != c.sample_positions(ts))

    def test_overlapping_segments_rejected(self):
        seg = MinimumJerkSegment(start=np.zeros(1), goal=np.ones(1), t0=0.0, duration=1.0)
        seg2 = MinimumJerkSegment(start=np.ones(1), goal=np.zeros(1), t0=0.5, duration=1.0)
        with pytest.raises(ValueError, match="overlap"):
            Plan(segments=(seg, seg2))


class TestContactForce:
    def test_free_space_zero(self):
        f = contact_force(FreeSpace(), np.array([0.1, 0.2]), np.zeros(2))
        np.testing.assert_array_equal(f, 0.0)

    def test_constant_force_fixed_vector(self):
        scen = ConstantForce(force=np.array([4.0, -1.0]))
        f = contact_force(scen, np.array([9.9, 9.9]), np.array([1.0, 1.0]))
        np.testing.assert_array_equal(f, [4.0, -1.0])

    def test_no_penetration_zero(self):
        peg = PegInHole()
        for p in ([0.05, 0.01], [0.0, 0.001], [0.0, -0.01], [0.0002, -0.05]):
            f = contact_force(peg, np.array(p), np.zeros(2))
            np.testing.assert_array_equal(f, 0.0)

    def test_table_penetration_spring_force(self):
        peg = PegInHole()
        p = 0.0004
        f = contact_force(peg, np.array([0.05, -p]), np.zeros(2))
        assert f[0] == pytest.approx(0.0, abs=1e-12)
        assert f[1] == pytest.approx(peg.wall_stiffness * p)

    def test_channel_wall_spring_force(self):
        peg = PegInHole()
        depth = peg.funnel_depth + 0.002
        pen = 0.0001
        f = contact_force(peg, np.array([peg.clearance + pen, -depth]), np.zeros(2))
        assert f[0] == pytest.approx(-peg.wall_stiffness * pen)
        assert f[1] == pytest.approx(0.0, abs=1e-9)

    def test_damping_adds_and_clamps(self):
        peg = PegInHole()
        pos = np.array([0.05, -0.0004])
        approach = contact_force(peg, pos, np.array([0.0, -0.01]))
        static = contact_force(peg, pos, np.zeros(2))
        assert approach[1] == pytest.approx(static[1] + peg.wall_damping * 0.01)
        # separating fast at the contact instant: clamped to zero, never attractive
        separating = contact_force(peg, pos, np.array([0.0, 1.0]))
        np.testing.assert_array_equal(separating, 0.0)

    def test_chamfer_normal_points_up_inward(self):
        peg = PegInHole()
        depth = peg.funnel_depth / 2
        boundary = peg.boundary_halfwidth(depth)
        f = contact_force(peg, np.array([boundary + 0.0002, -depth]), np.zeros(2))
        assert f[0] < 0 and f[1] > 0
        mirrored = contact_force(peg, np.array([-boundary - 0.0002, -depth]), np.zeros(2))
        assert mirrored[0] > 0 and mirrored[1] > 0

    def test_force_vanishes_at_contact_onset(self):
        peg = PegInHole()
        deep = contact_force(peg, np.array([0.05, -1e-6]), np.zeros(2))
        assert np.linalg.norm(deep) < peg.wall_stiffness * 2e-6


class TestEpisodeConfig:
    def test_rate_ordering_enforced(self):
        g = Gains.critically_damped(dims=2)
        with pytest.raises(ConfigError, match="f_ctrl"):
            EpisodeConfig(mode=FD, f_action=600, gains=g)

    def test_chunk_must_span_a_tick(self):
        g = Gains.critically_damped(dims=2)
        with pytest.raises(ConfigError, match="chunk_horizon"):
            EpisodeConfig(mode=FD, f_action=5, gains=g, chunk_horizon=0.1)

    def test_dims_must_match_plan(self):
        g = Gains.critically_damped(dims=3)
        cfg = EpisodeConfig(mode=FD, f_action=50, gains=g, duration_max=1.0)
        with pytest.raises(ConfigError, match="axes"):
            run_episode(make_transfer_plan([0.0, 0.0], [0.1, 0.1], 0.5), cfg, FreeSpace())


class TestRunEpisode:
    def test_high_gain_fd_tracks_tightly(self):
        plan = make_transfer_plan([0.0, 0.0], [0.4, 0.1], 0.5)
        gains = Gains.critically_damped(dims=2, stiffness=40000.0)
        cfg = EpisodeConfig(mode=FD, f_action=500, gains=gains, duration_max=4.0)
        trace = run_episode(plan, cfg, FreeSpace())
        assert rms_tracking_error(trace) < 1e-4

    def test_peg_sanity_episode_succeeds(self):
        gains = Gains.critically_damped(dims=2)
        cfg = EpisodeConfig(mode=FD, f_action=15, gains=gains, stop_on_success=True)
        trace = run_episode(insertion_plan(), cfg, PegInHole())
        assert trace.succeeded
        assert trace.success_time < cfg.duration_max

    def test_zoh_error_exceeds_fd_at_same_rate(self):
        plan = make_transfer_plan([0.0, 0.0], [0.4, 0.1], 0.5)
        gains = Gains.critically_damped(dims=2)
        rms = {}
        for mode in (ZOH, FD):
            cfg = EpisodeConfig(mode=mode, f_action=5, gains=gains, duration_max=4.0)
            rms[mode] = rms_tracking_error(run_episode(plan, cfg, FreeSpace()))
        assert rms[ZOH] > rms[FD]

    def test_deterministic_traces(self):
        plan = make_transfer_plan([0.0, 0.0], [0.3, 0.05], 0.6, seed=2, perturbation=0.001)
        gains = Gains.critically_damped(dims=2)
        cfg = EpisodeConfig(mode=SPL, f_action=15, gains=gains, duration_max=3.0)
        a = run_episode(plan, cfg, PegInHole())
        b = run_episode(plan, cfg, PegInHole())
        np.testing.assert_array_equal(a.position, b.position)
        np.testing.assert_array_equal(a.external_force, b.external_force)
        assert a.success_time == b.success_time

    def test_rate_decoupling(self):
        plan = make_transfer_plan([0.0, 0.0], [0.4, 0.1], 0.5)
        gains = Gains.critically_damped(dims=2)
        values = []
        for f_ctrl in (500, 1000):
            cfg = EpisodeConfig(mode=ZOH, f_action=5, gains=gains, duration_max=4.0, f_ctrl=f_ctrl)
            values.append(rms_tracking_error(run_episode(plan, cfg, FreeSpace())))
        assert abs(values[1] - values[0]) / values[0] < 0.05

    @pytest.mark.filterwarnings("ignore:overflow")
    def test_divergence_raises_with_diagnostic(self):
        plan = make_transfer_plan([0.0, 0.0], [0.4, 0.1], 0.5)
        gains = Gains.critically_damped(dims=2, stiffness=4.0e6, inertia=1.0)
        cfg = EpisodeConfig(mode=ZOH, f_action=5, gains=gains, duration_max=4.0)
        with pytest.raises(EpisodeDivergedError, match="diverged"):
            run_episode(plan, cfg, FreeSpace())

    def test_inner_loop_lag_still_tracks(self):
        plan = make_transfer_plan([0.0, 0.0], [0.4, 0.1], 0.5)
        gains = Gains.critically_damped(dims=2)
        cfg = EpisodeConfig(mode=FD, f_action=60, gains=gains, duration_max=4.0,
                            inner_loop_tau=0.02)
        trace = run_episode(plan, cfg, FreeSpace())
        assert rms_tracking_error(trace) < 0.05
        ideal = EpisodeConfig(mode=FD, f_action=60, gains=gains, duration_max=4.0)
        assert rms_tracking_error(trace) > rms_tracking_error(
            run_episode(plan, ideal, FreeSpace())
        )

    def test_spline_chunk_clamps_counted(self):
        plan = make_transfer_plan([0.0, 0.0], [0.4, 0.1], 0.5)
        gains = Gains.critically_damped(dims=2)
        cfg = EpisodeConfig(mode=SPL, f_action=15, gains=gains, duration_max=3.0)
        trace = run_episode(plan, cfg, FreeSpace())
        assert trace.clamp_events == 0


class TestComplianceInvariants:
    def test_peak_force_monotone_in_stiffness(self):
        # Quasi-static press against the fixture top: softer controller
        # stiffness must press with monotonically lower peak force.
        peg = PegInHole(wall_stiffness=5e3, wall_damping=50.0)
        press = Plan(
            segments=(
                MinimumJerkSegment(
                    start=np.array([0.05, 0.02]), goal=np.array([0.05, 0.02]),
                    t0=0.0, duration=0.0,
                ),
                MinimumJerkSegment(
                    start=np.array([0.05, 0.02]), goal=np.array([0.05, -0.03]),
                    t0=0.5, duration=5.0,
                ),
            )
        )
        peaks = []
        for stiffness in (100.0, 200.0, 400.0, 800.0):
            gains = Gains.critically_damped(dims=2, stiffness=stiffness)
            cfg = EpisodeConfig(mode=FD, f_action=60, gains=gains, duration_max=7.0)
            peaks.append(run_episode(press, cfg, peg).peak_force())
        assert peaks == sorted(peaks)
        assert all(a < b for a, b in zip(peaks, peaks[1:]))

    def test_tradeoff_grid(self):
        # Only velocity-aware modes reach low cruise lag and low peak contact
        # force at the same stiffness; position-only reaches each criterion
        # only at opposite ends of the grid.
        peg = PegInHole(wall_stiffness=2e4, wall_damping=50.0)
        start, hover = np.array([-1.2, 0.1]), np.array([0.001, 0.03])
        bottom = np.array([0.001, -0.028])
        t1 = minimum_jerk_duration(float(np.linalg.norm(hover - start)), 0.5)
        t2 = minimum_jerk_duration(float(np.linalg.norm(bottom - hover)), 0.08)
        plan = Plan(
            segments=(
                MinimumJerkSegment(start=start, goal=hover, t0=0.0, duration=t1),
                MinimumJerkSegment(start=hover, goal=bottom, t0=t1 + 0.5, duration=t2),
            )
        )
        outcomes = {}
        for mode in (ZOH, FD, SPL):
            for stiffness, f_ctrl in ((400.0, 500), (1.0e6, 1000)):
                gains = Gains.critically_damped(dims=2, stiffness=stiffness)
                cfg = EpisodeConfig(
                    mode=mode, f_action=60, gains=gains,
                    duration_max=plan.t_end + 3.0, f_ctrl=f_ctrl,
                )
                trace = run_episode(plan, cfg, peg)
                cruise_idx = int(round(t1 / 2 * f_ctrl))
                lag = float(np.linalg.norm(trace.error[cruise_idx]))
                outcomes[(mode, stiffness)] = (lag < 0.002, trace.peak_force() < 10.0)

        both = {key for key, (lag_ok, force_ok) in outcomes.items() if lag_ok and force_ok}
        assert both, "some cell must reach both criteria"
        assert all(mode in (FD, SPL) for mode, _ in both)
        # position-only: force only at the compliant end, lag only at the stiff end
        assert outcomes[(ZOH, 400.0)] == (False, True)
        assert outcomes[(ZOH, 1.0e6)][0] is True and outcomes[(ZOH, 1.0e6)][1] is False


class TestTrace:
    def test_series_lengths_validated(self):
        plan = make_transfer_plan([0.0, 0.0], [0.1, 0.0], 0.5)
        gains = Gains.critically_damped(dims=2)
        cfg = EpisodeConfig(mode=FD, f_action=50, gains=gains, duration_max=1.0)
        trace = run_episode(plan, cfg, FreeSpace())
        n = trace.times.shape[0]
        assert all(
            getattr(trace, name).shape[0] == n
            for name in ("ref_position", "position", "velocity", "accel_cmd",
                         "external_force", "error")
        )

    def test_peak_force_under_constant_push(self):
        plan = make_transfer_plan([0.0, 0.0], [0.1, 0.0], 0.5)
        gains = Gains.critically_damped(dims=2)
        cfg = EpisodeConfig(mode=FD, f_action=50, gains=gains, duration_max=1.0)
        trace = run_episode(plan, cfg, ConstantForce(force=np.array([3.0, 4.0])))
        assert trace.peak_force() == pytest.approx(5.0)
