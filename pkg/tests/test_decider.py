import math

import pytest

from stepnav.decider import (
    DeciderConfig,
    Decision,
    HighLevelAction,
    NoViablePlan,
    TrackingState,
    cost_lambda,
    decide_next_apex,
    tracking_viable,
)
from stepnav.rom import LateralState, PipmParams, SagittalState, pipm_flow
from stepnav.safety import SafetyParams, check_steering, check_straight

OMEGA = 3.15


@pytest.fixture
def cfg():
    return DeciderConfig()


def straight_walk(cfg, safety, pipm, n_steps, d=0.31, v0=0.5):
    """Run the decider closed loop; returns per-step decisions."""
    sag = SagittalState(0.0, v0)
    lat = LateralState(0.14, 0.0)
    foot_gy = -0.24
    track = TrackingState(0.10, 0.14, 0.0)
    out = []
    for _ in range(n_steps):
        dec = decide_next_apex(HighLevelAction(d=d, delta_theta=0.0), sag, lat,
                               track, cfg, safety, pipm, waypoint_y=-foot_gy)
        out.append(dec)
        foot_gy += dec.foot_n_y
        sag = SagittalState(0.0, dec.v_apex_opt)
        lat = LateralState(dec.dy2, 0.0)
        track = TrackingState(dec.dy1, dec.dy2, dec.side_sign)
    return out


class TestTrackingViable:
    def test_window_values(self, cfg, safety):
        # toward-side window at 22.5 degrees: [0.0920, 0.1533]
        dth = math.radians(22.5)
        lo = safety.v_apex_max * math.tan(dth) / OMEGA
        hi = safety.v_apex_min / (OMEGA * math.tan(dth))
        assert lo == pytest.approx(0.09205, abs=1e-4)
        assert hi == pytest.approx(0.15328, abs=1e-4)
        assert tracking_viable(0.0, 0.14, dth, 0.0, cfg, safety)
        assert not tracking_viable(0.0, lo - 1e-3, dth, 0.0, cfg, safety)
        assert not tracking_viable(0.0, hi + 1e-3, dth, 0.0, cfg, safety)

    def test_boundary_inclusive(self, cfg, safety):
        assert tracking_viable(0.38, 0.14, 0.0, 0.0, cfg, safety)
        assert not tracking_viable(0.39, 0.14, 0.0, 0.0, cfg, safety)

    def test_sign_alternation(self, cfg, safety):
        assert not tracking_viable(0.10, 0.14, 0.0, +1.0, cfg, safety)
        assert tracking_viable(0.10, 0.14, 0.0, -1.0, cfg, safety)
        assert tracking_viable(0.10, 0.14, 0.0, 0.0, cfg, safety)

    def test_leg_width_cap_straight(self, cfg, safety):
        assert not tracking_viable(0.0, 0.31, 0.0, 0.0, cfg, safety)
        assert tracking_viable(0.0, 0.29, 0.0, 0.0, cfg, safety)

    def test_away_side_needs_no_window(self, cfg, safety):
        # offset opposite the upcoming turn: only cap/boundary/sign apply
        assert tracking_viable(0.0, -0.03, math.radians(22.5), 0.0, cfg, safety)


class TestCostLambda:
    def test_zero_at_desired(self, cfg):
        assert cost_lambda(cfg.dy1_d, cfg.dy2_d, cfg.t_d, cfg.w_d, cfg) == 0.0

    def test_table_weights(self, cfg):
        # straight weights (1, 1, 0, 0) with offset errors 0.02 and 0.01
        val = cost_lambda(cfg.dy1_d - 0.02, cfg.dy2_d + 0.01, 99.0, 99.0, cfg)
        assert val == pytest.approx(0.03)

    def test_hardware_weights(self):
        cfg = DeciderConfig(c1=4, c2=4, c3=6, c4=2, t_d=0.45, w_d=0.45)
        val = cost_lambda(cfg.dy1_d - 0.01, cfg.dy2_d - 0.01,
                          cfg.t_d + 0.05, cfg.w_d + 0.1, cfg)
        assert val == pytest.approx(4 * 0.01 + 4 * 0.01 + 6 * 0.05 + 2 * 0.1)
        assert val == pytest.approx(0.58)

    def test_steering_weights(self):
        cfg = DeciderConfig()
        val = cost_lambda(0.01, cfg.dy2_d_steering, 0, 0, cfg, steering=True)
        assert val == pytest.approx(7 * 0.01)

    def test_invalid_config(self):
        with pytest.raises(ValueError):
            DeciderConfig(v_inc=0.0)
        with pytest.raises(ValueError):
            DeciderConfig(c1=-1)
        with pytest.raises(ValueError):
            DeciderConfig(dy1_d=0.3, dy2_d=0.3, b_safety=0.52)


class TestDecideStraight:
    def test_twenty_step_walk_properties(self, cfg, safety, pipm):
        decs = straight_walk(cfg, safety, pipm, 20)
        sums = [d.dy1 + d.dy2 for d in decs]
        assert all(abs(s) <= 0.52 for s in sums)
        signs = [d.side_sign for d in decs]
        assert all(signs[i] == -signs[i - 1] for i in range(1, len(signs)))

    def test_refinement_stability(self, cfg, safety, pipm):
        sag = SagittalState(0.0, 0.43)
        lat = LateralState(-0.12, 0.0)
        track = TrackingState(0.1, -0.12, -1.0)
        act = HighLevelAction(0.31, 0.0)
        coarse = decide_next_apex(act, sag, lat, track, cfg, safety, pipm,
                                  waypoint_y=-0.1)
        fine = decide_next_apex(act, sag, lat, track,
                                DeciderConfig(v_inc=0.001), safety, pipm,
                                waypoint_y=-0.1)
        assert abs(coarse.v_apex_opt - fine.v_apex_opt) <= 0.01 + 1e-9

    def test_single_candidate(self, cfg, pipm):
        sp = SafetyParams(0.5, 0.5 + 1e-13, 1.5, OMEGA)
        dec = decide_next_apex(HighLevelAction(0.31, 0.0),
                               SagittalState(0.0, 0.5), LateralState(0.14, 0.0),
                               TrackingState(0, 0.14, 0.0), cfg, sp, pipm,
                               waypoint_y=0.24)
        assert dec.v_apex_opt == pytest.approx(0.5)

    def test_argmin_invariant_to_weight_scaling(self, safety, pipm):
        base = DeciderConfig(c1=1.0, c2=1.0, c3=0.5, c4=0.25, t_d=0.6, w_d=0.4)
        scaled = DeciderConfig(c1=3.0, c2=3.0, c3=1.5, c4=0.75, t_d=0.6, w_d=0.4)
        args = (HighLevelAction(0.31, 0.0), SagittalState(0.0, 0.45),
                LateralState(0.13, 0.0), TrackingState(0.1, 0.13, +1.0))
        a = decide_next_apex(*args, base, safety, pipm, waypoint_y=0.2)
        b = decide_next_apex(*args, scaled, safety, pipm, waypoint_y=0.2)
        assert a.v_apex_opt == b.v_apex_opt
        assert b.cost == pytest.approx(3 * a.cost)

    def test_deterministic(self, cfg, safety, pipm):
        args = (HighLevelAction(0.42, 0.0), SagittalState(0.0, 0.5),
                LateralState(0.14, 0.0), TrackingState(0.1, 0.14, 1.0))
        a = decide_next_apex(*args, cfg, safety, pipm, waypoint_y=0.24)
        b = decide_next_apex(*args, cfg, safety, pipm, waypoint_y=0.24)
        assert a == b

    def test_returned_plan_revalidates(self, cfg, safety, pipm):
        dec = decide_next_apex(HighLevelAction(0.42, 0.0),
                               SagittalState(0.0, 0.5), LateralState(0.14, 0.0),
                               TrackingState(0.1, 0.14, 1.0), cfg, safety, pipm,
                               waypoint_y=0.24)
        assert check_straight(0.5, dec.v_apex_opt, 0.42, safety)
        assert dec.plan.v_switch <= safety.v_max
        assert tracking_viable(dec.dy1, dec.dy2, 0.0, 1.0, cfg, safety)
        # re-propagate the lateral plan: apex velocity must be nulled
        sw = pipm_flow(LateralState(0.14, 0.0), 0.0, pipm, dec.plan.t_fhws)
        end = pipm_flow(sw, dec.foot_n_y, pipm, dec.plan.t_shws)
        assert abs(end.ydot) < 1e-9

    def test_no_viable_plan(self, cfg, pipm):
        # infeasible geometry: step longer than any admissible transition
        sp = SafetyParams(0.2, 0.25, 0.26, OMEGA)
        with pytest.raises(NoViablePlan):
            decide_next_apex(HighLevelAction(2.5, 0.0), SagittalState(0.0, 0.2),
                             LateralState(0.14, 0.0), TrackingState(0, 0.14, 0),
                             cfg, sp, pipm)


class TestDecideTurning:
    def run_sequence(self, cfg, safety, pipm, start_dy2, start_sign, seq,
                     dth):
        sag = SagittalState(0.0, 0.5)
        lat = LateralState(start_dy2, 0.0)
        track = TrackingState(0.0, start_dy2, start_sign)
        decisions = []
        for k, d in enumerate(seq):
            nxt = dth if k + 1 < len(seq) else 0.0
            dec = decide_next_apex(HighLevelAction(d=d, delta_theta=dth),
                                   sag, lat, track, cfg, safety, pipm,
                                   waypoint_y=0.0, next_delta_theta=nxt)
            decisions.append(dec)
            sag = SagittalState(0.0, dec.v_apex_opt)
            lat = LateralState(dec.dy2, 0.0)
            track = TrackingState(dec.dy1, dec.dy2, dec.side_sign)
        return decisions

    def test_four_step_left_turn(self, cfg, safety, pipm):
        # toward-configured start: right stance, turning left
        decs = self.run_sequence(cfg, safety, pipm, +0.14, +1.0,
                                 [0.47, 0.38, 0.47, 0.38], math.radians(22.5))
        assert len(decs) == 4
        sums = [d.dy1 + d.dy2 for d in decs]
        assert all(abs(s) <= 0.52 for s in sums)
        signs = [d.side_sign for d in decs]
        assert all(signs[i] == -signs[i - 1] for i in range(1, 4))

    def test_four_step_right_turn_mirror(self, cfg, safety, pipm):
        decs = self.run_sequence(cfg, safety, pipm, -0.14, -1.0,
                                 [0.47, 0.38, 0.47, 0.38], -math.radians(22.5))
        left = self.run_sequence(cfg, safety, pipm, +0.14, +1.0,
                                 [0.47, 0.38, 0.47, 0.38], math.radians(22.5))
        for dl, dr in zip(left, decs):
            assert dl.v_apex_opt == pytest.approx(dr.v_apex_opt)
            assert dl.dy2 == pytest.approx(-dr.dy2, abs=1e-9)

    def test_uncertified_turn_rejected(self, cfg, safety, pipm):
        # toward-side turn at 30 degrees exceeds the certificate limit at
        # the low end of the velocity range
        with pytest.raises(NoViablePlan):
            decide_next_apex(HighLevelAction(0.47, math.radians(30.0)),
                             SagittalState(0.0, 0.2), LateralState(0.14, 0.0),
                             TrackingState(0, 0.14, 0.0), cfg, safety, pipm)

    def test_decision_is_dataclass(self, cfg, safety, pipm):
        dec = decide_next_apex(HighLevelAction(0.31, 0.0),
                               SagittalState(0.0, 0.5), LateralState(0.14, 0.0),
                               TrackingState(0.1, 0.14, 0.0), cfg, safety, pipm,
                               waypoint_y=0.24)
        assert isinstance(dec, Decision)
        assert dec.plan.frame_heading == 0.0
