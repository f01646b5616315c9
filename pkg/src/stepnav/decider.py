"""Sampling-based choice of the next apex velocity for waypoint tracking.

The task layer fixes the step geometry (length, heading change, height
change); the one free scalar left to the motion layer is the next sagittal
apex velocity.  Scanning it over the allowed range reshapes the step
timing, which in turn reshapes the lateral plan; a weighted deviation cost
picks the sample that best tracks the waypoint line while keeping the
stance-side alternation that makes lateral tracking viable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InfeasiblePlan, NoConvergence, StepnavError
from .rom import (
    KeyframeState,
    LateralState,
    OwsPlan,
    PipmParams,
    SagittalState,
    plan_lateral_ows,
    plan_sagittal_ows,
    steer_transform,
)
from .safety import SafetyParams, check_steering


class NoViablePlan(StepnavError):
    """No sampled apex velocity yields a feasible, trackable step."""


@dataclass(frozen=True)
class DeciderConfig:
    v_inc: float = 0.01
    dy1_d: float = 0.10            # desired |CoM-to-waypoint| at apex, m
    dy2_d: float = 0.14            # desired |CoM-to-foot| at apex, m
    dy1_d_steering: float = 0.0
    dy2_d_steering: float = 0.14
    t_d: float = 0.0               # desired step duration, s
    w_d: float = 0.0               # desired step width, m
    c1: float = 1.0
    c2: float = 1.0
    c3: float = 0.0
    c4: float = 0.0
    c1_steering: float = 7.0
    c2_steering: float = 4.0
    b_safety: float = 0.52         # waypoint safety boundary, m
    leg_width_cap: float = 0.30    # |dy2| bound when walking straight, m

    def __post_init__(self):
        if self.v_inc <= 0:
            raise ValueError(f"v_inc must be positive, got {self.v_inc}")
        for name in ("c1", "c2", "c3", "c4", "c1_steering", "c2_steering"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.dy1_d + self.dy2_d > self.b_safety:
            raise ValueError(
                f"dy1_d + dy2_d = {self.dy1_d + self.dy2_d} exceeds "
                f"b_safety = {self.b_safety}"
            )

    def weights(self, steering: bool) -> tuple[float, float, float, float]:
        if steering:
            return self.c1_steering, self.c2_steering, self.c3, self.c4
        return self.c1, self.c2, self.c3, self.c4

    def desired_offsets(self, steering: bool) -> tuple[float, float]:
        if steering:
            return self.dy1_d_steering, self.dy2_d_steering
        return self.dy1_d, self.dy2_d


@dataclass(frozen=True)
class TrackingState:
    dy1: float
    dy2: float
    side_sign: float    # sign of (dy1 + dy2) at the previous keyframe; 0 = first step


@dataclass(frozen=True)
class HighLevelAction:
    d: float                 # step length, m (already label-resolved)
    delta_theta: float       # heading change, rad
    delta_z_foot: float = 0.0


@dataclass(frozen=True)
class Decision:
    v_apex_opt: float
    plan: OwsPlan
    dy1: float               # signed, next apex
    dy2: float
    foot_n_y: float          # lateral next-foot position in the plan frame
    cost: float
    side_sign: float         # sign of (dy1 + dy2) after this step


def tracking_viable(dy1: float, dy2: float, delta_theta: float,
                    prev_sign: float, config: DeciderConfig,
                    params: SafetyParams) -> bool:
    """Offsets inside their viable ranges with alternating stance side.

    delta_theta is the heading change these offsets must support on the
    UPCOMING step (zero when it walks straight).  The combined offset
    keeps the foot within the safety boundary around the waypoint; the
    side of the foot relative to the waypoint flips between consecutive
    keyframes; |dy2| obeys the leg-width cap.  When the upcoming turn
    heads toward the offset side, |dy2| must additionally sit in the
    window that keeps the steering certificate satisfiable over the whole
    allowed apex-velocity range (away-side turns cannot cross the foot
    line, so no window applies).
    """
    s = dy1 + dy2
    if abs(s) > config.b_safety + 1e-12:
        return False
    if abs(dy2) > config.leg_width_cap + 1e-12:
        return False
    dt = abs(delta_theta)
    if dt > 0 and delta_theta * dy2 > 0:
        t = math.tan(dt)
        lo = params.v_apex_max * t / params.omega
        hi = params.v_apex_min / (params.omega * t)
        if not (lo - 1e-12 <= abs(dy2) <= hi + 1e-12):
            return False
    if prev_sign != 0 and math.copysign(1.0, s) != -prev_sign:
        return False
    return True


def cost_lambda(dy1_n: float, dy2_n: float, t_total: float, step_width: float,
                config: DeciderConfig, steering: bool = False) -> float:
    """Weighted absolute deviation from the desired step shape."""
    c1, c2, c3, c4 = config.weights(steering)
    dy1_d, dy2_d = config.desired_offsets(steering)
    return (c1 * abs(dy1_d - dy1_n) + c2 * abs(dy2_d - dy2_n)
            + c3 * abs(config.t_d - t_total)
            + c4 * abs(config.w_d - step_width))


def decide_next_apex(action: HighLevelAction, sag: SagittalState,
                     lat: LateralState, track: TrackingState,
                     config: DeciderConfig, safety: SafetyParams,
                     pipm: PipmParams, waypoint_y: float = 0.0,
                     next_delta_theta: float = 0.0) -> Decision:
    """Scan next apex velocities and return the cheapest viable step plan.

    State is given in the local frame with the current stance foot at the
    origin; waypoint_y is the next waypoint's lateral offset in that frame
    (after rotation, for a turning step).  The scan runs from v_apex_min to
    v_apex_max in v_inc increments; ties break toward the smaller velocity.
    Deviation costs compare offset magnitudes against the desired values.

    next_delta_theta is the heading change the FOLLOWING step will take
    (zero if straight or unknown): the produced offsets are that step's
    entry offsets, so tracking viability is judged against it.  Raises
    NoViablePlan when every sample fails planning, the switch-velocity
    cap, or tracking viability.
    """
    steering = action.delta_theta != 0.0
    if steering:
        if not check_steering(sag.xdot, action.delta_theta, lat.y, safety):
            raise NoViablePlan(
                f"turn of {action.delta_theta} rad uncertified at apex speed "
                f"{sag.xdot} with lateral offset {lat.y}"
            )
        sag, lat = steer_transform(sag, lat, action.delta_theta)

    best: Decision | None = None
    v_n = safety.v_apex_min
    while v_n <= safety.v_apex_max + 1e-12:
        v_n = min(v_n, safety.v_apex_max)
        try:
            plan = plan_sagittal_ows(
                sag,
                KeyframeState(d=action.d, delta_theta=action.delta_theta,
                              delta_z_foot=action.delta_z_foot, v_apex=v_n,
                              z_apex=pipm.h_apex + action.delta_z_foot),
                pipm, foot_c=0.0)
        except InfeasiblePlan:
            v_n += config.v_inc
            continue
        if plan.v_switch > safety.v_max + 1e-12:
            v_n += config.v_inc
            continue
        try:
            foot_n_y, dy1_n, dy2_n = plan_lateral_ows(
                lat, 0.0, plan.t_fhws, plan.t_shws, pipm,
                guess=lat.y, waypoint_y=waypoint_y)
        except NoConvergence:
            v_n += config.v_inc
            continue
        if not tracking_viable(dy1_n, dy2_n, next_delta_theta,
                               track.side_sign, config, safety):
            v_n += config.v_inc
            continue
        cost = cost_lambda(abs(dy1_n), abs(dy2_n), plan.t_total,
                           abs(foot_n_y), config, steering)
        s = dy1_n + dy2_n
        if best is None or cost < best.cost:
            best = Decision(
                v_apex_opt=v_n,
                plan=OwsPlan(
                    x_switch=plan.x_switch, v_switch=plan.v_switch,
                    t_fhws=plan.t_fhws, t_shws=plan.t_shws,
                    foot_current=(0.0, 0.0, 0.0),
                    foot_next=(plan.foot_next[0], foot_n_y,
                               action.delta_z_foot),
                    dy1=dy1_n, dy2=dy2_n,
                    frame_heading=action.delta_theta),
                dy1=dy1_n, dy2=dy2_n, foot_n_y=foot_n_y, cost=cost,
                side_sign=math.copysign(1.0, s) if s != 0 else 0.0)
        v_n += config.v_inc
    if best is None:
        raise NoViablePlan(
            f"no viable apex velocity in [{safety.v_apex_min}, "
            f"{safety.v_apex_max}] for step d={action.d}, "
            f"dtheta={action.delta_theta}"
        )
    return best
