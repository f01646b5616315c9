"""Reduced-order walking dynamics and one-step phase-space plans.

The model is a point-mass CoM on a massless telescoping leg whose height
tracks a linear surface, which makes the horizontal dynamics linear:

    xdd = omega^2 (x - x_foot)

with an identical lateral row.  Everything here is closed form: the flow,
its inverse (time from state), the conserved orbit, the switching state
between two stance feet, and the lateral foot placement that nulls lateral
velocity at the next apex.  No numerical integration is used anywhere.

Sign conventions: every walking step owns a local frame with its origin at
the current stance foot and the sagittal axis along the current heading.
Heading changes rotate state into the new frame at the apex.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DegenerateStep, InfeasiblePlan, NegativeRadicand, NoConvergence

GRAVITY = 9.81

# Newton search for the lateral foot placement.  The residual is affine in
# the unknown, so these limits are never reached with sane inputs.
_NEWTON_MAX_ITERS = 20
_NEWTON_TOL = 1e-9


@dataclass(frozen=True)
class PipmParams:
    """Pendulum constants for one walking step."""

    omega: float                  # asymptote slope, rad/s
    h_apex: float                 # apex CoM height above stance foot, m
    surface_slope_a: float = 0.0  # CoM-surface slope, dimensionless
    gravity: float = GRAVITY

    def __post_init__(self):
        if self.h_apex <= 0:
            raise ValueError(f"h_apex must be positive, got {self.h_apex}")
        expected = math.sqrt(self.gravity / self.h_apex)
        if self.omega <= 0 or abs(self.omega - expected) > 1e-9 * expected:
            raise ValueError(
                f"omega {self.omega} inconsistent with sqrt(g/h_apex) = {expected}"
            )

    @classmethod
    def from_omega(cls, omega: float, surface_slope_a: float = 0.0,
                   gravity: float = GRAVITY) -> "PipmParams":
        return cls(omega=omega, h_apex=gravity / omega**2,
                   surface_slope_a=surface_slope_a, gravity=gravity)

    @classmethod
    def from_apex_height(cls, h_apex: float, surface_slope_a: float = 0.0,
                         gravity: float = GRAVITY) -> "PipmParams":
        return cls(omega=math.sqrt(gravity / h_apex), h_apex=h_apex,
                   surface_slope_a=surface_slope_a, gravity=gravity)


@dataclass(frozen=True)
class SagittalState:
    x: float
    xdot: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.xdot)):
            raise ValueError(f"non-finite sagittal state ({self.x}, {self.xdot})")


@dataclass(frozen=True)
class LateralState:
    y: float
    ydot: float

    def __post_init__(self):
        if not (math.isfinite(self.y) and math.isfinite(self.ydot)):
            raise ValueError(f"non-finite lateral state ({self.y}, {self.ydot})")


@dataclass(frozen=True)
class HybridInput:
    """Per-step control: pendulum slope plus the discrete foot placement."""

    omega: float
    p_foot: tuple[float, float, float]


@dataclass(frozen=True)
class KeyframeState:
    """Discrete per-step state bridging the task and motion layers."""

    d: float                 # step length, m
    delta_theta: float       # heading change, rad
    delta_z_foot: float      # foot height change, m
    v_apex: float            # next sagittal apex velocity, m/s
    z_apex: float            # global apex CoM height, m

    def __post_init__(self):
        if self.d <= 0:
            raise ValueError(f"step length must be positive, got {self.d}")
        if self.v_apex < 0:
            raise ValueError(f"apex velocity must be nonnegative, got {self.v_apex}")


@dataclass(frozen=True)
class OwsPlan:
    """One-walking-step plan produced by the sagittal/lateral planners."""

    x_switch: float
    v_switch: float
    t_fhws: float
    t_shws: float
    foot_current: tuple[float, float, float]
    foot_next: tuple[float, float, float]
    dy1: float               # lateral CoM-to-waypoint offset at next apex, signed
    dy2: float               # lateral CoM-to-foot offset at next apex, signed
    frame_heading: float     # heading of the local plan frame, rad

    @property
    def t_total(self) -> float:
        return self.t_fhws + self.t_shws


def _flow_coeffs(x0: float, xdot0: float, foot: float, omega: float) -> tuple[float, float]:
    a = 0.5 * ((x0 - foot) + xdot0 / omega)
    b = 0.5 * ((x0 - foot) - xdot0 / omega)
    return a, b


def pipm_flow(state, foot: float, params: PipmParams, t: float):
    """Exact state of the pendulum after time t over a fixed foot.

    Works for sagittal or lateral states; negative t runs the flow backward.
    """
    w = params.omega
    a, b = _flow_coeffs(state_position(state), state_velocity(state), foot, w)
    ewt = math.exp(w * t)
    pos = a * ewt + b / ewt + foot
    vel = w * (a * ewt - b / ewt)
    return type(state)(pos, vel)


def state_position(state) -> float:
    return state.x if isinstance(state, SagittalState) else state.y


def state_velocity(state) -> float:
    return state.xdot if isinstance(state, SagittalState) else state.ydot


def orbit_velocity(x: float, x0: float, xdot0: float, foot: float,
                   params: PipmParams) -> float:
    """Forward-branch speed at position x on the orbit through (x0, xdot0).

    The orbit conserves xdot^2 - omega^2 (x - foot)^2.  Raises
    NegativeRadicand when the orbit never reaches x.
    """
    w2 = params.omega**2
    radicand = w2 * ((x - foot) ** 2 - (x0 - foot) ** 2) + xdot0**2
    if radicand < 0:
        raise NegativeRadicand(
            f"orbit through ({x0}, {xdot0}) over foot {foot} never reaches x={x}"
        )
    return math.sqrt(radicand)


def time_to_state(x0: float, xdot0: float, x: float, xdot: float, foot: float,
                  params: PipmParams) -> float:
    """Time for the flow to carry (x0, xdot0) to (x, xdot) over one foot.

    Solves the exponential mode directly.  An infeasible query (target not on
    the forward-reachable branch) raises InfeasiblePlan rather than clamping.
    """
    w = params.omega
    a, _ = _flow_coeffs(x0, xdot0, foot, w)
    numer = (x - foot) + xdot / w
    if a == 0.0 or numer / (2.0 * a) <= 0.0:
        raise InfeasiblePlan(
            f"state ({x}, {xdot}) not reachable from ({x0}, {xdot0}) over foot {foot}"
        )
    return math.log(numer / (2.0 * a)) / w


def switch_position(apex_c: SagittalState, apex_n_x: float, v_apex_n: float,
                    foot_c: float, foot_n: float, params: PipmParams) -> float:
    """Sagittal position where the forward and backward orbits intersect.

    Velocity continuity across the stance switch pins the crossing of the
    current-foot orbit through apex_c and the next-foot orbit through
    (apex_n_x, v_apex_n).
    """
    if foot_n == foot_c:
        raise DegenerateStep("foot placements coincide; switching state undefined")
    w2 = params.omega**2
    c = ((apex_c.x - foot_c) ** 2 - (apex_n_x - foot_n) ** 2
         + (v_apex_n**2 - apex_c.xdot**2) / w2)
    return 0.5 * (c / (foot_n - foot_c) + (foot_c + foot_n))


def plan_sagittal_ows(apex_c: SagittalState, keyframe: KeyframeState,
                      params: PipmParams, foot_c: float = 0.0,
                      slack: float = 1e-9) -> OwsPlan:
    """Sagittal half of a one-walking-step plan in the local frame.

    Propagates forward from the current state and backward from the next
    apex until the orbits intersect; the intersection is the stance switch.
    The next apex sits over the next foot at apex_c.x + d.
    """
    x_apex_n = apex_c.x + keyframe.d
    foot_n = x_apex_n
    v_n = keyframe.v_apex
    try:
        x_sw = switch_position(apex_c, x_apex_n, v_n, foot_c, foot_n, params)
    except DegenerateStep as exc:
        raise InfeasiblePlan(str(exc)) from exc
    if not (apex_c.x - slack <= x_sw <= x_apex_n + slack):
        raise InfeasiblePlan(
            f"switch at {x_sw:.6f} outside apex interval "
            f"[{apex_c.x:.6f}, {x_apex_n:.6f}]"
        )
    v_sw = orbit_velocity(x_sw, apex_c.x, apex_c.xdot, foot_c, params)
    t_fhws = time_to_state(apex_c.x, apex_c.xdot, x_sw, v_sw, foot_c, params)
    t_shws = time_to_state(x_sw, v_sw, x_apex_n, v_n, foot_n, params)
    if t_fhws <= 0 or t_shws <= 0:
        raise InfeasiblePlan(
            f"nonpositive half-step durations ({t_fhws:.6f}, {t_shws:.6f})"
        )
    return OwsPlan(
        x_switch=x_sw, v_switch=v_sw, t_fhws=t_fhws, t_shws=t_shws,
        foot_current=(foot_c, 0.0, 0.0),
        foot_next=(foot_n, 0.0, keyframe.delta_z_foot),
        dy1=0.0, dy2=0.0, frame_heading=0.0,
    )


def lateral_foot_for_apex(lat_c: LateralState, foot_c_y: float, t_fhws: float,
                          t_shws: float, params: PipmParams) -> float:
    """Closed-form next lateral foot placement nulling ydot at the next apex.

    Propagate the lateral state over the current foot for t_fhws; the apex
    velocity after t_shws over a foot f is affine in f, so solve directly.
    """
    w = params.omega
    sw = pipm_flow(lat_c, foot_c_y, params, t_fhws)
    sh, ch = math.sinh(w * t_shws), math.cosh(w * t_shws)
    # ydot(t_shws) = w (y_sw - f) sinh + ydot_sw cosh = 0
    return sw.y + sw.ydot * ch / (w * sh)


def plan_lateral_ows(lat_c: LateralState, foot_c_y: float, t_fhws: float,
                     t_shws: float, params: PipmParams, guess: float = 0.0,
                     waypoint_y: float = 0.0) -> tuple[float, float, float]:
    """Next lateral foot placement and apex offsets via Newton-Raphson.

    Finds foot_n_y such that the lateral CoM velocity is zero at the next
    apex (the residual is affine in foot_n_y, so Newton lands in one step
    from any guess).  Returns (foot_n_y, dy1_n, dy2_n) where dy1 is the
    apex-CoM-to-waypoint offset and dy2 the apex-CoM-to-foot offset, both
    signed in the plan frame.
    """
    w = params.omega
    sw = pipm_flow(lat_c, foot_c_y, params, t_fhws)
    sh, ch = math.sinh(w * t_shws), math.cosh(w * t_shws)

    def residual(f: float) -> float:
        return w * (sw.y - f) * sh + sw.ydot * ch

    dresid = -w * sh  # constant: residual is affine in f
    f = guess
    for _ in range(_NEWTON_MAX_ITERS):
        r = residual(f)
        if abs(r) < _NEWTON_TOL:
            break
        f = f - r / dresid
    else:
        raise NoConvergence("lateral foot search did not reach tolerance")
    if abs(residual(f)) >= _NEWTON_TOL:
        raise NoConvergence("lateral foot search did not reach tolerance")
    y_apex_n = pipm_flow(sw, f, params, t_shws).y
    dy1_n = waypoint_y - y_apex_n
    dy2_n = y_apex_n - f
    return f, dy1_n, dy2_n


def steer_transform(sag: SagittalState, lat: LateralState, delta_theta: float,
                    foot: tuple[float, float] = (0.0, 0.0)
                    ) -> tuple[SagittalState, LateralState]:
    """Re-express a planar CoM state in the frame rotated by delta_theta.

    Rotation is about the current stance foot; velocity norm is preserved.
    A state that was at apex before the turn is generally non-apex after it.
    """
    c, s = math.cos(delta_theta), math.sin(delta_theta)
    px, py = sag.x - foot[0], lat.y - foot[1]
    vx, vy = sag.xdot, lat.ydot
    # frame rotates by +delta_theta, so coordinates rotate by -delta_theta
    npx = c * px + s * py
    npy = -s * px + c * py
    nvx = c * vx + s * vy
    nvy = -s * vx + c * vy
    return (SagittalState(npx + foot[0], nvx), LateralState(npy + foot[1], nvy))
