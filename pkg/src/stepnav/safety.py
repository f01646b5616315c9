"""Step-to-step safety certificates and the permissible turning library.

Certifying a keyframe transition means three checks: the apex-velocity
window that keeps the stance switch between the two apexes, a cap on the
switch velocity (the fastest point of a step), and, when turning, the
window that keeps the rotated state on the balanced side of both pendulum
asymptotes.  The turning library enumerates step sequences that pass all
of them for every apex velocity the motion layer is allowed to pick, so
the task layer can command turns without reasoning about dynamics.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .errors import EmptyInterval, EmptyLibrary
from .rom import PipmParams, SagittalState, orbit_velocity, switch_position


@dataclass(frozen=True)
class SafetyParams:
    v_apex_min: float
    v_apex_max: float
    v_max: float          # switch-velocity cap, m/s
    omega: float

    def __post_init__(self):
        if not (0 <= self.v_apex_min < self.v_apex_max < self.v_max):
            raise ValueError(
                "require 0 <= v_apex_min < v_apex_max < v_max, got "
                f"({self.v_apex_min}, {self.v_apex_max}, {self.v_max})"
            )


def straight_bounds(d: float, omega: float, x_apex_c: float = 0.0,
                    x_foot_c: float = 0.0, x_apex_n: float | None = None,
                    x_foot_n: float | None = None) -> tuple[float, float]:
    """Bounds on v_apex_n^2 - v_apex_c^2 keeping the switch between apexes.

    The simple +/- omega^2 d^2 window applies when each apex sits over its
    foot; the general positions give the asymmetric window.
    """
    if x_apex_n is None:
        x_apex_n = x_apex_c + d
    if x_foot_n is None:
        x_foot_n = x_apex_n
    w2 = omega**2
    span = x_apex_n - x_apex_c
    lo = w2 * span * (x_apex_c + x_apex_n - 2 * x_foot_n)
    hi = w2 * span * (x_apex_c + x_apex_n - 2 * x_foot_c)
    return lo, hi


def check_straight(v_c: float, v_n: float, d: float, params: SafetyParams,
                   x_apex_c: float = 0.0, x_foot_c: float = 0.0,
                   x_apex_n: float | None = None,
                   x_foot_n: float | None = None) -> bool:
    """True iff the apex-velocity pair admits a switch between the apexes."""
    if d <= 0:
        raise ValueError(f"step length must be positive, got {d}")
    lo, hi = straight_bounds(d, params.omega, x_apex_c, x_foot_c,
                             x_apex_n, x_foot_n)
    diff = v_n**2 - v_c**2
    return lo <= diff <= hi


def switch_velocity(v_c: float, v_n: float, d: float,
                    params: SafetyParams) -> float:
    """Peak CoM speed of the step, at the stance switch.

    Assumes apexes over feet (straight walking); consistent with the
    switch-position solution, so it propagates InfeasiblePlan unchanged.
    """
    pipm = PipmParams.from_omega(params.omega)
    apex_c = SagittalState(0.0, v_c)
    x_sw = switch_position(apex_c, d, v_n, 0.0, d, pipm)
    return orbit_velocity(x_sw, 0.0, v_c, 0.0, pipm)


def check_steering(v_c: float, delta_theta: float, dy2_c: float,
                   params: SafetyParams) -> bool:
    """True iff the rotated state stays on the safe side of both asymptotes.

    The binding case is a turn toward the side the CoM hangs (lateral
    offset and heading change of the same sign): the rotated lateral state
    then moves toward the stance-foot line and the apex speed must sit in
    [|dy2| omega tan(dt), |dy2| omega / tan(dt)] to cross the next sagittal
    apex without crossing the foot line first.  Turning away from the
    offset side moves the CoM away from the foot line, so no crossing is
    possible and the step is laterally safe (the catch step is just wide).
    A zero heading change is always safe.
    """
    dt = abs(delta_theta)
    if dt == 0.0:
        return True
    if dt >= math.pi / 2:
        return False
    if delta_theta * dy2_c <= 0:
        return True
    t = math.tan(dt)
    lo = abs(dy2_c) * params.omega * t
    hi = abs(dy2_c) * params.omega / t
    return lo <= v_c <= hi


def apex_bound_steering(v_c: float, d: float, delta_theta: float, dy2_c: float,
                        params: SafetyParams, variant: str = "plus"
                        ) -> tuple[float, float]:
    """Interval of admissible v_apex_n^2 for a turning step.

    The turn shifts the effective step span by the projection of the
    lateral offset: d2_eff = d^2 +/- 2 |dy2| d sin(dt).  The plus variant
    applies when the rotated position offset adds to the span, minus when
    it subtracts.  At zero heading change both collapse to the straight
    window.
    """
    if variant not in ("plus", "minus"):
        raise ValueError(f"variant must be 'plus' or 'minus', got {variant!r}")
    dt = abs(delta_theta)
    w2 = params.omega**2
    sign = 1.0 if variant == "plus" else -1.0
    d2_eff = d**2 + sign * 2.0 * abs(dy2_c) * d * math.sin(dt)
    vproj2 = (v_c * math.cos(dt)) ** 2
    lo = max(0.0, vproj2 - w2 * d**2)
    hi = vproj2 + w2 * d2_eff
    if hi < lo:
        raise EmptyInterval(
            f"steering bound inverted: [{lo}, {hi}] for d={d}, dtheta={dt}"
        )
    return lo, hi


def max_turn_angle(v_min: float, v_max: float, dy2: float,
                   params: SafetyParams) -> float:
    """Largest heading change certifiable for every apex speed in the range.

    The lower asymptote bound binds at v_min and the upper at v_max:
    dtheta_max = min(atan(v_min / (|dy2| omega)), atan(|dy2| omega / v_max)).
    """
    if v_min <= 0:
        raise ValueError(f"v_min must be positive, got {v_min}")
    k = abs(dy2) * params.omega
    return min(math.atan(v_min / k), math.atan(k / v_max))


# --- turning-sequence library -------------------------------------------

# Step-length labels shared with the action layer.  Straight labels land on
# whole fine-cell multiples; turning labels are tuned so waypoints land on
# fine-cell centers at the intermediate headings.
STRAIGHT_LABEL_METERS = {
    "small2": 0.21,
    "medium2": 0.31,
    "large1": 0.42,
    "large2": 0.52,
}
TURNING_LABEL_METERS = {
    "small1": 0.28,
    "small2": 0.38,
    "medium1": 0.43,
    "medium2": 0.47,
}

STANCE_FEET = ("left", "right")
TURN_DIRECTIONS = ("left", "right")


@dataclass(frozen=True)
class TurnLibraryEntry:
    heading_before: int                       # index into the discrete heading set
    stance_foot: str                          # stance when the turn is commanded
    turn: str                                 # overall turn direction
    positioning_label: str | None             # straight lead-in step, if needed
    delta_theta_seq: tuple[float, ...] = field(default_factory=tuple)
    step_label_seq: tuple[str, ...] = field(default_factory=tuple)
    step_length_seq: tuple[float, ...] = field(default_factory=tuple)


def build_turn_library(headings: int, delta_theta_step: float,
                       params: SafetyParams, dy2_d: float,
                       turn_label_meters: dict[str, float] | None = None,
                       total_turn: float = math.pi / 2) -> list[TurnLibraryEntry]:
    """Enumerate certified step sequences completing a 90-degree turn.

    The rotation must start with the CoM hanging into the turn (the
    steering certificate's binding configuration), which holds when the
    stance foot is opposite the turn direction.  A turn commanded on the
    matching stance therefore leads with one short straight positioning
    step to flip stance.  Turning steps then alternate: toward-side steps
    take the longer label and away-side steps the shorter one, which also
    alternates the certificate's binding and vacuous cases.  Every toward
    step must be certifiable for the whole allowed apex-velocity range and
    every step length must admit a constant-speed transition; otherwise
    the library comes out empty.
    """
    labels = dict(turn_label_meters or TURNING_LABEL_METERS)
    n_steps = math.ceil(round(math.degrees(total_turn), 9)
                        / round(math.degrees(delta_theta_step), 9))
    limit = max_turn_angle(params.v_apex_min, params.v_apex_max, dy2_d, params)
    entries: list[TurnLibraryEntry] = []
    if delta_theta_step <= limit + 1e-12:
        for heading in range(headings):
            for stance in STANCE_FEET:
                for turn in TURN_DIRECTIONS:
                    sign = 1.0 if turn == "left" else -1.0
                    positioning = "small2" if stance == turn else None
                    label_seq = ["medium2" if k % 2 == 0 else "small2"
                                 for k in range(n_steps)]
                    lengths = tuple(labels[lb] for lb in label_seq)
                    ok = check_steering(params.v_apex_min,
                                        sign * delta_theta_step,
                                        sign * dy2_d, params) \
                        and check_steering(params.v_apex_max,
                                           sign * delta_theta_step,
                                           sign * dy2_d, params) \
                        and all(
                            check_straight(params.v_apex_min,
                                           params.v_apex_min, d_m, params)
                            for d_m in lengths
                        )
                    if ok:
                        entries.append(TurnLibraryEntry(
                            heading_before=heading, stance_foot=stance,
                            turn=turn, positioning_label=positioning,
                            delta_theta_seq=tuple([sign * delta_theta_step] * n_steps),
                            step_label_seq=tuple(label_seq),
                            step_length_seq=lengths,
                        ))
    if not entries:
        raise EmptyLibrary(
            f"no certifiable {math.degrees(total_turn):.0f}-degree turn with "
            f"per-step change {math.degrees(delta_theta_step):.2f} degrees "
            f"(limit {math.degrees(limit):.2f})"
        )
    return entries


def save_turn_library(entries: list[TurnLibraryEntry], path) -> None:
    payload = [
        {
            "heading_before": e.heading_before,
            "stance_foot": e.stance_foot,
            "turn": e.turn,
            "positioning_label": e.positioning_label,
            "delta_theta_seq": list(e.delta_theta_seq),
            "step_label_seq": list(e.step_label_seq),
            "step_length_seq": list(e.step_length_seq),
        }
        for e in entries
    ]
    with open(path, "w") as fh:
        json.dump({"format": "stepnav-turn-library/1", "entries": payload}, fh,
                  indent=2, sort_keys=True)


def load_turn_library(path) -> list[TurnLibraryEntry]:
    with open(path) as fh:
        doc = json.load(fh)
    return [
        TurnLibraryEntry(
            heading_before=e["heading_before"], stance_foot=e["stance_foot"],
            turn=e["turn"], positioning_label=e["positioning_label"],
            delta_theta_seq=tuple(e["delta_theta_seq"]),
            step_label_seq=tuple(e["step_label_seq"]),
            step_length_seq=tuple(e["step_length_seq"]),
        )
        for e in doc["entries"]
    ]
