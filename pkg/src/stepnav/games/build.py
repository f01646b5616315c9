"""Explicit two-player game construction for navigation and action layers.

A game is a finite graph: in each round the system picks an action and the
environment resolves it to one of the action's modeled outcomes.  Safety
is compiled away (illegal moves simply don't exist in the graph), so the
solver only reasons about liveness: environment fairness sets that must
recur for the obstacle model, and system goal sets to visit in order.

The navigation game plays robot-cell moves against a one-cell-per-turn
obstacle, either fully observed, belief-tracked by regions, or with the
conservative could-be-anywhere abstraction.  The action game plays
per-walking-step waypoint moves (step-length labels, heading changes, and
a sideways aim of one fine cell) against the modeled non-deterministic
outcomes of real steps inside one coarse cell.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .belief import (
    belief_update,
    can_stay_hidden,
    possible_reappearances,
    unsafe_cells,
)
from .world import CARDINALS, Cell, CoarseWorld, vis, visible_set
from ..safety import STRAIGHT_LABEL_METERS, TURNING_LABEL_METERS

NAV_ACTIONS = ("stop", "N", "E", "S", "W")


@dataclass
class GameSpec:
    states: list
    actions: list                    # per state: list of action labels
    succ: list                       # per state, per action: list of state indices
    sys_live: list                   # list of bool arrays (goal sets, in order)
    env_live: list                   # list of bool arrays (fairness sets)
    inits: list
    kind: str = "nav"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.index = {s: i for i, s in enumerate(self.states)}

    @property
    def n_states(self) -> int:
        return len(self.states)

    def action_labels(self, state) -> list:
        return self.actions[self.index[state]]

    def to_json(self) -> str:
        return json.dumps({
            "kind": self.kind,
            "states": [_state_to_json(s) for s in self.states],
            "actions": [[str(a) for a in acts] for acts in self.actions],
            "succ": self.succ,
            "sys_live": [np.flatnonzero(g).tolist() for g in self.sys_live],
            "env_live": [np.flatnonzero(g).tolist() for g in self.env_live],
            "inits": self.inits,
            "meta": self.meta,
        }, sort_keys=True)


def _state_to_json(s):
    if isinstance(s, tuple):
        return [_state_to_json(x) for x in s]
    if isinstance(s, frozenset):
        return {"set": sorted(s)}
    return s


def _obstacle_moves(world: CoarseWorld, cell: Cell, robot_after: Cell,
                    robot_stopped: bool):
    for m in world.moves_with_stay(cell):
        if robot_stopped and m == robot_after:
            continue  # pledged not to collide with a standing robot
        yield m


def _nav_env_outcomes(world, r_new, robot_stopped, obs_tuple, belief,
                      conservative):
    """All (obs_tuple', belief') the environment может produce this turn."""
    per_obstacle = []
    visible_new = visible_set(world, r_new)
    for o in obs_tuple:
        choices = []
        if o is not None:
            hid = False
            for m in _obstacle_moves(world, o, r_new, robot_stopped):
                if m in visible_new:
                    choices.append(("vis", m, o))
                else:
                    hid = True
            if hid:
                choices.append(("hide", None, o))
        else:
            if can_stay_hidden(belief, r_new, world, conservative):
                choices.append(("stay-hidden", None, None))
            for c in sorted(possible_reappearances(belief, r_new, world,
                                                   conservative)):
                if robot_stopped and c == r_new:
                    continue
                choices.append(("vis", c, None))
        per_obstacle.append(choices)

    outcomes = set()
    for combo in itertools.product(*per_obstacle):
        new_obs = tuple(c[1] for c in combo)
        any_hidden = any(v is None for v in new_obs)
        if not any_hidden:
            outcomes.add((new_obs, frozenset()))
            continue
        b = frozenset()
        if any(kind == "stay-hidden" for kind, _, _ in combo):
            b = belief_update(belief, None, None, r_new, world, conservative)
        for kind, _, prev_cell in combo:
            if kind == "hide":
                b |= belief_update(frozenset(), prev_cell, None, r_new, world,
                                   conservative)
        outcomes.add((new_obs, b))
    return sorted(outcomes, key=repr)


def build_nav_game(world: CoarseWorld, obstacle_inits, robot_init: Cell,
                   belief: bool = True, conservative: bool = False,
                   independent_beliefs: bool = False) -> GameSpec:
    """Coarse navigation game against one or more dynamic obstacles.

    belief=True tracks hidden obstacles at region granularity (one joint
    belief for all of them unless independent_beliefs is set, which tracks
    one belief per obstacle purely for cost comparison); conservative=True
    keeps the belief machinery but lets a hidden obstacle be anywhere
    non-visible.  With no occlusion the three coincide.

    States are (robot, obs-tuple, belief); obstacle entries are cells when
    visible and None when hidden.  System liveness: visit the world's goal
    cells in order, forever.  Environment fairness: the obstacle is not
    visibly crowding the robot (within one move of it), infinitely often.
    """
    if not belief and not conservative:
        conservative = True  # "no belief" means could-be-anywhere
    obstacle_inits = [tuple(c) for c in obstacle_inits]
    if len(world.goals) < 2:
        raise ValueError("navigation game needs two ordered goal cells")

    if independent_beliefs:
        return _build_nav_game_indep(world, obstacle_inits, robot_init,
                                     conservative)

    init = _initial_state(world, robot_init, obstacle_inits, conservative)
    states = [init]
    index = {init: 0}
    stack = [init]
    all_actions, all_succ = {}, {}
    while stack:
        s = stack.pop()
        r, obs_tuple, b = s
        danger = unsafe_cells(None, b, world, conservative, robot_cell=r)
        for o in obs_tuple:
            if o is not None:
                danger |= unsafe_cells(o, frozenset(), world, conservative,
                                       robot_cell=r)
        acts, outs = [], []
        for a in NAV_ACTIONS:
            if a == "stop":
                r_new = r
            else:
                dx, dy = CARDINALS[a]
                r_new = (r[0] + dx, r[1] + dy)
                if not world.is_free(r_new) or r_new in danger:
                    continue
            outcomes = _nav_env_outcomes(world, r_new, a == "stop", obs_tuple,
                                         b, conservative)
            if not outcomes:
                continue
            idxs = []
            for new_obs, new_b in outcomes:
                t = (r_new, new_obs, new_b)
                if t not in index:
                    index[t] = len(states)
                    states.append(t)
                    stack.append(t)
                idxs.append(index[t])
            acts.append(a)
            outs.append(sorted(set(idxs)))
        all_actions[index[s]] = acts
        all_succ[index[s]] = outs
    actions = [all_actions.get(i, []) for i in range(len(states))]
    succ = [all_succ.get(i, []) for i in range(len(states))]

    sys_live = []
    for goal in world.goals[:2]:
        g = np.array([s[0] == tuple(goal) for s in states], dtype=bool)
        sys_live.append(g)
    env_live = [_not_crowding_mask(world, states, belief_aware=not conservative)]
    return GameSpec(states=states, actions=actions, succ=succ,
                    sys_live=sys_live, env_live=env_live,
                    inits=[0], kind="nav-belief" if not conservative else
                    "nav-conservative",
                    meta={"n_obstacles": len(obstacle_inits)})


def _initial_state(world, robot_init, obstacle_inits, conservative):
    """Known a-priori obstacle locations, folded to hidden where unseen."""
    r = tuple(robot_init)
    visible = visible_set(world, r)
    obs, hidden_cells = [], set()
    for o in obstacle_inits:
        if tuple(o) in visible:
            obs.append(tuple(o))
        else:
            obs.append(None)
            hidden_cells.add(tuple(o))
    if not hidden_cells:
        return (r, tuple(obs), frozenset())
    if conservative:
        from .belief import regions_touching
        b = regions_touching(world, world.free_cells() - visible)
    else:
        from .belief import regions_touching
        b = regions_touching(world, hidden_cells)
    return (r, tuple(obs), b)


def _crowds(world, r, cells) -> bool:
    """Whether any cell's one-move closure touches the robot's vicinity."""
    from .belief import _one_move
    vicinity = set(world.moves_with_stay(r))
    return bool((_one_move(world, set(cells)) | set(cells)) & vicinity)


def _not_crowding_mask(world, states, belief_aware: bool) -> np.ndarray:
    # "out of the way" fairness: the obstacle's possible positions stop
    # obstructing the robot's vicinity infinitely often.  The no-belief
    # abstraction cannot express where a hidden obstacle is, so only a
    # visible obstacle counts as being in the way there.
    out = np.zeros(len(states), dtype=bool)
    for i, (r, obs_tuple, b) in enumerate(states):
        cells = {o for o in obs_tuple if o is not None}
        crowding = _crowds(world, r, cells)
        if belief_aware and b and not crowding:
            from .world import visible_set
            covered = world.region_cells(b) - visible_set(world, r)
            crowding = _crowds(world, r, covered)
        out[i] = not crowding
    return out


def _build_nav_game_indep(world, obstacle_inits, robot_init, conservative):
    """Variant tracking a separate belief per obstacle (baseline for cost)."""
    init = (tuple(robot_init),
            tuple((tuple(o), frozenset()) for o in obstacle_inits))
    states, actions, succ = [init], [], []
    index = {init: 0}
    stack = [init]
    all_actions, all_succ = {}, {}
    while stack:
        s = stack.pop()
        r, obs_entries = s
        danger = set()
        for o, b in obs_entries:
            danger |= unsafe_cells(o, b, world, conservative, robot_cell=r)
        acts, outs = [], []
        for a in NAV_ACTIONS:
            if a == "stop":
                r_new = r
            else:
                dx, dy = CARDINALS[a]
                r_new = (r[0] + dx, r[1] + dy)
                if not world.is_free(r_new) or r_new in danger:
                    continue
            per_entry = []
            for o, b in obs_entries:
                entry_choices = []
                for new_obs, new_b in _nav_env_outcomes(
                        world, r_new, a == "stop", (o,), b, conservative):
                    entry_choices.append((new_obs[0], new_b))
                per_entry.append(entry_choices)
            if not all(per_entry):
                continue
            idxs = []
            for combo in itertools.product(*per_entry):
                t = (r_new, tuple(combo))
                if t not in index:
                    index[t] = len(states)
                    states.append(t)
                    stack.append(t)
                idxs.append(index[t])
            acts.append(a)
            outs.append(sorted(set(idxs)))
        all_actions[index[s]] = acts
        all_succ[index[s]] = outs
    actions = [all_actions[i] for i in range(len(states))]
    succ = [all_succ[i] for i in range(len(states))]
    sys_live = [np.array([s[0] == tuple(g) for s in states], dtype=bool)
                for g in world.goals[:2]]
    env_live = [np.array([
        not _crowds(world, s[0], {o for o, _b in s[1] if o is not None})
        for s in states], dtype=bool)]
    return GameSpec(states=states, actions=actions, succ=succ,
                    sys_live=sys_live, env_live=env_live, inits=[0],
                    kind="nav-independent-beliefs",
                    meta={"n_obstacles": len(obstacle_inits)})


def build_belief_game(world: CoarseWorld, obstacle_inits,
                      robot_init: Cell) -> GameSpec:
    """Belief-tracked navigation game (joint belief over all obstacles)."""
    return build_nav_game(world, obstacle_inits, robot_init, belief=True,
                          conservative=False)


# --- action game -----------------------------------------------------------

HEADINGS = 16                    # 22.5-degree increments, 0 = +x (east)
CARDINAL_HEADING = {"E": 0, "N": 4, "W": 8, "S": 12}
T_ND = ("nominal", "forward", "backward")

EXIT = "EXIT"


def _heading_vec(h: int) -> tuple[float, float]:
    a = math.radians(22.5 * h)
    return math.cos(a), math.sin(a)


def toward_stance_of(direction: str) -> int:
    """Stance index from which a turn in this direction starts (0=L, 1=R)."""
    return 1 if direction == "left" else 0


def resolve_step_action(state, act, config: "ActionGameConfig"):
    """Concrete keyframe parameters for a stepping action at a game state.

    Returns (new_pos, new_heading, new_stance, new_commit, d_meters,
    delta_theta_rad, label).
    """
    pos, h, stance, _t_nd, _commit = state
    if act[0] == "straight":
        _, lb, nudge = act
        d_m = STRAIGHT_LABEL_METERS[lb]
        dx, dy = _step_cells(d_m, h, config.fine_size)
        px, py = _perp(h)
        new = (pos[0] + dx + nudge * px, pos[1] + dy + nudge * py)
        return new, h, 1 - stance, 0, d_m, 0.0, lb
    _, direction, nudge = act
    sgn = 1 if direction == "left" else -1
    new_h = (h + sgn) % HEADINGS
    lb = "medium2" if stance == toward_stance_of(direction) else "small2"
    d_m = TURNING_LABEL_METERS[lb]
    dx, dy = _step_cells(d_m, new_h, config.fine_size)
    px, py = _perp(new_h)
    new = (pos[0] + dx + nudge * px, pos[1] + dy + nudge * py)
    new_commit = 0 if new_h % 4 == 0 else (1 if sgn > 0 else 2)
    return new, new_h, 1 - stance, new_commit, d_m, sgn * math.radians(22.5), lb


def _step_cells(label_m: float, h: int, fine_size: float) -> tuple[int, int]:
    ux, uy = _heading_vec(h)
    cells = label_m / fine_size
    return int(round(cells * ux)), int(round(cells * uy))


def _perp(h: int) -> tuple[int, int]:
    ux, uy = _heading_vec(h)
    px, py = -uy, ux
    return int(round(px)), int(round(py))


@dataclass(frozen=True)
class ActionGameConfig:
    fine_n: int = 26
    cell_size: float = 2.7
    boundary_cells: int = 5          # keep-out width along unsafe borders
    exit_halfwidth: int = 2          # lateral tolerance at the crossing
    entry_halfwidth: int = 3         # must cover the exit band of the previous cell
    straight_labels: tuple = ("small2", "medium2", "large1", "large2")

    @property
    def fine_size(self) -> float:
        return self.cell_size / self.fine_n


def build_action_game(command: str, entry_heading: str,
                      config: ActionGameConfig | None = None,
                      unsafe_borders: frozenset | None = None,
                      terrain_step: float = 0.0) -> GameSpec:
    """Per-coarse-cell stepping game: reach the commanded border band.

    States are (waypoint fine cell, heading sixteenth, stance, nd-flag,
    turn commitment).  System actions: straight steps of a labeled length
    with a sideways aim of one fine cell, or starting/continuing a turn
    (a turn may start only with the stance foot opposite the turn, so a
    matching-stance command first takes a short straight positioning
    step).  The environment may shift the outcome one cell sideways or
    flag a sagittal forward/backward relocation.  Crossing the commanded
    border inside the exit band wins; cells within the keep-out width of
    an unsafe border are not part of the game.
    """
    config = config or ActionGameConfig()
    entry_border = {"E": "W", "W": "E", "N": "S", "S": "N"}[entry_heading]
    if unsafe_borders is None:
        unsafe_borders = frozenset(d for d in CARDINALS
                                   if d not in (command, entry_border))
    n = config.fine_n
    bc = config.boundary_cells
    h_cmd = CARDINAL_HEADING[command]
    h_entry = CARDINAL_HEADING[entry_heading]

    lo = {d: bc if d in unsafe_borders else -1
          for d in ("W", "S")}
    hi = {d: n - 1 - bc if d in unsafe_borders else n
          for d in ("E", "N")}

    def in_play(pos) -> bool:
        x, y = pos
        return (lo["W"] <= x <= hi["E"] and lo["S"] <= y <= hi["N"])

    cmd_axis = 0 if command in ("E", "W") else 1
    cmd_sign = 1 if command in ("E", "N") else -1

    def crossed(pos) -> bool:
        v = pos[cmd_axis]
        return v > n - 1 if cmd_sign > 0 else v < 0

    def exit_ok(pos) -> bool:
        center = (n - 1) / 2
        off = pos[1 - cmd_axis] - center
        return abs(off) <= config.exit_halfwidth + 0.5

    def turn_dir_sign(direction: str) -> int:
        return 1 if direction == "left" else -1

    def toward_stance(direction: str) -> int:
        # turning left needs right stance (CoM hanging into the turn)
        return 1 if direction == "left" else 0

    labels_turn = ("medium2", "small2")   # toward then away, alternating

    def legal_actions(state):
        pos, h, stance, t_nd, commit = state
        acts = []
        if commit == 0:
            if h % 4 == 0:
                for lb in config.straight_labels:
                    for nudge in (-1, 0, 1):
                        acts.append(("straight", lb, nudge))
                for direction in ("left", "right"):
                    if stance == toward_stance(direction):
                        for nudge in (-1, 0, 1):
                            acts.append(("turn", direction, nudge))
        else:
            direction = "left" if commit == 1 else "right"
            for nudge in (-1, 0, 1):
                acts.append(("turn", direction, nudge))
        return acts

    def apply_action(state, act):
        pos, h, stance, t_nd, commit = state
        kind = act[0]
        if kind == "straight":
            _, lb, nudge = act
            d_m = STRAIGHT_LABEL_METERS[lb]
            dx, dy = _step_cells(d_m, h, config.fine_size)
            px, py = _perp(h)
            base = (pos[0] + dx + nudge * px, pos[1] + dy + nudge * py)
            new_h, new_commit = h, 0
        else:
            _, direction, nudge = act
            sgn = turn_dir_sign(direction)
            new_h = (h + sgn) % HEADINGS
            lb = labels_turn[0] if stance == toward_stance(direction) \
                else labels_turn[1]
            d_m = TURNING_LABEL_METERS[lb]
            dx, dy = _step_cells(d_m, new_h, config.fine_size)
            px, py = _perp(new_h)
            base = (pos[0] + dx + nudge * px, pos[1] + dy + nudge * py)
            new_commit = 0 if new_h % 4 == 0 else (1 if sgn > 0 else 2)
        new_stance = 1 - stance
        return base, new_h, new_stance, new_commit

    def env_outcomes(state, act, base, new_h, new_stance, new_commit):
        pos, h, stance, t_nd, commit = state
        px, py = _perp(new_h)
        ux, uy = _step_cells(config.fine_size * 1.0, new_h, config.fine_size)
        outs = []
        variants = [
            (base, "nominal"),
            ((base[0] + px, base[1] + py), "nominal"),
            ((base[0] - px, base[1] - py), "nominal"),
            ((base[0] + ux, base[1] + uy), "forward"),
            ((base[0] - ux, base[1] - uy), "backward"),
        ]
        for p, flag in variants:
            if crossed(p):
                if exit_ok(p) and new_h == h_cmd:
                    outs.append(EXIT)
                else:
                    return None  # may overshoot outside the exit band
            elif in_play(p):
                outs.append((p, new_h, new_stance, T_ND.index(flag),
                             new_commit))
            else:
                return None      # may land in a keep-out band
        return outs

    center = (n - 1) // 2
    entry_pos = []
    # entry along the border the robot walks in from, facing entry_heading
    ex, ey = CARDINALS[entry_heading]
    start_x = 0 if ex > 0 else (n - 1 if ex < 0 else center)
    start_y = 0 if ey > 0 else (n - 1 if ey < 0 else center)
    for off in range(-config.entry_halfwidth, config.entry_halfwidth + 1):
        if ex != 0:
            p = (start_x, center + off)
        else:
            p = (center + off, start_y)
        for stance in (0, 1):
            entry_pos.append((p, h_entry, stance, 0, 0))

    states, actions, succ = [], [], []
    index = {}
    stack = []
    for s in entry_pos:
        if s not in index and in_play(s[0]):
            index[s] = len(states)
            states.append(s)
            stack.append(s)
    if not states:
        raise ValueError(
            f"no entry state lies inside the playable area for command "
            f"{command} entered heading {entry_heading}"
        )
    if EXIT not in index:
        index[EXIT] = len(states)
        states.append(EXIT)
    all_actions = {index[EXIT]: ["stay"]}
    all_succ = {index[EXIT]: [[index[EXIT]]]}
    while stack:
        s = stack.pop()
        acts, outs = [], []
        for act in legal_actions(s):
            applied = apply_action(s, act)
            outcome = env_outcomes(s, act, *applied)
            if not outcome:
                continue
            idxs = []
            for t in outcome:
                if t not in index:
                    index[t] = len(states)
                    states.append(t)
                    stack.append(t)
                idxs.append(index[t])
            acts.append(act)
            outs.append(sorted(set(idxs)))
        all_actions[index[s]] = acts
        all_succ[index[s]] = outs
    actions = [all_actions.get(i, []) for i in range(len(states))]
    succ = [all_succ.get(i, []) for i in range(len(states))]
    goal = np.zeros(len(states), dtype=bool)
    goal[index[EXIT]] = True
    return GameSpec(states=states, actions=actions, succ=succ,
                    sys_live=[goal], env_live=[],
                    inits=[index[s] for s in entry_pos if s in index],
                    kind="action",
                    meta={"command": command, "entry_heading": entry_heading,
                          "boundary_cells": bc})
