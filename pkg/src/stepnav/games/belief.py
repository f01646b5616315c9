"""Region-granular belief tracking of non-visible dynamic obstacles.

The belief is a set of region indices over-approximating where a hidden
obstacle can be.  Updates follow four transition classes keyed on the
obstacle's visibility before and after a turn; expansion propagates only
through cells that are non-visible from the robot's current position,
because an obstacle cannot cross watched ground unseen.  The same update
rules drive both the online tracker and the game's environment-move
enumeration, so the game transitions and the runtime beliefs agree.
"""

from __future__ import annotations

from .world import Cell, CoarseWorld, visible_set
from ..errors import InconsistentObservation

Belief = frozenset  # of region indices; empty means "obstacle visible"


def _one_move(world: CoarseWorld, cells: set) -> set:
    out = set()
    for c in cells:
        out.update(world.moves_with_stay(c))
    return out


def regions_touching(world: CoarseWorld, cells: set) -> Belief:
    hit = set()
    for i, region in enumerate(world.belief_regions):
        if region & cells:
            hit.add(i)
    return frozenset(hit)


def belief_update(b: Belief, prev_obs: Cell | None, obs: Cell | None,
                  robot_cell: Cell, world: CoarseWorld,
                  conservative: bool = False) -> Belief:
    """Next belief given the previous belief and the new observation.

    prev_obs is the obstacle's cell while it was last visible (None if it
    was already hidden); obs is the current observation (None = hidden);
    visibility is evaluated from robot_cell, the robot's position after
    its own move this turn.  With conservative=True a hidden obstacle is
    assumed able to be in any non-visible cell (no region tracking), which
    is the abstraction the belief construction improves upon.
    """
    visible = visible_set(world, robot_cell)
    nonvis = world.free_cells() - visible

    if obs is not None:
        if not world.is_free(obs):
            raise InconsistentObservation(f"observation {obs} is not a free cell")
        if obs not in visible:
            raise InconsistentObservation(
                f"observation {obs} is not visible from {robot_cell}")
        if b:
            allowed = _one_move(world, world.region_cells(b) if not conservative
                                else nonvis | world.region_cells(b))
            if obs not in allowed:
                raise InconsistentObservation(
                    f"obstacle reappeared at {obs}, unreachable from belief"
                )
        return frozenset()

    if conservative:
        return regions_touching(world, nonvis) or _all_regions(world)

    if not b:
        # visible -> hidden: it slipped from its last seen cell into cover
        if prev_obs is None:
            raise ValueError("hidden obstacle with empty belief and no last "
                             "seen cell")
        candidates = _one_move(world, {prev_obs}) & nonvis
        return regions_touching(world, candidates)

    # hidden -> hidden: expand one obstacle move, landing in unseen ground,
    # then drop regions whose every cell is in view (observed empty)
    src = world.region_cells(b)
    reachable = (src | _one_move(world, src)) & nonvis
    grown = b | regions_touching(world, reachable)
    return frozenset(r for r in grown
                     if world.belief_regions[r] - visible)


def _all_regions(world: CoarseWorld) -> Belief:
    return frozenset(range(len(world.belief_regions)))


def possible_reappearances(b: Belief, robot_cell: Cell, world: CoarseWorld,
                           conservative: bool = False) -> set:
    """Visible cells a hidden obstacle could legally step into this turn."""
    visible = visible_set(world, robot_cell)
    if conservative:
        nonvis = world.free_cells() - visible
        src = nonvis
    else:
        src = world.region_cells(b)
    return (_one_move(world, src) | src) & visible


def can_stay_hidden(b: Belief, robot_cell: Cell, world: CoarseWorld,
                    conservative: bool = False) -> bool:
    """Whether some legal obstacle move keeps it out of sight."""
    visible = visible_set(world, robot_cell)
    nonvis = world.free_cells() - visible
    if conservative:
        return bool(nonvis)
    src = world.region_cells(b)
    return bool((_one_move(world, src) | src) & nonvis)


def unsafe_cells(obs: Cell | None, b: Belief, world: CoarseWorld,
                 conservative: bool = False,
                 robot_cell: Cell | None = None) -> set:
    """Cells a moving robot must not step into this turn.

    The obstacle moves after the robot and is only pledged not to collide
    with a STANDING robot, so a move's target must be unreachable by any
    obstacle move this turn: a visible obstacle blocks its cell plus one
    move around it; a hidden one blocks the same closure of every
    non-visible cell its belief covers (belief cells visible from the
    robot's pre-move position are observably empty).
    """
    out = set()
    if obs is not None:
        out |= _one_move(world, {obs})
    if b:
        covered = (world.free_cells() if conservative
                   else world.region_cells(b))
        if robot_cell is not None:
            covered = covered - visible_set(world, robot_cell)
        out |= covered | _one_move(world, covered)
    return out
