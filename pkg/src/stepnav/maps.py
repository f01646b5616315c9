"""Bundled desk-scale worlds used by scenarios and the test suite."""

from __future__ import annotations

from .games.world import CoarseWorld


def _partition(width, height, static, blocks):
    free = {(x, y) for x in range(width) for y in range(height)} - set(static)
    regions, seen = [], set()
    for b in blocks:
        cells = frozenset(c for c in b if c in free and c not in seen)
        if cells:
            regions.append(cells)
            seen |= cells
    rest = free - seen
    if rest:
        regions.append(frozenset(rest))
    return tuple(regions)


def occluded_corridor_world(radius: float = 1.8) -> CoarseWorld:
    """Wall splits the map with one crossing gap at the top.

    The patrol column on the left must be served while an obstacle roams
    the right side and may slip through the gap.  At this sensing radius a
    could-be-anywhere abstraction freezes the robot, while region tracking
    keeps hidden threats pinned to the far side.
    """
    width, height = 5, 4
    static = {(2, 0), (2, 1), (2, 2)}
    blocks = [
        {(0, 0), (1, 0)}, {(0, 1), (1, 1)}, {(0, 2), (1, 2)},
        {(0, 3), (1, 3)},
        {(2, 3)},
        {(3, 0), (4, 0), (3, 1), (4, 1)},
        {(3, 2), (4, 2), (3, 3), (4, 3)},
    ]
    return CoarseWorld(width=width, height=height,
                       static_obstacles=frozenset(static),
                       goals=((0, 0), (0, 3)), visibility_radius=radius,
                       belief_regions=_partition(width, height, static, blocks))


def interactive_world(radius: float = 2.5) -> CoarseWorld:
    """Open 5x5 map with a center wall; both goal cells on the bottom row.

    Realizable with or without belief tracking; used for episodes and the
    adversary console, where the obstacle actually maneuvers.
    """
    width, height = 5, 5
    static = {(2, 2), (2, 3), (2, 4)}
    blocks = [
        {(x, y) for x in (0, 1) for y in (0, 1, 2)},
        {(x, y) for x in (3, 4) for y in (0, 1, 2)},
        {(2, 0), (2, 1)},
        {(x, y) for x in (0, 1) for y in (3, 4)},
        {(x, y) for x in (3, 4) for y in (3, 4)},
    ]
    return CoarseWorld(width=width, height=height,
                       static_obstacles=frozenset(static),
                       goals=((0, 0), (4, 0)), visibility_radius=radius,
                       belief_regions=_partition(width, height, static, blocks))
