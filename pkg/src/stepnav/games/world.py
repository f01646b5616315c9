"""Coarse grid world: cells, static obstacles, goals, and visibility.

Cells are (col, row) pairs on a width x height grid.  Visibility combines
a sensing radius with line-of-sight occlusion by static cells, both
evaluated between cell centers; the same function serves the planner and
the simulated sensor, so the abstraction is self-consistent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

Cell = tuple[int, int]

CARDINALS = {"N": (0, 1), "E": (1, 0), "S": (0, -1), "W": (-1, 0)}


@dataclass(frozen=True)
class CoarseWorld:
    width: int
    height: int
    cell_size: float = 2.7
    static_obstacles: frozenset = frozenset()
    goals: tuple = ()
    belief_regions: tuple = ()           # tuple of frozensets partitioning free cells
    terrain_height: tuple = ()           # ((cell, height), ...) pairs
    visibility_radius: float = 2.5       # in cells, euclidean between centers
    fine_n: int = 26                     # fine cells per coarse cell side

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("grid dimensions must be positive")
        for c in self.static_obstacles:
            if not self.in_bounds(c):
                raise ValueError(f"static obstacle {c} out of bounds")
        for g in self.goals:
            if not self.in_bounds(g) or g in self.static_obstacles:
                raise ValueError(f"goal {g} unreachable")
        free = self.free_cells()
        if self.belief_regions:
            seen = set()
            for region in self.belief_regions:
                for c in region:
                    if c in seen:
                        raise ValueError(f"cell {c} in two belief regions")
                    seen.add(c)
            if seen != free:
                missing = free - seen
                extra = seen - free
                raise ValueError(
                    f"belief regions must partition free cells "
                    f"(missing {sorted(missing)[:4]}, extra {sorted(extra)[:4]})"
                )

    def in_bounds(self, c: Cell) -> bool:
        return 0 <= c[0] < self.width and 0 <= c[1] < self.height

    def is_free(self, c: Cell) -> bool:
        return self.in_bounds(c) and c not in self.static_obstacles

    def free_cells(self) -> frozenset:
        return frozenset(
            (x, y) for x in range(self.width) for y in range(self.height)
            if (x, y) not in self.static_obstacles
        )

    def neighbors(self, c: Cell):
        for dx, dy in CARDINALS.values():
            n = (c[0] + dx, c[1] + dy)
            if self.is_free(n):
                yield n

    def moves_with_stay(self, c: Cell):
        yield c
        yield from self.neighbors(c)

    def height_of(self, c: Cell) -> float:
        for cell, h in self.terrain_height:
            if tuple(cell) == tuple(c):
                return h
        return 0.0

    def region_of(self, c: Cell) -> int:
        for i, region in enumerate(self.belief_regions):
            if c in region:
                return i
        raise KeyError(f"cell {c} not in any belief region")

    def region_cells(self, idx) -> set:
        out = set()
        for i in idx:
            out |= set(self.belief_regions[i])
        return out


def _cells_on_segment(a: Cell, b: Cell):
    """Exact supercover of the center-to-center segment.

    Every cell the segment touches is included; passing exactly through a
    lattice corner counts as touching all four cells meeting there, so
    there is no peeking diagonally past a wall corner.
    """
    from fractions import Fraction

    ax, ay = 2 * a[0] + 1, 2 * a[1] + 1     # doubled coords: centers are odd
    bx, by = 2 * b[0] + 1, 2 * b[1] + 1
    dx, dy = bx - ax, by - ay
    cells = {a, b}
    ts = {Fraction(0), Fraction(1)}
    if dx:
        step = 1 if dx > 0 else -1
        for gx in range(ax + step, bx, step):
            if gx % 2 == 0:                  # cell boundary in doubled coords
                ts.add(Fraction(gx - ax, dx))
    if dy:
        step = 1 if dy > 0 else -1
        for gy in range(ay + step, by, step):
            if gy % 2 == 0:
                ts.add(Fraction(gy - ay, dy))
    ts = sorted(ts)
    for t0, t1 in zip(ts[:-1], ts[1:]):
        tm = (t0 + t1) / 2
        x = ax + tm * dx
        y = ay + tm * dy
        cells.add((int(x // 2), int(y // 2)))
    for t in ts[1:-1]:
        x = ax + t * dx
        y = ay + t * dy
        # boundary event: include every cell the touch point borders
        xs = [int(x // 2)] if x % 2 else [int(x // 2) - 1, int(x // 2)]
        ys = [int(y // 2)] if y % 2 else [int(y // 2) - 1, int(y // 2)]
        for cx in xs:
            for cy in ys:
                cells.add((cx, cy))
    return cells


def vis(l_rc: Cell, l_o: Cell, world: CoarseWorld) -> bool:
    """True iff l_o is within sensing range of l_rc and not occluded."""
    if not world.in_bounds(l_rc) or not world.in_bounds(l_o):
        raise ValueError("visibility query out of bounds")
    d = math.dist((l_rc[0] + 0.5, l_rc[1] + 0.5), (l_o[0] + 0.5, l_o[1] + 0.5))
    if d > world.visibility_radius:
        return False
    for c in _cells_on_segment(l_rc, l_o):
        if c != l_rc and c != l_o and c in world.static_obstacles:
            return False
    return True


@lru_cache(maxsize=4096)
def _visible_from(world: CoarseWorld, robot: Cell) -> frozenset:
    return frozenset(c for c in world.free_cells() if vis(robot, c, world))


def visible_set(world: CoarseWorld, robot: Cell) -> frozenset:
    """All free cells the robot can currently see (its own cell included)."""
    return _visible_from(world, robot)
