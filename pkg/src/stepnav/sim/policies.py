"""Obstacle movement policies for episodes and the adversary console."""

from __future__ import annotations

import random

from ..games.world import CoarseWorld, Cell


def legal_moves(world: CoarseWorld, cell: Cell, robot_cell: Cell,
                robot_stopped: bool):
    """One-cell moves the obstacle model allows this turn."""
    out = []
    for m in world.moves_with_stay(cell):
        if robot_stopped and m == robot_cell:
            continue
        out.append(m)
    return out


class ScriptedPolicy:
    """Follows a fixed cell path, looping; stays put on illegal hops."""

    kind = "scripted"

    def __init__(self, path, loop: bool = True):
        self.path = [tuple(c) for c in path]
        self.loop = loop
        self._i = 0

    def move(self, world, cell, robot_cell, robot_stopped, rng):
        if not self.path:
            return cell
        target = self.path[self._i % len(self.path)]
        if target == cell:
            self._i += 1
            target = self.path[self._i % len(self.path)]
        step = self._toward(world, cell, target)
        options = legal_moves(world, cell, robot_cell, robot_stopped)
        nxt = step if step in options else cell
        if nxt == target:
            self._i += 1
        return nxt

    @staticmethod
    def _toward(world, cell, target):
        dx = target[0] - cell[0]
        dy = target[1] - cell[1]
        cand = []
        if dx:
            cand.append((cell[0] + (1 if dx > 0 else -1), cell[1]))
        if dy:
            cand.append((cell[0], cell[1] + (1 if dy > 0 else -1)))
        for c in cand:
            if world.is_free(c):
                return c
        return cell


class RandomWalkPolicy:
    """Uniform legal move each turn; never deliberately enters the robot."""

    kind = "random"

    def move(self, world, cell, robot_cell, robot_stopped, rng):
        options = [m for m in legal_moves(world, cell, robot_cell,
                                          robot_stopped) if m != robot_cell]
        return rng.choice(options) if options else cell


class RetreatPolicy:
    """Heads for the free corner farthest from the robot; a fair adversary."""

    kind = "retreat"

    def move(self, world, cell, robot_cell, robot_stopped, rng):
        corners = [(0, 0), (world.width - 1, 0), (0, world.height - 1),
                   (world.width - 1, world.height - 1)]
        free = [c for c in corners if world.is_free(c) and c not in world.goals]
        if not free:
            return cell
        target = max(free, key=lambda c: abs(c[0] - robot_cell[0])
                     + abs(c[1] - robot_cell[1]))
        options = [m for m in legal_moves(world, cell, robot_cell,
                                          robot_stopped) if m != robot_cell]
        if not options:
            return cell
        return min(options, key=lambda m: (abs(m[0] - target[0])
                                           + abs(m[1] - target[1]),
                                           rng.random()))


class HookPolicy:
    """Delegates to a callable (the adversary console); stays on timeout."""

    kind = "hook"

    def __init__(self, fn):
        self.fn = fn

    def move(self, world, cell, robot_cell, robot_stopped, rng):
        options = legal_moves(world, cell, robot_cell, robot_stopped)
        choice = self.fn(cell, robot_cell, options)
        return choice if choice in options else cell


def make_policy(spec: dict | None, rng_seed: int = 0):
    spec = spec or {"kind": "scripted", "path": []}
    kind = spec.get("kind", "scripted")
    if kind == "scripted":
        return ScriptedPolicy(spec.get("path", []), spec.get("loop", True))
    if kind == "random":
        return RandomWalkPolicy()
    if kind == "retreat":
        return RetreatPolicy()
    raise ValueError(f"unknown obstacle policy kind {kind!r}")
