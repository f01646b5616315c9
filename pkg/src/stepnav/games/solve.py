"""Explicit-state reactive synthesis by the three-nested fixpoint.

Winning condition: if every environment fairness set recurs forever, then
every system goal set recurs forever (in round-robin order).  The solver
computes

    Z = nu Z . AND_j  mu Y . OR_i  nu X .
        (goal_j & CPre(Z))  |  CPre(Y)  |  (~fair_i & CPre(X))

over the explicit game graph, where CPre(W) holds at states with some
action whose every environment outcome stays in W.  The extracted strategy
carries one memory value (the goal currently pursued) and, per state, an
action that either hits the goal and advances the memory, strictly
decreases the distance-to-goal ranking, or waits while a fairness set is
violated (which cannot last forever on a fair play).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .build import GameSpec
from ..errors import OffStrategy


@dataclass
class _Csr:
    """Flattened (state, action) pairs with environment outcomes."""

    pair_state: np.ndarray    # state index per pair
    pair_action: np.ndarray   # action position within the state's list
    indptr: np.ndarray        # CSR offsets into indices
    indices: np.ndarray       # concatenated successor state indices
    counts: np.ndarray        # successors per pair

    @classmethod
    def from_game(cls, game: GameSpec) -> "_Csr":
        ps, pa, ind, ptr = [], [], [], [0]
        for s, outs in enumerate(game.succ):
            for a, succs in enumerate(outs):
                if not succs:
                    raise ValueError(
                        f"action {a} of state {s} has no outcomes; the "
                        "environment player would deadlock")
                ps.append(s)
                pa.append(a)
                ind.extend(succs)
                ptr.append(len(ind))
        return cls(
            pair_state=np.asarray(ps, dtype=np.int32),
            pair_action=np.asarray(pa, dtype=np.int32),
            indptr=np.asarray(ptr, dtype=np.int64),
            indices=np.asarray(ind, dtype=np.int32),
            counts=np.diff(np.asarray(ptr, dtype=np.int64)).astype(np.int32),
        )

    def pairs_all_in(self, w: np.ndarray) -> np.ndarray:
        if len(self.indices) == 0:
            return np.zeros(0, dtype=bool)
        sums = np.add.reduceat(w[self.indices].astype(np.int32),
                               self.indptr[:-1])
        return sums == self.counts

    def cpre(self, w: np.ndarray, n_states: int) -> np.ndarray:
        ok = self.pairs_all_in(w)
        out = np.zeros(n_states, dtype=bool)
        np.logical_or.at(out, self.pair_state[ok], True)
        return out

    def choose_action(self, s: int, w: np.ndarray) -> int | None:
        """First action of s whose outcomes all lie in w."""
        mask = self.pair_state == s
        for pair in np.flatnonzero(mask):
            lo, hi = self.indptr[pair], self.indptr[pair + 1]
            if w[self.indices[lo:hi]].all():
                return int(self.pair_action[pair])
        return None


@dataclass
class Unrealizable:
    winning: np.ndarray
    losing_inits: list
    kind: str = "unrealizable"


@dataclass
class Strategy:
    game: GameSpec
    winning: np.ndarray
    n_goals: int
    table: dict = field(default_factory=dict)  # (state_idx, goal) -> (action_idx, advance)

    def action_at(self, state, memory: int):
        idx = self.game.index.get(state)
        if idx is None:
            raise OffStrategy(f"state {state!r} is not part of the game")
        key = (idx, memory)
        if key not in self.table:
            raise OffStrategy(f"no strategy entry for state {state!r}")
        a, advance = self.table[key]
        label = self.game.actions[idx][a]
        return label, (memory + 1) % self.n_goals if advance else memory

    def to_json(self) -> str:
        return json.dumps({
            "n_goals": self.n_goals,
            "winning": np.flatnonzero(self.winning).tolist(),
            "table": {f"{s},{m}": [a, int(adv)]
                      for (s, m), (a, adv) in sorted(self.table.items())},
        }, sort_keys=True)


def strategy_step(strategy: Strategy, memory: int, env_observation):
    """System action for the observed state; advances the goal memory."""
    label, memory2 = strategy.action_at(env_observation, memory)
    return label, memory2


def validate_env_move(game: GameSpec, state, action_label, next_state) -> bool:
    """Whether next_state is a modeled outcome of playing the action."""
    i = game.index.get(state)
    j = game.index.get(next_state)
    if i is None or j is None:
        return False
    try:
        a = game.actions[i].index(action_label)
    except ValueError:
        return False
    return j in game.succ[i][a]


def _solve_fixpoint(game: GameSpec, csr: _Csr):
    n = game.n_states
    goals = game.sys_live or [np.ones(n, dtype=bool)]
    fairs = game.env_live or [np.ones(n, dtype=bool)]
    z = np.ones(n, dtype=bool)
    while True:
        z_prev = z.copy()
        for goal in goals:
            pre_z = csr.cpre(z, n)
            base = goal & pre_z
            y = np.zeros(n, dtype=bool)
            while True:
                pre_y = csr.cpre(y, n)
                start = base | pre_y
                y_new = start.copy()
                for fair in fairs:
                    x = z.copy()
                    while True:
                        x_new = start | (~fair & csr.cpre(x, n))
                        if (x_new == x).all():
                            break
                        x = x_new
                    y_new |= x
                if (y_new == y).all():
                    break
                y = y_new
            z = z & y
        if (z == z_prev).all():
            return z


def _extract_strategy(game: GameSpec, csr: _Csr, z: np.ndarray) -> Strategy:
    n = game.n_states
    goals = game.sys_live or [np.ones(n, dtype=bool)]
    fairs = game.env_live or [np.ones(n, dtype=bool)]
    strat = Strategy(game=game, winning=z, n_goals=len(goals))
    pre_z = csr.cpre(z, n)
    for j, goal in enumerate(goals):
        base = goal & pre_z & z
        # layer 0: goal states; commit into Z and advance the memory
        for s in np.flatnonzero(base):
            a = csr.choose_action(int(s), z)
            if a is not None:
                strat.table[(int(s), j)] = (a, True)
        assigned = base.copy()
        # fairness-independent ranking first: these rows force progress to
        # the goal no matter what the environment does, so prefer them over
        # waiting on a violated fairness set
        y = base.copy()
        while True:
            grew = (base | csr.cpre(y, n)) & z & ~y
            if not grew.any():
                break
            for s in np.flatnonzero(grew & ~assigned):
                a = csr.choose_action(int(s), y)
                if a is not None:
                    strat.table[(int(s), j)] = (a, False)
                    assigned[s] = True
            y |= grew
        y = base.copy()
        while True:
            pre_y = csr.cpre(y, n)
            start = base | pre_y
            y_new = start.copy()
            x_stars = []
            for fair in fairs:
                x = z.copy()
                while True:
                    x_new = start | (~fair & csr.cpre(x, n))
                    if (x_new == x).all():
                        break
                    x = x_new
                x_stars.append(x)
                y_new |= x
            grew = y_new & ~y
            if not grew.any():
                break
            # progress rows: step strictly down the ranking
            for s in np.flatnonzero(grew & pre_y & ~assigned):
                a = csr.choose_action(int(s), y)
                if a is not None:
                    strat.table[(int(s), j)] = (a, False)
                    assigned[s] = True
            # unfair stretches: descend toward the progress set where that
            # is forcible, so a blocked robot still closes in; only states
            # with no such descent get pure waiting rows
            for fair, x_star in zip(fairs, x_stars):
                xl = start & x_star
                while True:
                    ring = (~fair) & csr.cpre(xl, n) & x_star & ~xl
                    if not ring.any():
                        break
                    for s in np.flatnonzero(ring & grew & ~assigned):
                        a = csr.choose_action(int(s), xl)
                        if a is not None:
                            strat.table[(int(s), j)] = (a, False)
                            assigned[s] = True
                    xl = xl | ring
                for s in np.flatnonzero(grew & ~fair & ~assigned & x_star):
                    a = csr.choose_action(int(s), x_star)
                    if a is not None:
                        strat.table[(int(s), j)] = (a, False)
                        assigned[s] = True
            y = y_new
        # anything winning but unassigned (unreachable corner cases): hold Z
        for s in np.flatnonzero(z & ~assigned):
            a = csr.choose_action(int(s), z)
            if a is not None:
                strat.table[(int(s), j)] = (a, False)
    return strat


def gr1_synthesize(game: GameSpec):
    """Winning strategy for the game, or an Unrealizable verdict."""
    csr = _Csr.from_game(game)
    z = _solve_fixpoint(game, csr)
    losing = [game.states[i] for i in game.inits if not z[i]]
    if losing:
        return Unrealizable(winning=z, losing_inits=losing)
    return _extract_strategy(game, csr, z)
