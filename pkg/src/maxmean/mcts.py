"""UCT search on deterministic FrozenLake with estimator-based backups.

Tree layout: each node keeps, per legal action (an "edge"), the summary of the
returns that passed through the edge and the edge's backed-up value. The
value of an edge into a terminal cell (or cut off by the horizon) is the mean
of its returns; the value of any other edge is the estimator applied to the
child node's visited edges. Rollout steps are added to the tree as they are
taken, so every non-terminal edge sees exactly the returns its child sees. With
the average estimator this makes the backup identical to return-averaging UCT.

RNG protocol (one ``make_rng`` stream per planning call): each rollout step
draws ``rng.integers(len(legal_actions))``; tree steps draw nothing.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .arm_stats import ArmSummary, update
from .estimators import EstimatorInput, EstimatorParams, estimate
from .mse_lab import fmt
from .seeding import derive_seed, make_rng

LEFT, DOWN, RIGHT, UP = 0, 1, 2, 3
_MOVES = {LEFT: (0, -1), DOWN: (1, 0), RIGHT: (0, 1), UP: (-1, 0)}
RESULTS_HEADER = ("env", "estimator", "simulations", "trial", "total_reward")

MAPS = {
    "2x2": ("SF", "FG"),
    "4x4": ("SFFF", "FHFH", "FFFH", "HFFG"),
    "8x8": (
        "SFFFFFFF",
        "FFFFFFFF",
        "FFFHFFFF",
        "FFFFFHFF",
        "FFFHFFFF",
        "FHHFFFHF",
        "FHFFHFHF",
        "FFFHFFFG",
    ),
}


@dataclass(frozen=True)
class FrozenLake:
    """Deterministic lake. Cells are ``row * ncol + col``; the legal actions in
    a cell are the moves that stay on the grid."""

    map: tuple
    horizon: int = 40
    goal_reward: float = 10.0

    def __post_init__(self):
        rows = tuple(self.map)
        object.__setattr__(self, "map", rows)
        if len({len(r) for r in rows}) != 1:
            raise ValueError("map rows must have equal length")
        flat = "".join(rows)
        if flat.count("S") != 1 or flat.count("G") != 1:
            raise ValueError("map needs exactly one S and one G")
        if set(flat) - set("SFHG"):
            raise ValueError("map cells must be S, F, H or G")

    @classmethod
    def named(cls, name: str, **kw) -> "FrozenLake":
        return cls(MAPS[name], **kw)

    @property
    def nrow(self) -> int:
        return len(self.map)

    @property
    def ncol(self) -> int:
        return len(self.map[0])

    @property
    def start(self) -> int:
        return "".join(self.map).index("S")

    def cell(self, state: int) -> str:
        r, c = divmod(state, self.ncol)
        return self.map[r][c]

    def is_terminal(self, state: int) -> bool:
        return self.cell(state) in "HG"

    def legal_actions(self, state: int) -> tuple:
        r, c = divmod(state, self.ncol)
        return tuple(
            a for a, (dr, dc) in _MOVES.items()
            if 0 <= r + dr < self.nrow and 0 <= c + dc < self.ncol
        )

    def step(self, state: int, action: int):
        """Returns (next_state, reward, done)."""
        r, c = divmod(state, self.ncol)
        dr, dc = _MOVES[action]
        r2, c2 = r + dr, c + dc
        if not (0 <= r2 < self.nrow and 0 <= c2 < self.ncol):
            raise ValueError(f"action {action} leaves the grid from {state}")
        nxt = r2 * self.ncol + c2
        kind = self.map[r2][c2]
        if kind == "G":
            return nxt, self.goal_reward, True
        return nxt, 0.0, kind == "H"


class SearchNode:
    __slots__ = ("state", "actions", "child_stats", "values", "children")

    def __init__(self, state: int, actions: Sequence[int]):
        self.state = state
        self.actions = tuple(actions)
        k = len(self.actions)
        self.child_stats = [ArmSummary()] * k
        self.values = [0.0] * k
        self.children: list = [None] * k

    @property
    def visit_count(self) -> int:
        return sum(s.count for s in self.child_stats)

    def estimator_input(self) -> EstimatorInput:
        idx = [i for i, s in enumerate(self.child_stats) if s.count > 0]
        return EstimatorInput(
            [self.child_stats[i].count for i in idx],
            [self.values[i] for i in idx],
            [self.child_stats[i].m2 for i in idx],
        )


def argmax_tol(scores: Sequence[float], rtol: float = 1e-9) -> int:
    """Lowest index whose score is within round-off of the maximum."""
    best = max(scores)
    cut = best - rtol * max(1.0, abs(best))
    for i, s in enumerate(scores):
        if s >= cut:
            return i
    raise ValueError("empty scores")


def select_action(node: SearchNode, ucb_c: float) -> int:
    """Edge index chosen by UCB1; unvisited edges first, lowest index."""
    counts = [s.count for s in node.child_stats]
    for i, n in enumerate(counts):
        if n == 0:
            return i
    log_total = math.log(sum(counts))
    return argmax_tol(
        [v + ucb_c * math.sqrt(log_total / n) for v, n in zip(node.values, counts)]
    )


def _rollout_path(env: FrozenLake, state: int, horizon_left: int, rng):
    steps = []
    ret = 0.0
    while horizon_left > 0 and not env.is_terminal(state):
        legal = env.legal_actions(state)
        idx = int(rng.integers(len(legal)))
        steps.append((state, idx))
        state, r, done = env.step(state, legal[idx])
        horizon_left -= 1
        if done:
            ret = r
            break
    return steps, ret


def rollout(env: FrozenLake, state: int, horizon_left: int, rng) -> float:
    """Uniform-random playout; returns the goal reward if reached, else 0."""
    return _rollout_path(env, state, horizon_left, rng)[1]


def node_value(node: SearchNode, estimator: str, params: EstimatorParams) -> float:
    inp = node.estimator_input()
    best = argmax_tol(inp.means.tolist())
    return estimate(estimator, inp, params, best_index=best)


def backup(path, ret: float, estimator: str, params: EstimatorParams = EstimatorParams()) -> None:
    """Propagate ``ret`` from the last edge of ``path`` up to the root."""
    for node, idx in reversed(path):
        stats = update(node.child_stats[idx], ret)
        node.child_stats[idx] = stats
        child = node.children[idx]
        if child is None:
            node.values[idx] = stats.mean
        else:
            node.values[idx] = node_value(child, estimator, params)


def _simulate(env, root, horizon_left, ucb_c, rng):
    path = []
    node, left = root, horizon_left
    while True:
        idx = select_action(node, ucb_c)
        path.append((node, idx))
        nxt, r, done = env.step(node.state, node.actions[idx])
        left -= 1
        if done or left == 0:
            return path, r
        child = node.children[idx]
        if child is None:
            break
        node = child
    # leaf expansion: the playout is added to the tree edge by edge
    child = node.children[idx] = SearchNode(nxt, env.legal_actions(nxt))
    steps, ret = _rollout_path(env, nxt, left, rng)
    last = len(steps) - 1
    for k, (state, i) in enumerate(steps):
        path.append((child, i))
        if k == last:  # ends in a terminal cell or at the horizon
            break
        nxt = env.step(state, child.actions[i])[0]
        child.children[i] = SearchNode(nxt, env.legal_actions(nxt))
        child = child.children[i]
    return path, ret


def plan(
    env: FrozenLake,
    root_state: int,
    simulations: int,
    estimator: str,
    seed: int,
    *,
    horizon_left: Optional[int] = None,
    ucb_c: float = 10.0 * math.sqrt(2.0),
    params: EstimatorParams = EstimatorParams(),
    return_root: bool = False,
):
    """Run ``simulations`` select/expand/rollout/backup cycles from a fresh
    tree; return the root action with the largest backed-up value."""
    if simulations < 1:
        raise ValueError("simulations must be >= 1")
    horizon_left = env.horizon if horizon_left is None else horizon_left
    rng = make_rng(seed)
    root = SearchNode(root_state, env.legal_actions(root_state))
    for _ in range(simulations):
        path, ret = _simulate(env, root, horizon_left, ucb_c, rng)
        backup(path, ret, estimator, params)
    visited = [i for i, s in enumerate(root.child_stats) if s.count > 0]
    best = visited[argmax_tol([root.values[i] for i in visited])]
    action = root.actions[best]
    return (action, root) if return_root else action


def run_episode(
    env: FrozenLake,
    simulations: int,
    estimator: str,
    seed: int,
    *,
    ucb_c: float = 10.0 * math.sqrt(2.0),
    params: EstimatorParams = EstimatorParams(),
    trace: Optional[list] = None,
) -> float:
    """Replan every step from scratch; step ``t`` plans with
    ``derive_seed(seed, t)``. Returns the goal reward or 0."""
    state = env.start
    for t in range(env.horizon):
        a = plan(env, state, simulations, estimator, derive_seed(seed, t),
                 horizon_left=env.horizon - t, ucb_c=ucb_c, params=params)
        if trace is not None:
            trace.append(a)
        state, r, done = env.step(state, a)
        if done:
            return r
    return 0.0


def run_trials(env_name: str, estimator: str, simulations: int, trials: int, seed: int,
               **kw) -> list[float]:
    env = FrozenLake.named(env_name)
    return [
        run_episode(env, simulations, estimator, derive_seed(seed, t), **kw)
        for t in range(trials)
    ]


def export_results_csv(rows, path) -> None:
    """``rows``: iterables of (env, estimator, simulations, trial, total_reward)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULTS_HEADER)
        for env, est, sims, trial, reward in rows:
            w.writerow([env, est, sims, trial, fmt(reward)])
