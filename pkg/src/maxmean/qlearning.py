"""Tabular Q-learning on small grid worlds with a pluggable max estimator.

RNG protocol for one run (a single ``make_rng(seed)`` stream, per step):
  1. ``rng.random()`` decides exploration; on explore, ``rng.integers(A)``
     picks the action, otherwise the greedy action (lowest index on ties).
  2. ``rng.standard_normal()`` is the step-reward noise.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .arm_stats import ArmSummary, welford_step
from .estimators import EstimatorInput, EstimatorParams, EstimatorKind, estimate
from .mse_lab import fmt
from .seeding import derive_seed, make_rng

BASE_MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1))  # up, down, left, right
METRICS_HEADER = ("trial", "step", "reward", "mean_reward", "start_state_value")


@dataclass(frozen=True)
class GridWorld:
    """Cells are ``row * width + col`` with row 0 on top; start is the
    lower-left cell and the goal the upper-right one. Action ``k`` moves in
    base direction ``k % 4``; off-grid moves leave the agent in place."""

    width: int = 3
    height: int = 3
    terminal_bonus: float = 5.0
    M: int = 1
    noise_sd: float = 1.0

    def __post_init__(self):
        if self.width < 1 or self.height < 1 or self.M < 1:
            raise ValueError("width, height and M must be positive")
        if self.start == self.goal:
            raise ValueError("start and goal coincide")

    @property
    def n_states(self) -> int:
        return self.width * self.height

    @property
    def n_actions(self) -> int:
        return 4 * self.M

    @property
    def start(self) -> int:
        return (self.height - 1) * self.width

    @property
    def goal(self) -> int:
        return self.width - 1

    def move(self, state: int, action: int) -> int:
        if not (0 <= state < self.n_states and 0 <= action < self.n_actions):
            raise IndexError(f"invalid state/action ({state}, {action})")
        dr, dc = BASE_MOVES[action % 4]
        r, c = divmod(state, self.width)
        r = min(max(r + dr, 0), self.height - 1)
        c = min(max(c + dc, 0), self.width - 1)
        return r * self.width + c


def env_step(env: GridWorld, state: int, action: int, rng: np.random.Generator):
    """Returns (next_state, reward, done); consumes one standard normal."""
    nxt = env.move(state, action)
    reward = env.noise_sd * rng.standard_normal()
    done = nxt == env.goal
    if done:
        reward += env.terminal_bonus
    return nxt, float(reward), done


@dataclass
class QAgent:
    n_states: int
    n_actions: int
    alpha: Union[float, str] = 0.1  # constant, or "poly" for n(s,a)^-0.8
    epsilon_greedy: float = 0.1
    eta: float = 0.95
    q_init: float = 0.0
    params: EstimatorParams = field(default_factory=EstimatorParams)
    keep_targets: bool = False  # raw TD targets, needed by the DE plug-in

    def __post_init__(self):
        if not 0 < self.eta < 1:
            raise ValueError("eta must lie in (0, 1)")
        if not 0 <= self.epsilon_greedy <= 1:
            raise ValueError("epsilon_greedy must lie in [0, 1]")
        shape = (self.n_states, self.n_actions)
        self.q = np.full(shape, float(self.q_init))
        self.counts = np.zeros(shape, dtype=np.int64)
        self.t_mean = np.zeros(shape)
        self.t_m2 = np.zeros(shape)
        self.targets = (
            [[[] for _ in range(self.n_actions)] for _ in range(self.n_states)]
            if self.keep_targets else None
        )

    @classmethod
    def for_env(cls, env: GridWorld, **kw) -> "QAgent":
        return cls(env.n_states, env.n_actions, **kw)

    def target_summary(self, s: int, a: int) -> ArmSummary:
        return ArmSummary(int(self.counts[s, a]), float(self.t_mean[s, a]), float(self.t_m2[s, a]))

    def learning_rate(self, s: int, a: int) -> float:
        if self.alpha == "poly":
            return float(self.counts[s, a]) ** -0.8
        return float(self.alpha)

    def act(self, state: int, rng: np.random.Generator) -> int:
        if rng.random() < self.epsilon_greedy:
            return int(rng.integers(self.n_actions))
        return int(np.argmax(self.q[state]))


def estimated_max(agent: QAgent, state: int, estimator: str) -> float:
    """Max-over-actions estimate at ``state``.

    Arm ``a`` has mean Q(state, a) with count and m2 from the observed TD
    targets; unvisited actions are shown as one sample with m2 = 0.
    """
    counts = np.maximum(agent.counts[state], 1)
    if estimator == EstimatorKind.DE.value:
        if agent.targets is None:
            raise ValueError("DE plug-in needs an agent with keep_targets=True")
        raw = []
        for a, ts in enumerate(agent.targets[state]):
            # pad to the 2 samples DE needs with the current Q value
            raw.append(ts + [agent.q[state, a]] * max(0, 2 - len(ts)))
        return estimate(estimator, EstimatorInput.from_samples(raw), agent.params)
    inp = EstimatorInput(counts, agent.q[state], agent.t_m2[state])
    return estimate(estimator, inp, agent.params, best_index=int(np.argmax(agent.q[state])))


def q_update(agent: QAgent, transition, estimator: str) -> float:
    """Apply one update; returns the TD target."""
    s, a, r, nxt, done = transition
    target = r if done else r + agent.eta * estimated_max(agent, nxt, estimator)
    n, mu, m2 = welford_step(int(agent.counts[s, a]), agent.t_mean[s, a], agent.t_m2[s, a], target)
    agent.counts[s, a], agent.t_mean[s, a], agent.t_m2[s, a] = n, mu, m2
    if agent.targets is not None:
        agent.targets[s][a].append(target)
    lr = agent.learning_rate(s, a)
    agent.q[s, a] = agent.q[s, a] + lr * (target - agent.q[s, a])
    return target


@dataclass
class EpisodeMetrics:
    rewards: np.ndarray
    mean_rewards: np.ndarray
    start_values: np.ndarray
    episodes: int

    def final_mean_reward(self, last: int = 1000) -> float:
        return float(self.rewards[-last:].mean())


def run(env: GridWorld, agent: QAgent, total_steps: int, estimator: str, seed: int) -> EpisodeMetrics:
    if total_steps < 1:
        raise ValueError("total_steps must be >= 1")
    rng = make_rng(seed)
    rewards = np.empty(total_steps)
    starts = np.empty(total_steps)
    state, episodes = env.start, 0
    for t in range(total_steps):
        a = agent.act(state, rng)
        nxt, r, done = env_step(env, state, a, rng)
        q_update(agent, (state, a, r, nxt, done), estimator)
        rewards[t] = r
        starts[t] = estimated_max(agent, env.start, estimator)
        if done:
            episodes += 1
            state = env.start
        else:
            state = nxt
    mean_rewards = np.cumsum(rewards) / np.arange(1, total_steps + 1)
    return EpisodeMetrics(rewards, mean_rewards, starts, episodes)


def reference_values(eta: float = 0.95, bonus: float = 5.0) -> dict:
    """Start-state value references at discount depths 3 and 4."""
    return {"depth3": bonus * eta ** 3, "depth4": bonus * eta ** 4}


def run_trials(env: GridWorld, estimator: str, trials: int, total_steps: int, seed: int,
               **agent_kw) -> list[EpisodeMetrics]:
    """Independent runs; trial ``t`` uses seed ``derive_seed(seed, t)``."""
    out = []
    for t in range(trials):
        agent = QAgent.for_env(env, **agent_kw)
        out.append(run(env, agent, total_steps, estimator, derive_seed(seed, t)))
    return out


def export_metrics_csv(metrics: list[EpisodeMetrics], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRICS_HEADER)
        for trial, m in enumerate(metrics):
            for step in range(m.rewards.size):
                w.writerow([trial, step, fmt(m.rewards[step]), fmt(m.mean_rewards[step]),
                            fmt(m.start_values[step])])
