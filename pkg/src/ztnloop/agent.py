"""Tabular Q-learning over discretized bandwidth states and shaping actions.

Episodes replay a state series in order: epsilon-greedy selection, reward
-(expected - achieved)^2, Bellman update toward r + gamma * max next-state
value, multiplicative epsilon decay with a floor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import NetworkState
from .errors import ConfigError, DataError, InsufficientDataError


@dataclass(frozen=True)
class AgentParams:
    learning_rate: float = 0.1
    discount: float = 0.9
    epsilon_start: float = 1.0
    epsilon_end: float = 0.01
    epsilon_decay: float = 0.995
    episodes: int = 40_000

    def __post_init__(self):
        if not 0 < self.learning_rate <= 1:
            raise ConfigError(f"learning_rate must be in (0, 1], got {self.learning_rate}")
        if not 0 <= self.discount < 1:
            raise ConfigError(f"discount must be in [0, 1), got {self.discount}")
        if not 0 < self.epsilon_end <= self.epsilon_start <= 1:
            raise ConfigError("need 0 < epsilon_end <= epsilon_start <= 1")
        if not 0 < self.epsilon_decay < 1:
            raise ConfigError(f"epsilon_decay must be in (0, 1), got {self.epsilon_decay}")
        if self.episodes < 1:
            raise ConfigError(f"episodes must be >= 1, got {self.episodes}")


class QTable:
    """|states| x |actions| value matrix, zero-initialized."""

    def __init__(self, num_states: int, num_actions: int):
        if num_states < 1 or num_actions < 1:
            raise ConfigError("Q-table needs at least one state and one action")
        self.values = np.zeros((num_states, num_actions))

    @property
    def num_states(self) -> int:
        return self.values.shape[0]

    @property
    def num_actions(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class RewardModel:
    """Expected performance target plus the achieved metric per (state, action)."""

    expected_metric: float  # fixed theoretical maximum, e.g. link capacity
    achieved: Callable[[int, int], float]  # (state, action) -> achieved Mbps

    def __post_init__(self):
        if not self.expected_metric > 0:
            raise ConfigError("expected_metric must be > 0")


def reward(expected_metric: float, achieved_metric: float) -> float:
    """Negative squared shortfall; squaring magnifies large mismatches."""
    return -((expected_metric - achieved_metric) ** 2)


def select_action(q: QTable, state: NetworkState, epsilon: float, rng: np.random.Generator) -> int:
    """Uniform random action with probability epsilon, else greedy
    (ties broken toward the lowest index)."""
    if not 0 <= epsilon <= 1:
        raise ConfigError(f"epsilon must be in [0, 1], got {epsilon}")
    if rng.random() < epsilon:
        return int(rng.integers(0, q.num_actions))
    return best_action(q, state)


def best_action(q: QTable, state: NetworkState) -> int:
    """Greedy action for the state; lowest index wins ties."""
    if state.bin_index >= q.num_states:
        raise DataError(f"state {state.bin_index} outside Q-table with {q.num_states} rows")
    return int(np.argmax(q.values[state.bin_index]))


def update(
    q: QTable,
    state: NetworkState,
    action: int,
    r: float,
    next_state: NetworkState,
    learning_rate: float,
    discount: float,
) -> None:
    """One Bellman update toward r + discount * max over the next state's row."""
    if not math.isfinite(r):
        raise DataError(f"reward must be finite, got {r}")
    row = q.values[state.bin_index]
    current = row[action]
    target = r + discount * float(q.values[next_state.bin_index].max())
    row[action] = current + learning_rate * (target - current)


def decay_epsilon(
    epsilon_start: float, epsilon_decay: float, episode: int, epsilon_end: float
) -> float:
    """Multiplicative decay by episode count, floored at epsilon_end."""
    return max(epsilon_start * epsilon_decay**episode, epsilon_end)


@dataclass
class TrainingTrace:
    """Per-episode learning trace. The per-episode mae column evaluates the
    policy the episode produced: the mean absolute gap, in Mbps, between the
    achieved bandwidth under the end-of-episode greedy choice (what the
    proactive loop would apply) and under the reward-maximizing action for
    each state in the series."""

    episodes: list[int] = field(default_factory=list)
    total_rewards: list[float] = field(default_factory=list)
    epsilons: list[float] = field(default_factory=list)
    maes: list[float] = field(default_factory=list)

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("episode,total_reward,epsilon,mae\n")
            for ep, tr, eps, mae in zip(self.episodes, self.total_rewards, self.epsilons, self.maes):
                fh.write(f"{ep},{tr!r},{eps!r},{mae!r}\n")


def train(
    q: QTable,
    states: Sequence[NetworkState],
    reward_model: RewardModel,
    params: AgentParams = AgentParams(),
    seed: int = 0,
) -> TrainingTrace:
    """Run the training episodes over the state series; deterministic given seed.

    Each episode iterates the series in order; the next state for the Bellman
    update is the series' following entry (wrapping at the end, since the
    closed loop runs perpetually).
    """
    if len(states) == 0:
        raise InsufficientDataError("state series is empty")
    sequence = [s.bin_index for s in states]
    if max(sequence) >= q.num_states:
        raise DataError("state series contains bins outside the Q-table")

    num_actions = q.num_actions
    expected = reward_model.expected_metric
    distinct = sorted(set(sequence))
    achieved: dict[int, list[float]] = {}
    for s in distinct:
        row = [float(reward_model.achieved(s, a)) for a in range(num_actions)]
        if not all(map(math.isfinite, row)):
            raise DataError(f"achieved metric non-finite for state {s}")
        achieved[s] = row
    rewards = {s: [-((expected - o) ** 2) for o in row] for s, row in achieved.items()}
    best_achieved = {s: max(row) for s, row in achieved.items()}

    # Hot loop in plain python floats: ~30M updates at the default scale.
    q_rows: list[list[float]] = [list(map(float, r)) for r in q.values]
    rng = np.random.default_rng(seed)
    n = len(sequence)
    next_index = [(i + 1) % n for i in range(n)]
    alpha = params.learning_rate
    gamma = params.discount
    epsilon = decay_epsilon(params.epsilon_start, params.epsilon_decay, 0, params.epsilon_end)

    trace = TrainingTrace()
    for episode in range(1, params.episodes + 1):
        explore = rng.random(n)
        random_actions = rng.integers(0, num_actions, n)
        total_reward = 0.0
        for i in range(n):
            s = sequence[i]
            row = q_rows[s]
            if explore[i] < epsilon:
                a = int(random_actions[i])
            else:
                a = row.index(max(row))
            r = rewards[s][a]
            next_row = q_rows[sequence[next_index[i]]]
            row[a] += alpha * (r + gamma * max(next_row) - row[a])
            total_reward += r
        greedy_gap = {
            s: best_achieved[s] - achieved[s][q_rows[s].index(max(q_rows[s]))]
            for s in distinct
        }
        trace.episodes.append(episode)
        trace.total_rewards.append(total_reward)
        trace.epsilons.append(epsilon)
        trace.maes.append(sum(greedy_gap[s] for s in sequence) / n)
        epsilon = decay_epsilon(
            params.epsilon_start, params.epsilon_decay, episode, params.epsilon_end
        )

    q.values[:] = np.asarray(q_rows)
    return trace
