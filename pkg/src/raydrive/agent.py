"""Learning core: replay buffer, epsilon-greedy deep Q agents, the open-side
action boost, and a tabular Q-learner for small discrete problems.

Two deep agents share the same network code and exploration policy:

* DqnAgent     -- replay buffer plus a periodically synced target net.
* VanillaAgent -- no buffer, no target net, one online update per transition.

Setting every DqnAgent buffer knob to 1 (capacity, min_replay, batch_size,
target_sync_every) reduces it to VanillaAgent exactly, update for update.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import nn
from .env import Action
from .nn import Mlp, OptimizerState, TrainTarget


class NotEnoughSamples(ValueError):
    """Requested more distinct samples than the buffer holds."""


@dataclass(frozen=True)
class Transition:
    """One environment step as seen by a learner."""

    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    done: bool
    truncated: bool = False


class ReplayBuffer:
    """Fixed-capacity FIFO of transitions with seeded uniform sampling."""

    def __init__(self, capacity: int = 3000, seed=0):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self.rng = np.random.default_rng(seed)
        self._data: list[Transition] = []
        self._next = 0

    def __len__(self) -> int:
        return len(self._data)

    def __iter__(self):
        # oldest to newest
        yield from self._data[self._next:]
        yield from self._data[: self._next]

    def push(self, transition: Transition) -> None:
        """Append; once full, overwrite the oldest entry."""
        if len(self._data) < self.capacity:
            self._data.append(transition)
        else:
            self._data[self._next] = transition
            self._next = (self._next + 1) % self.capacity

    def sample(self, k: int) -> list[Transition]:
        """k distinct transitions, uniformly without replacement."""
        if k > len(self._data):
            raise NotEnoughSamples(f"requested {k}, buffer holds {len(self._data)}")
        idx = self.rng.choice(len(self._data), size=k, replace=False)
        return [self._data[i] for i in idx]


@dataclass(frozen=True)
class Hyperparams:
    """Learning knobs. Defaults match the shipped training configs."""

    epsilon_start: float = 0.99
    epsilon_min: float = 0.001
    epsilon_decay: float = 0.99995
    gamma: float = 0.97
    capacity: int = 3000
    min_replay: int = 500
    batch_size: int = 128
    target_sync_every: int = 100
    episodes: int = 1000

    def __post_init__(self):
        if not (0.0 < self.epsilon_min <= self.epsilon_start <= 1.0):
            raise ValueError(
                "need 0 < epsilon_min <= epsilon_start <= 1, got "
                f"epsilon_min={self.epsilon_min} epsilon_start={self.epsilon_start}")
        if not (0.0 < self.epsilon_decay <= 1.0):
            raise ValueError(f"epsilon_decay must be in (0, 1], got {self.epsilon_decay}")
        if not (0.0 < self.gamma < 1.0):
            raise ValueError(f"gamma must be in (0, 1), got {self.gamma}")
        if self.capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {self.capacity}")
        if self.min_replay > self.capacity:
            raise ValueError(
                f"min_replay ({self.min_replay}) must be <= capacity ({self.capacity})")
        if self.batch_size > self.min_replay:
            raise ValueError(
                f"batch_size ({self.batch_size}) must be <= min_replay ({self.min_replay})")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.target_sync_every < 1:
            raise ValueError(
                f"target_sync_every must be >= 1, got {self.target_sync_every}")
        if self.episodes < 1:
            raise ValueError(f"episodes must be >= 1, got {self.episodes}")


@dataclass(frozen=True)
class PriorityConfig:
    """Open-side boost: which sensors count as left/right and how hard to push."""

    beta: float = 0.25
    tau: float = 0.05
    left_sensors: tuple[int, ...] = (0, 1, 2)
    right_sensors: tuple[int, ...] = (4, 5, 6)

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if self.tau < 0:
            raise ValueError(f"tau must be >= 0, got {self.tau}")
        if set(self.left_sensors) & set(self.right_sensors):
            raise ValueError("left_sensors and right_sensors must be disjoint")
        if not self.left_sensors or not self.right_sensors:
            raise ValueError("left_sensors and right_sensors must be non-empty")


class AgentMode(Enum):
    ORIGINAL = "original"
    MODIFIED = "modified"


def priority_boost(q, state, config: PriorityConfig) -> np.ndarray:
    """Nudge one action's Q-value toward the side with more sensor clearance.

    The boost is beta times the Q spread (max - min, floored away from zero),
    added to LEFT when the left sensors average more than tau above the right
    ones, to RIGHT in the mirrored case, and to NOOP otherwise. With beta = 0
    the input comes back unchanged (a fresh copy, boost exactly zero).
    """
    q = np.asarray(q, dtype=np.float64)
    state = np.asarray(state, dtype=np.float64)
    left = float(state[list(config.left_sensors)].mean())
    right = float(state[list(config.right_sensors)].mean())
    spread = float(q.max() - q.min()) + 1e-9
    out = q.copy()
    if left - right > config.tau:
        out[Action.LEFT] += config.beta * spread
    elif right - left > config.tau:
        out[Action.RIGHT] += config.beta * spread
    else:
        out[Action.NOOP] += config.beta * spread
    return out


def bellman_target(reward, done: bool, truncated: bool, next_q, gamma: float) -> float:
    """One-step return target. Crashes (done and not truncated) stop the
    bootstrap; time-limit truncation keeps it."""
    if done and not truncated:
        return float(reward)
    return float(reward) + gamma * float(np.max(next_q))


def _epsilon_greedy(rng: np.random.Generator, epsilon: float, net: Mlp, state,
                    priority: PriorityConfig | None):
    """Shared action rule. Draws one uniform for the explore decision, one
    integer draw only when exploring, so identical seeds give identical
    streams regardless of Q-values."""
    explored = bool(rng.random() < epsilon)
    q = net.forward(np.asarray(state, dtype=np.float64))
    boosted = priority_boost(q, state, priority) if priority is not None else q.copy()
    if explored:
        action = Action(int(rng.integers(len(q))))
    else:
        action = Action(int(np.argmax(boosted)))
    return action, {"explored": explored, "q": q, "boosted_q": boosted}


class _EpsilonSchedule:
    """Closed-form decay: epsilon(n) = max(min, start * decay**n) after n
    decays. Computing from the count (instead of iterating multiplications)
    keeps the value exactly on the curve."""

    def __init__(self, hp: Hyperparams):
        self.hp = hp
        self.decays = 0
        self.epsilon = hp.epsilon_start

    def decay(self) -> float:
        self.decays += 1
        self.epsilon = max(self.hp.epsilon_min,
                           self.hp.epsilon_start * self.hp.epsilon_decay ** self.decays)
        return self.epsilon


class DqnAgent:
    """Epsilon-greedy Q agent with a replay buffer and a target net that
    hard-syncs from the main net every target_sync_every training steps."""

    def __init__(self, net: Mlp, hp: Hyperparams | None = None,
                 mode: AgentMode = AgentMode.ORIGINAL,
                 priority: PriorityConfig | None = None,
                 optimizer: OptimizerState | None = None,
                 seed=0, buffer_seed=None):
        self.main_net = net
        self.target_net = nn.clone_mlp(net)
        self.hp = hp if hp is not None else Hyperparams()
        self.mode = mode
        self.priority = priority if priority is not None else PriorityConfig()
        self.optimizer = optimizer if optimizer is not None else OptimizerState()
        self.buffer = ReplayBuffer(self.hp.capacity,
                                   seed if buffer_seed is None else buffer_seed)
        self.rng = np.random.default_rng(seed)
        self._schedule = _EpsilonSchedule(self.hp)
        self.train_steps = 0

    @property
    def epsilon(self) -> float:
        return self._schedule.epsilon

    @epsilon.setter
    def epsilon(self, value: float) -> None:
        # direct override, used by greedy evaluation
        self._schedule.epsilon = float(value)

    def select_action(self, state):
        """(action, diagnostics). The boost applies only in MODIFIED mode and
        only to the exploitation branch; exploration ignores Q entirely."""
        boost = self.priority if self.mode is AgentMode.MODIFIED else None
        return _epsilon_greedy(self.rng, self.epsilon, self.main_net, state, boost)

    def decay_epsilon(self) -> float:
        return self._schedule.decay()

    def observe(self, transition: Transition) -> None:
        self.buffer.push(transition)

    def train_step(self):
        """One replay update, or None while the buffer is below min_replay.

        Samples batch_size transitions, regresses each taken action's Q toward
        its one-step target (other outputs masked out), then syncs the target
        net when due. Returns the pre-update loss.
        """
        if len(self.buffer) < self.hp.min_replay:
            return None
        batch = self.buffer.sample(self.hp.batch_size)
        k = len(batch)
        n_actions = self.main_net.out_dim
        states = np.stack([t.state for t in batch]).astype(np.float64)
        next_states = np.stack([t.next_state for t in batch]).astype(np.float64)
        next_q = self.target_net.forward(next_states)
        targets = np.zeros((k, n_actions), dtype=np.float64)
        mask = np.zeros((k, n_actions), dtype=bool)
        for i, t in enumerate(batch):
            targets[i, t.action] = bellman_target(t.reward, t.done, t.truncated,
                                                  next_q[i], self.hp.gamma)
            mask[i, t.action] = True
        loss = nn.train_on_batch(self.main_net, self.optimizer,
                                 TrainTarget(states, targets, mask))
        self.train_steps += 1
        if self.train_steps % self.hp.target_sync_every == 0:
            nn.clone_weights(self.main_net, self.target_net)
        return loss

    def experience(self, transition: Transition):
        """Store the transition, then attempt one training step."""
        self.observe(transition)
        return self.train_step()


class VanillaAgent:
    """Same network and exploration policy, but learns online from each
    transition as it happens: no buffer, no target net."""

    def __init__(self, net: Mlp, hp: Hyperparams | None = None,
                 optimizer: OptimizerState | None = None, seed=0):
        self.main_net = net
        self.hp = hp if hp is not None else Hyperparams()
        self.optimizer = optimizer if optimizer is not None else OptimizerState()
        self.rng = np.random.default_rng(seed)
        self._schedule = _EpsilonSchedule(self.hp)

    @property
    def epsilon(self) -> float:
        return self._schedule.epsilon

    @epsilon.setter
    def epsilon(self, value: float) -> None:
        self._schedule.epsilon = float(value)

    def select_action(self, state):
        return _epsilon_greedy(self.rng, self.epsilon, self.main_net, state, None)

    def decay_epsilon(self) -> float:
        return self._schedule.decay()

    def learn(self, transition: Transition) -> float:
        """One masked-MSE update on this single transition, using the main net
        itself for the next-state values."""
        t = transition
        next_q = self.main_net.forward(np.asarray(t.next_state, dtype=np.float64))
        n_actions = self.main_net.out_dim
        targets = np.zeros((1, n_actions), dtype=np.float64)
        mask = np.zeros((1, n_actions), dtype=bool)
        targets[0, t.action] = bellman_target(t.reward, t.done, t.truncated,
                                              next_q, self.hp.gamma)
        mask[0, t.action] = True
        inputs = np.asarray(t.state, dtype=np.float64)[None, :]
        return nn.train_on_batch(self.main_net, self.optimizer,
                                 TrainTarget(inputs, targets, mask))

    def experience(self, transition: Transition) -> float:
        return self.learn(transition)


class TabularQ:
    """Dict-backed Q-table for small discrete problems. Unseen pairs are 0."""

    def __init__(self, alpha: float = 0.1, gamma: float = 0.97):
        if not (0.0 < alpha <= 1.0):
            raise ValueError(f"alpha must be in (0, 1], got {alpha}")
        if not (0.0 <= gamma < 1.0):
            raise ValueError(f"gamma must be in [0, 1), got {gamma}")
        self.alpha = alpha
        self.gamma = gamma
        self.table: dict[tuple, float] = {}

    def value(self, state, action) -> float:
        return self.table.get((state, action), 0.0)

    def best_value(self, state, actions) -> float:
        """max over the available actions; 0 when there are none (terminal)."""
        return max((self.value(state, a) for a in actions), default=0.0)

    def update(self, state, action, reward, next_state, next_actions) -> float:
        """One-step Q-learning update; returns the new Q(state, action)."""
        target = reward + self.gamma * self.best_value(next_state, next_actions)
        old = self.value(state, action)
        new = old + self.alpha * (target - old)
        self.table[(state, action)] = new
        return new


def tabular_update(q: TabularQ, state, action, reward, next_state, next_actions) -> float:
    return q.update(state, action, reward, next_state, next_actions)
