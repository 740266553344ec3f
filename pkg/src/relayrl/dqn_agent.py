"""Flat deep Q-learning agent over the joint relay/power action space.

The agent maps an observation to one of K*(L-1) joint actions with a plain-
head network, explores epsilon-greedily with a fixed epsilon, learns from
uniformly replayed transitions against a periodically synchronized target
network, and treats the final slot of each fixed-length episode as terminal.

A tabular Q-learning update is included as a sanity oracle for toy MDPs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .relay_env import Action, EnvConfig
from .replay_memory import RingBuffer, Transition
from .tensor_nn import (
    DenseNet,
    RmsPropState,
    clone_params,
    forward,
    forward_batch,
    rmsprop_step,
    sync,
    td_backward_batch,
)

__all__ = [
    "DqnConfig",
    "DqnAgent",
    "encode_joint",
    "decode_joint",
    "select_action",
    "td_target",
    "train_step",
    "maybe_sync_target",
    "tabular_q_update",
]

HIDDEN_SIZES = [50, 50]


@dataclass
class DqnConfig:
    """Hyperparameters of the flat agent."""

    gamma: float = 0.9
    epsilon: float = 0.1
    batch_size: int = 64
    train_interval: int = 10
    target_sync_C: int = 200
    learning_rate: float = 0.001
    memory_size: int = 8000

    def __post_init__(self) -> None:
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        if self.batch_size < 1 or self.train_interval < 1 or self.target_sync_C < 1:
            raise ValueError("batch_size, train_interval and target_sync_C must be >= 1")
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")
        if self.memory_size < 1:
            raise ValueError("memory_size must be >= 1")


def encode_joint(k: int, l: int, K: int, L: int) -> int:
    """Flatten (relay k, power level l) to one categorical index."""
    if not 0 <= k < K:
        raise ValueError(f"relay index out of range: {k}")
    if not 1 <= l <= L - 1:
        raise ValueError(f"power level out of range: {l}")
    return k * (L - 1) + (l - 1)


def decode_joint(flat_index: int, K: int, L: int) -> tuple[int, int]:
    """Invert ``encode_joint``."""
    if not 0 <= flat_index < K * (L - 1):
        raise ValueError(f"flat action index out of range: {flat_index}")
    k, rem = divmod(flat_index, L - 1)
    return k, rem + 1


def select_action(
    q_values: np.ndarray, epsilon: float, rng: np.random.Generator | None = None
) -> int:
    """Epsilon-greedy pick: argmax (lowest index wins ties) or uniform random."""
    q_values = np.asarray(q_values)
    if q_values.size == 0:
        raise ValueError("q_values must be nonempty")
    if epsilon > 0.0:
        if rng is None:
            raise ValueError("an rng is required when epsilon > 0")
        if rng.random() < epsilon:
            return int(rng.integers(q_values.size))
    return int(np.argmax(q_values))


def td_target(
    reward: float, next_q_values: np.ndarray, gamma: float, terminal: bool
) -> float:
    """One-step bootstrapped target: r, plus gamma*max next-Q when non-terminal."""
    if terminal:
        return float(reward)
    return float(reward + gamma * np.max(next_q_values))


def maybe_sync_target(agent: "DqnAgent", global_step: int) -> bool:
    """Copy evaluate-net parameters into the target net every C steps."""
    if global_step % agent.config.target_sync_C == 0:
        sync(agent.target_net, agent.eval_net)
        return True
    return False


def train_step(agent: "DqnAgent", batch: list[Transition]) -> float:
    """One gradient update from a batch of transitions; returns pre-update loss."""
    if not batch:
        raise ValueError("batch must be nonempty")
    states = np.stack([t.state for t in batch])
    next_states = np.stack([t.next_state for t in batch])
    actions = np.array([t.action for t in batch], dtype=np.intp)
    rewards = np.array([t.reward for t in batch])
    terminal = np.array([t.terminal for t in batch])

    next_q = forward_batch(agent.target_net, next_states)
    targets = rewards + agent.config.gamma * next_q.max(axis=1) * ~terminal
    grads, loss = td_backward_batch(agent.eval_net, states, actions, targets)
    rmsprop_step(agent.eval_net.params(), grads, agent.opt_state)
    return loss


def tabular_q_update(
    q_table: np.ndarray, s: int, a: int, r: float, s_next: int,
    alpha: float, gamma: float,
) -> np.ndarray:
    """Classic tabular update: Q += alpha * (r + gamma*max Q(s') - Q(s,a)).

    Sanity oracle for toy MDPs only; mutates and returns the table.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    q_table[s, a] += alpha * (r + gamma * np.max(q_table[s_next]) - q_table[s, a])
    return q_table


class DqnAgent:
    """Joint relay+power Q-learning agent (one categorical head over both)."""

    def __init__(self, env_config: EnvConfig, config: DqnConfig, seed: int = 0):
        self.env_config = env_config
        self.config = config
        net_seq, act_seq = np.random.SeedSequence(seed).spawn(2)
        self.num_actions = env_config.K * (env_config.L - 1)
        self.eval_net = DenseNet(
            env_config.observation_dim, HIDDEN_SIZES, self.num_actions,
            head="plain", rng=np.random.default_rng(net_seq),
        )
        self.target_net = clone_params(self.eval_net)
        self.opt_state = RmsPropState.for_params(
            self.eval_net.params(), eta=config.learning_rate
        )
        self.buffer: RingBuffer[Transition] = RingBuffer(config.memory_size)
        self.rng = np.random.default_rng(act_seq)
        self.global_step = 0

    def act(self, observation: np.ndarray, epsilon: float | None = None) -> Action:
        """Epsilon-greedy action; pass epsilon=0 for a greedy rollout."""
        eps = self.config.epsilon if epsilon is None else epsilon
        q = forward(self.eval_net, observation)
        flat = select_action(q, eps, self.rng)
        k, l = decode_joint(flat, self.env_config.K, self.env_config.L)
        return Action(k, l)

    def observe(self, transition: Transition) -> float | None:
        """Store a transition, train/sync on schedule; returns loss if trained."""
        self.buffer.push(transition)
        self.global_step += 1
        loss = None
        if (
            len(self.buffer) >= self.config.batch_size
            and self.global_step % self.config.train_interval == 0
        ):
            batch = self.buffer.sample(self.config.batch_size, self.rng)
            loss = train_step(self, batch)
        maybe_sync_target(self, self.global_step)
        return loss
