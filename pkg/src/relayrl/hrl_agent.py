"""Two-level hierarchical agent: bandit relay selection + dueling power control.

The meta-controller keeps one preference value per relay and samples a goal
(relay) for each episode from the softmax of those preferences; after the
episode it nudges preferences by the gradient-bandit rule using the episode's
mean success as external reward against a running-mean baseline.

The controller is a goal-conditioned dueling Q-network: its input is the
channel observation concatenated with a one-hot goal, its outputs are the
source power levels, and it learns per-slot from replayed transitions with a
separate target network. Exploration is epsilon-greedy with one annealing
epsilon per goal, so fresh goals explore while familiar ones act greedily.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .relay_env import Action, EnvConfig, RelayEnv
from .replay_memory import GoalTransition, RingBuffer, Transition
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
    "HrlConfig",
    "MetaController",
    "Controller",
    "HrlAgent",
    "goal_distribution",
    "sample_goal",
    "update_preferences",
    "update_baseline",
    "external_reward",
    "controller_select",
    "controller_train_step",
    "anneal_epsilon",
    "run_episode",
]

HIDDEN_SIZES = [50, 50]


@dataclass
class HrlConfig:
    """Hyperparameters of the hierarchical agent."""

    gamma: float = 0.9
    zeta: float = 0.1
    batch_size: int = 64
    train_interval: int = 10
    target_sync_C: int = 200
    learning_rate: float = 0.001
    memory_size: int = 8000
    epsilon_min: float = 0.05
    anneal_sigma: float = 0.01

    def __post_init__(self) -> None:
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.zeta <= 0.0:
            raise ValueError("zeta must be positive")
        if self.batch_size < 1 or self.train_interval < 1 or self.target_sync_C < 1:
            raise ValueError("batch_size, train_interval and target_sync_C must be >= 1")
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")
        if self.memory_size < 1:
            raise ValueError("memory_size must be >= 1")
        if not 0.0 <= self.epsilon_min <= 1.0:
            raise ValueError("epsilon_min must lie in [0, 1]")
        if self.anneal_sigma < 0.0:
            raise ValueError("anneal_sigma must be nonnegative")


def goal_distribution(preferences: np.ndarray) -> np.ndarray:
    """Softmax of the preference vector, computed with max-subtraction."""
    m = np.asarray(preferences, dtype=np.float64)
    if not np.all(np.isfinite(m)):
        raise ValueError("preferences must be finite")
    shifted = np.exp(m - m.max())
    return shifted / shifted.sum()


def sample_goal(probs: np.ndarray, rng: np.random.Generator) -> int:
    """Categorical draw of a relay index from a goal distribution."""
    probs = np.asarray(probs, dtype=np.float64)
    return int(rng.choice(probs.size, p=probs))


def update_preferences(
    preferences: np.ndarray, chosen: int, r_e: float, baseline: float, zeta: float
) -> np.ndarray:
    """Gradient-bandit update of every preference entry.

    Uses the pre-update softmax distribution pi: the chosen entry moves by
    zeta*(r_e - baseline)*(1 - pi_chosen), every other entry by
    -zeta*(r_e - baseline)*pi_i, so the update sums to zero.
    """
    probs = goal_distribution(preferences)
    indicator = np.zeros_like(probs)
    indicator[chosen] = 1.0
    return preferences + zeta * (r_e - baseline) * (indicator - probs)


def update_baseline(baseline: float, r_e: float, count: int) -> float:
    """Incremental running mean; ``count`` includes the new reward."""
    if count < 1:
        raise ValueError("count must be >= 1")
    return baseline + (r_e - baseline) / count


def external_reward(internal_rewards: list[float]) -> float:
    """Episode-level reward: the mean of the per-slot binary rewards."""
    if len(internal_rewards) == 0:
        raise ValueError("internal_rewards must be nonempty")
    return float(np.mean(internal_rewards))


class MetaController:
    """Gradient bandit over relays with a running-mean reward baseline."""

    def __init__(
        self, K: int, horizon_n: int, zeta: float = 0.1,
        memory_size: int = 8000, rng: np.random.Generator | None = None,
    ):
        self.K = K
        self.horizon_n = horizon_n
        self.zeta = zeta
        self.preferences = np.zeros(K)
        self.baseline = 0.0
        self.episode_count = 0
        self.rng = rng if rng is not None else np.random.default_rng()
        self.high_buffer: RingBuffer[GoalTransition] = RingBuffer(memory_size)

    def choose_goal(self) -> int:
        return sample_goal(goal_distribution(self.preferences), self.rng)

    def best_goal(self) -> int:
        """Most preferred relay (argmax of the goal distribution)."""
        return int(np.argmax(self.preferences))

    def observe_episode(self, chosen: int, r_e: float) -> None:
        """Fold one episode's external reward into baseline and preferences."""
        self.episode_count += 1
        self.baseline = update_baseline(self.baseline, r_e, self.episode_count)
        self.preferences = update_preferences(
            self.preferences, chosen, r_e, self.baseline, self.zeta
        )


class Controller:
    """Goal-conditioned dueling Q-network over source power levels."""

    def __init__(self, env_config: EnvConfig, config: HrlConfig, seed: int = 0):
        self.env_config = env_config
        self.config = config
        net_seq, act_seq = np.random.SeedSequence(seed).spawn(2)
        self.input_dim = env_config.observation_dim + env_config.K
        self.eval_net = DenseNet(
            self.input_dim, HIDDEN_SIZES, env_config.num_power_levels,
            head="dueling", rng=np.random.default_rng(net_seq),
        )
        self.target_net = clone_params(self.eval_net)
        self.opt_state = RmsPropState.for_params(
            self.eval_net.params(), eta=config.learning_rate
        )
        self.rng = np.random.default_rng(act_seq)
        self.buffer: RingBuffer[Transition] = RingBuffer(config.memory_size)
        self.per_goal_epsilon = np.ones(env_config.K)
        self.env_step = 0
        self.train_count = 0

    def goal_input(self, observation: np.ndarray, goal: int) -> np.ndarray:
        onehot = np.zeros(self.env_config.K)
        onehot[goal] = 1.0
        return np.concatenate([observation, onehot])

    def select(
        self, observation: np.ndarray, goal: int, epsilon: float | None = None
    ) -> int:
        """Epsilon-greedy power level in [1, L-1] under the given goal."""
        if not 0 <= goal < self.env_config.K:
            raise ValueError(f"goal out of range: {goal}")
        eps = self.per_goal_epsilon[goal] if epsilon is None else epsilon
        q = forward(self.eval_net, self.goal_input(observation, goal))
        if eps > 0.0 and self.rng.random() < eps:
            return int(self.rng.integers(q.size)) + 1
        return int(np.argmax(q)) + 1


def controller_select(
    controller: Controller, observation: np.ndarray, goal: int,
    epsilon: float | None = None,
) -> int:
    """Module-level alias of ``Controller.select``."""
    return controller.select(observation, goal, epsilon)


def controller_train_step(controller: Controller, batch: list[Transition]) -> float:
    """One gradient update of the controller; returns the pre-update loss.

    Targets bootstrap through the target network at the *same* goal as the
    sampled transition; terminal (episode-final) slots do not bootstrap.
    Every ``target_sync_C`` training steps the target net is refreshed.
    """
    if not batch:
        raise ValueError("batch must be nonempty")
    cfg = controller.config
    xs = np.stack([controller.goal_input(t.state, t.goal) for t in batch])
    next_xs = np.stack([controller.goal_input(t.next_state, t.goal) for t in batch])
    actions = np.array([t.action for t in batch], dtype=np.intp)
    rewards = np.array([t.reward for t in batch])
    terminal = np.array([t.terminal for t in batch])

    next_q = forward_batch(controller.target_net, next_xs)
    targets = rewards + cfg.gamma * next_q.max(axis=1) * ~terminal
    grads, loss = td_backward_batch(controller.eval_net, xs, actions, targets)
    rmsprop_step(controller.eval_net.params(), grads, controller.opt_state)
    controller.train_count += 1
    if controller.train_count % cfg.target_sync_C == 0:
        sync(controller.target_net, controller.eval_net)
    return loss


def anneal_epsilon(controller: Controller, goal: int) -> None:
    """Decrement the active goal's exploration rate, clamped at epsilon_min."""
    eps = controller.per_goal_epsilon[goal] - controller.config.anneal_sigma
    controller.per_goal_epsilon[goal] = max(controller.config.epsilon_min, eps)


def run_episode(
    env: RelayEnv, meta: MetaController, controller: Controller
) -> tuple[float, dict]:
    """One full episode of hierarchical interaction and learning.

    Samples a single goal for the whole episode, runs the controller for
    t_max slots (acting, storing low-level transitions whose action field is
    the zero-based power-level index, training every train_interval steps,
    annealing the active goal's epsilon), then scores the episode for the
    meta-controller: high-level tuple stored, baseline updated, preferences
    updated.
    """
    cfg = controller.config
    t_max = env.config.episode_length
    start_obs = env.reset()
    goal = meta.choose_goal()
    obs = start_obs
    rewards: list[float] = []
    losses: list[float] = []
    for t in range(1, t_max + 1):
        level = controller.select(obs, goal)
        result = env.step(Action(goal, level))
        controller.buffer.push(
            Transition(
                state=obs, goal=goal, action=level - 1, reward=result.reward,
                next_state=result.next_observation, terminal=(t == t_max),
            )
        )
        controller.env_step += 1
        if (
            len(controller.buffer) >= cfg.batch_size
            and controller.env_step % cfg.train_interval == 0
        ):
            batch = controller.buffer.sample(cfg.batch_size, controller.rng)
            losses.append(controller_train_step(controller, batch))
        anneal_epsilon(controller, goal)
        rewards.append(result.reward)
        obs = result.next_observation

    r_e = external_reward(rewards)
    meta.high_buffer.push(GoalTransition(start_obs, goal, r_e, obs))
    meta.observe_episode(goal, r_e)
    return r_e, {"goal": goal, "rewards": rewards, "losses": losses}


class HrlAgent:
    """Bundles the meta-controller and controller for training and rollout."""

    def __init__(self, env_config: EnvConfig, config: HrlConfig, seed: int = 0):
        self.env_config = env_config
        self.config = config
        meta_seq, ctrl_seq = np.random.SeedSequence(seed).spawn(2)
        meta_seed = int(meta_seq.generate_state(1)[0])
        ctrl_seed = int(ctrl_seq.generate_state(1)[0])
        self.meta = MetaController(
            env_config.K, horizon_n=env_config.episode_length, zeta=config.zeta,
            memory_size=config.memory_size, rng=np.random.default_rng(meta_seed),
        )
        self.controller = Controller(env_config, config, seed=ctrl_seed)

    def act_greedy(self, observation: np.ndarray) -> Action:
        """Frozen-policy action: most-preferred relay, greedy power level."""
        goal = self.meta.best_goal()
        level = self.controller.select(observation, goal, epsilon=0.0)
        return Action(goal, level)
