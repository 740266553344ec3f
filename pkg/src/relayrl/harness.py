"""Experiment orchestration: configs, training, evaluation, sweeps, metrics.

A run is described by a YAML config mirroring :class:`RunConfig` (unknown
keys are rejected). Training writes one metrics CSV and one policy checkpoint
per (agent, seed) plus a success-curve figure; evaluation rolls out a frozen
policy over a grid of outage thresholds and writes a per-threshold outage
report plus a figure; sweeps re-train across values of one hyperparameter
and record per-repeat finals with mean/range summaries and a figure.

Metrics CSV columns, in order:
    episode, seed, success_ma, success_ep, loss_mean, epsilon, goal_entropy, wall_ms
success_ma is a trailing moving average (window 10) of per-episode success.
Cells that do not apply (loss for the random agent, goal entropy for
non-hierarchical agents) are left empty. All quantities except wall_ms are
reproducible byte-for-byte given identical config and seed.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import yaml

from .channel_model import FadingParams
from .dqn_agent import DqnAgent, DqnConfig, encode_joint
from .hrl_agent import Controller, HrlAgent, HrlConfig, goal_distribution, run_episode
from .relay_env import Action, EnvConfig, RelayEnv, outage_probability_estimate
from .replay_memory import Transition
from .tensor_nn import load_checkpoint, save_checkpoint

__all__ = [
    "RunConfig",
    "SweepConfig",
    "EvalConfig",
    "EvalReport",
    "load_config",
    "train",
    "evaluate",
    "sweep",
    "moving_average",
    "METRICS_COLUMNS",
    "SWEEP_DIMENSIONS",
]

METRICS_COLUMNS = (
    "episode", "seed", "success_ma", "success_ep",
    "loss_mean", "epsilon", "goal_entropy", "wall_ms",
)
SWEEP_DIMENSIONS = ("learning_rate", "memory_size", "batch_size", "train_interval")
MA_WINDOW = 10
AGENTS = ("random", "dqn", "hrl")


@dataclass
class SweepConfig:
    dimension: str = "learning_rate"
    values: list = field(default_factory=lambda: [0.1, 0.001, 0.0001])
    repeats: int = 10

    def __post_init__(self) -> None:
        if self.dimension not in SWEEP_DIMENSIONS:
            raise ValueError(
                f"sweep dimension must be one of {SWEEP_DIMENSIONS}, got {self.dimension!r}"
            )
        if not self.values:
            raise ValueError("sweep values must be nonempty")
        if self.repeats < 1:
            raise ValueError("sweep repeats must be >= 1")


@dataclass
class EvalConfig:
    episodes: int = 30
    lambda_grid: list = field(default_factory=lambda: [1.6, 1.8, 2.0, 2.2])

    def __post_init__(self) -> None:
        if self.episodes < 1:
            raise ValueError("eval episodes must be >= 1")
        if not self.lambda_grid:
            raise ValueError("lambda_grid must be nonempty")


@dataclass
class RunConfig:
    """Everything one experiment needs: environment, agent, schedule, output."""

    env: EnvConfig = field(default_factory=EnvConfig)
    agent: str = "random"
    dqn: DqnConfig = field(default_factory=DqnConfig)
    hrl: HrlConfig = field(default_factory=HrlConfig)
    iterations: int = 100
    seeds: list = field(default_factory=lambda: [0])
    out_dir: str = "runs"
    sweep: SweepConfig | None = None
    eval: EvalConfig = field(default_factory=EvalConfig)

    def __post_init__(self) -> None:
        if self.agent not in AGENTS:
            raise ValueError(f"agent must be one of {AGENTS}, got {self.agent!r}")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not self.seeds:
            raise ValueError("seeds must be nonempty")


@dataclass
class EvalReport:
    """Outage probability of one frozen policy across outage thresholds."""

    agent: str
    seed: int
    lambdas: list
    outages: list
    episodes: int


# --------------------------------------------------------------------------
# Config parsing
# --------------------------------------------------------------------------

def _require_mapping(raw, context: str) -> dict:
    if not isinstance(raw, dict):
        raise ValueError(f"{context} must be a mapping, got {type(raw).__name__}")
    return raw


def _check_keys(raw: dict, allowed: Sequence[str], context: str) -> None:
    unknown = sorted(set(raw) - set(allowed))
    if unknown:
        raise ValueError(f"unknown key(s) in {context}: {', '.join(unknown)}")


def _fading_from(raw: dict, context: str) -> FadingParams:
    raw = _require_mapping(raw, context)
    allowed = ("rho", "element_variance", "innovation_variance")
    _check_keys(raw, allowed, context)
    return FadingParams(**{k: raw[k] for k in allowed if raw.get(k) is not None})


def _env_from(raw: dict) -> EnvConfig:
    raw = _require_mapping(raw, "env")
    allowed = (
        "K", "L", "N_S", "N_D", "P_max", "lambda", "noise_variance",
        "protocol", "fading", "episode_length", "relay_gains_si", "relay_gains_id",
    )
    _check_keys(raw, allowed, "env")
    kwargs = {k: v for k, v in raw.items() if k not in ("lambda", "fading") and v is not None}
    if raw.get("lambda") is not None:
        kwargs["lambda_"] = raw["lambda"]
    if raw.get("fading") is not None:
        fading_raw = _require_mapping(raw["fading"], "env.fading")
        _check_keys(fading_raw, ("si", "id", "sd"), "env.fading")
        kwargs["fading"] = {
            link: _fading_from(fading_raw[link], f"env.fading.{link}")
            for link in ("si", "id", "sd")
            if link in fading_raw
        }
        missing = {"si", "id", "sd"} - set(kwargs["fading"])
        for link in missing:
            kwargs["fading"][link] = FadingParams()
    return EnvConfig(**kwargs)


def _dataclass_from(raw: dict, cls, context: str):
    raw = _require_mapping(raw, context)
    allowed = [f.name for f in fields(cls)]
    _check_keys(raw, allowed, context)
    return cls(**{k: v for k, v in raw.items() if v is not None})


def load_config(path: str | Path) -> RunConfig:
    """Parse and validate a YAML run config; unknown keys are rejected."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    if raw is None:
        raw = {}
    raw = _require_mapping(raw, "config")
    allowed = ("env", "agent", "dqn", "hrl", "iterations", "seeds", "out_dir", "sweep", "eval")
    _check_keys(raw, allowed, "config")
    kwargs: dict = {}
    if raw.get("env") is not None:
        kwargs["env"] = _env_from(raw["env"])
    if raw.get("dqn") is not None:
        kwargs["dqn"] = _dataclass_from(raw["dqn"], DqnConfig, "dqn")
    if raw.get("hrl") is not None:
        kwargs["hrl"] = _dataclass_from(raw["hrl"], HrlConfig, "hrl")
    if raw.get("sweep") is not None:
        kwargs["sweep"] = _dataclass_from(raw["sweep"], SweepConfig, "sweep")
    if raw.get("eval") is not None:
        kwargs["eval"] = _dataclass_from(raw["eval"], EvalConfig, "eval")
    for key in ("agent", "iterations", "seeds", "out_dir"):
        if raw.get(key) is not None:
            kwargs[key] = raw[key]
    return RunConfig(**kwargs)


# --------------------------------------------------------------------------
# Utilities
# --------------------------------------------------------------------------

def moving_average(values: Sequence[float], window: int) -> list[float]:
    """Trailing mean; early entries average over the shorter available head."""
    if window < 1:
        raise ValueError("window must be >= 1")
    out = []
    for i in range(len(values)):
        lo = max(0, i - window + 1)
        chunk = values[lo : i + 1]
        out.append(sum(chunk) / len(chunk))
    return out


def _entropy(probs: np.ndarray) -> float:
    probs = probs[probs > 0.0]
    return float(-(probs * np.log(probs)).sum())


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_metrics(path: Path, rows: list[dict]) -> None:
    lines = [",".join(METRICS_COLUMNS)]
    for row in rows:
        lines.append(",".join(_format_cell(row[c]) for c in METRICS_COLUMNS))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _seed_pair(seed: int) -> tuple[int, int]:
    """Independent env/agent seeds derived from one run seed."""
    children = np.random.SeedSequence(seed).spawn(2)
    return (
        int(children[0].generate_state(1)[0]),
        int(children[1].generate_state(1)[0]),
    )


class RandomPolicy:
    """Uniform random relay and power level."""

    def __init__(self, env_config: EnvConfig, seed: int = 0):
        self.env_config = env_config
        self.rng = np.random.default_rng(seed)

    def act(self, observation: np.ndarray) -> Action:
        k = int(self.rng.integers(self.env_config.K))
        l = int(self.rng.integers(1, self.env_config.L))
        return Action(k, l)


# --------------------------------------------------------------------------
# Training
# --------------------------------------------------------------------------

def _train_single(
    run_config: RunConfig, seed: int
) -> tuple[list[dict], object]:
    """Train one agent for one seed; returns metrics rows and the agent."""
    env_seed, agent_seed = _seed_pair(seed)
    env = RelayEnv(run_config.env, seed=env_seed)
    agent_kind = run_config.agent
    t_max = run_config.env.episode_length

    if agent_kind == "random":
        agent = RandomPolicy(run_config.env, seed=agent_seed)
    elif agent_kind == "dqn":
        agent = DqnAgent(run_config.env, run_config.dqn, seed=agent_seed)
    else:
        agent = HrlAgent(run_config.env, run_config.hrl, seed=agent_seed)

    rows: list[dict] = []
    success_history: list[float] = []
    for episode in range(1, run_config.iterations + 1):
        started = time.perf_counter()
        losses: list[float] = []
        if agent_kind == "hrl":
            r_e, record = run_episode(env, agent.meta, agent.controller)
            success_ep = r_e
            losses = record["losses"]
            epsilon = float(np.mean(agent.controller.per_goal_epsilon))
            goal_entropy = _entropy(goal_distribution(agent.meta.preferences))
        else:
            obs = env.reset()
            successes = 0
            for t in range(1, t_max + 1):
                action = agent.act(obs)
                result = env.step(action)
                if agent_kind == "dqn":
                    flat = encode_joint(
                        action.relay_index, action.power_level,
                        run_config.env.K, run_config.env.L,
                    )
                    loss = agent.observe(
                        Transition(
                            state=obs, goal=None, action=flat, reward=result.reward,
                            next_state=result.next_observation, terminal=(t == t_max),
                        )
                    )
                    if loss is not None:
                        losses.append(loss)
                successes += result.reward
                obs = result.next_observation
            success_ep = successes / t_max
            epsilon = 1.0 if agent_kind == "random" else run_config.dqn.epsilon
            goal_entropy = None
        success_history.append(success_ep)
        wall_ms = int(round((time.perf_counter() - started) * 1000.0))
        rows.append(
            {
                "episode": episode,
                "seed": seed,
                "success_ma": moving_average(success_history, MA_WINDOW)[-1],
                "success_ep": success_ep,
                "loss_mean": float(np.mean(losses)) if losses else None,
                "epsilon": epsilon,
                "goal_entropy": goal_entropy,
                "wall_ms": wall_ms,
            }
        )
    return rows, agent


def _save_policy(agent, agent_kind: str, path: Path) -> None:
    """Freeze a trained policy to disk (networks + metadata)."""
    if agent_kind == "random":
        path.write_text(json.dumps({"kind": "random"}) + "\n", encoding="utf-8")
    elif agent_kind == "dqn":
        save_checkpoint(agent.eval_net, str(path), extra={"kind": "dqn"})
    else:
        save_checkpoint(
            agent.controller.eval_net,
            str(path),
            extra={
                "kind": "hrl",
                "preferences": [float(v) for v in agent.meta.preferences],
                "baseline": agent.meta.baseline,
                "episode_count": agent.meta.episode_count,
                "per_goal_epsilon": [
                    float(v) for v in agent.controller.per_goal_epsilon
                ],
            },
        )


class FrozenPolicy:
    """Greedy rollout wrapper around a checkpointed (or random) policy."""

    def __init__(self, kind: str, env_config: EnvConfig, net=None, meta: dict | None = None,
                 seed: int = 0):
        self.kind = kind
        self.env_config = env_config
        self.net = net
        self.meta = meta or {}
        self._random = RandomPolicy(env_config, seed=seed)

    @classmethod
    def load(cls, path: str | Path, env_config: EnvConfig, seed: int = 0) -> "FrozenPolicy":
        path = Path(path)
        with open(path, "rb") as fh:
            magic = fh.read(9)
        if magic != b"RELAYNET1":
            doc = json.loads(path.read_text(encoding="utf-8"))
            if doc.get("kind") != "random":
                raise ValueError(f"unrecognized checkpoint {path}")
            return cls("random", env_config, seed=seed)
        net, extra = load_checkpoint(str(path))
        kind = extra.get("kind")
        if kind == "dqn":
            if net.input_dim != env_config.observation_dim:
                raise ValueError("checkpoint does not match the configured environment")
            return cls("dqn", env_config, net=net)
        if kind == "hrl":
            expected = env_config.observation_dim + env_config.K
            if net.input_dim != expected:
                raise ValueError("checkpoint does not match the configured environment")
            return cls("hrl", env_config, net=net, meta=extra)
        raise ValueError(f"checkpoint {path} carries unknown policy kind {kind!r}")

    def act(self, observation: np.ndarray) -> Action:
        from .tensor_nn import forward

        if self.kind == "random":
            return self._random.act(observation)
        if self.kind == "dqn":
            from .dqn_agent import decode_joint

            q = forward(self.net, observation)
            k, l = decode_joint(int(np.argmax(q)), self.env_config.K, self.env_config.L)
            return Action(k, l)
        goal = int(np.argmax(self.meta["preferences"]))
        onehot = np.zeros(self.env_config.K)
        onehot[goal] = 1.0
        q = forward(self.net, np.concatenate([observation, onehot]))
        return Action(goal, int(np.argmax(q)) + 1)


def train(run_config: RunConfig, out_dir: str | Path | None = None) -> dict:
    """Train per seed; write metrics CSVs, checkpoints, and a curve figure.

    Returns a summary: per-seed metrics rows, file paths, and final
    moving-average success.
    """
    out = Path(out_dir if out_dir is not None else run_config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary: dict = {"agent": run_config.agent, "seeds": {}, "out_dir": str(out)}
    curves: dict[int, list[float]] = {}
    for seed in run_config.seeds:
        rows, agent = _train_single(run_config, seed)
        metrics_path = out / f"metrics_{run_config.agent}_seed{seed}.csv"
        _write_metrics(metrics_path, rows)
        ckpt_path = out / f"{run_config.agent}_seed{seed}.ckpt"
        _save_policy(agent, run_config.agent, ckpt_path)
        curves[seed] = [row["success_ma"] for row in rows]
        summary["seeds"][seed] = {
            "rows": rows,
            "metrics_path": str(metrics_path),
            "checkpoint_path": str(ckpt_path),
            "final_ma": rows[-1]["success_ma"],
        }
    from .plots import plot_training_curves

    figure_path = out / f"train_success_{run_config.agent}.png"
    plot_training_curves(curves, run_config.agent, figure_path)
    summary["figure_path"] = str(figure_path)
    return summary


# --------------------------------------------------------------------------
# Evaluation
# --------------------------------------------------------------------------

def evaluate(
    run_config: RunConfig,
    checkpoint: str | Path | None,
    lambda_grid: Sequence[float] | None = None,
    episodes: int | None = None,
    seed: int = 0,
    out_dir: str | Path | None = None,
) -> EvalReport:
    """Greedy rollout of a frozen policy; outage probability per threshold.

    The channel trace and the policy's actions do not depend on the outage
    threshold, so one rollout is scored against every threshold in the grid;
    outage is then exactly monotone in the threshold.
    """
    grid = list(lambda_grid) if lambda_grid is not None else list(run_config.eval.lambda_grid)
    if not grid:
        raise ValueError("lambda grid must be nonempty")
    n_episodes = episodes if episodes is not None else run_config.eval.episodes
    env_cfg = run_config.env
    env_seed, policy_seed = _seed_pair(seed)

    def make_policy() -> FrozenPolicy:
        if checkpoint is None:
            if run_config.agent != "random":
                raise ValueError("a checkpoint is required to evaluate a trained agent")
            return FrozenPolicy("random", env_cfg, seed=policy_seed)
        return FrozenPolicy.load(checkpoint, env_cfg, seed=policy_seed)

    # Rebuilding the policy and the environment per threshold replays the
    # identical channel trace and action stream, so outage is exactly monotone
    # nondecreasing across the grid.
    outages = []
    for lam in grid:
        policy = make_policy()
        outages.append(
            outage_probability_estimate(
                policy.act, n_episodes, replace(env_cfg, lambda_=float(lam)),
                seed=env_seed,
            )
        )

    report = EvalReport(
        agent=make_policy().kind, seed=seed, lambdas=list(grid),
        outages=outages, episodes=n_episodes,
    )
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / f"eval_{policy.kind}_seed{seed}.csv"
        lines = ["lambda,outage,episodes"]
        for lam, po in zip(report.lambdas, report.outages):
            lines.append(f"{_format_cell(float(lam))},{_format_cell(po)},{n_episodes}")
        csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        from .plots import plot_eval_report

        plot_eval_report(report, out / f"eval_outage_{policy.kind}_seed{seed}.png")
    return report


# --------------------------------------------------------------------------
# Hyperparameter sweep
# --------------------------------------------------------------------------

def sweep(
    run_config: RunConfig,
    dimension: str | None = None,
    values: Sequence | None = None,
    out_dir: str | Path | None = None,
) -> dict:
    """Re-train across values of one hyperparameter, several repeats each.

    Writes a per-repeat CSV, a mean/range summary CSV, and a figure of the
    mean learning curves with min-max bands.
    """
    cfg = run_config.sweep if run_config.sweep is not None else SweepConfig()
    dim = dimension if dimension is not None else cfg.dimension
    vals = list(values) if values is not None else list(cfg.values)
    if dim not in SWEEP_DIMENSIONS:
        raise ValueError(f"sweep dimension must be one of {SWEEP_DIMENSIONS}")
    if not vals:
        raise ValueError("sweep values must be nonempty")
    if run_config.agent == "random":
        raise ValueError("sweeping hyperparameters requires a learning agent")

    out = Path(out_dir if out_dir is not None else run_config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    base_seed = run_config.seeds[0]
    results: dict = {"dimension": dim, "values": {}, "out_dir": str(out)}
    rows_csv = ["dimension,value,seed,final_success_ma"]
    for value in vals:
        coerced = float(value) if dim == "learning_rate" else int(value)
        curves = []
        finals = []
        for rep in range(cfg.repeats):
            seed = base_seed + rep
            if run_config.agent == "dqn":
                agent_cfg = replace(run_config.dqn, **{dim: coerced})
                rc = replace(run_config, dqn=agent_cfg, seeds=[seed])
            else:
                agent_cfg = replace(run_config.hrl, **{dim: coerced})
                rc = replace(run_config, hrl=agent_cfg, seeds=[seed])
            rows, _ = _train_single(rc, seed)
            ma = [row["success_ma"] for row in rows]
            curves.append(ma)
            finals.append(ma[-1])
            rows_csv.append(f"{dim},{coerced},{seed},{_format_cell(ma[-1])}")
        arr = np.array(curves)
        results["values"][coerced] = {
            "final_mean": float(np.mean(finals)),
            "final_min": float(np.min(finals)),
            "final_max": float(np.max(finals)),
            "curve_mean": arr.mean(axis=0).tolist(),
            "curve_min": arr.min(axis=0).tolist(),
            "curve_max": arr.max(axis=0).tolist(),
        }

    (out / f"sweep_{dim}.csv").write_text("\n".join(rows_csv) + "\n", encoding="utf-8")
    summary_lines = ["dimension,value,final_mean,final_min,final_max"]
    for value, stats in results["values"].items():
        summary_lines.append(
            f"{dim},{value},{_format_cell(stats['final_mean'])},"
            f"{_format_cell(stats['final_min'])},{_format_cell(stats['final_max'])}"
        )
    (out / f"sweep_{dim}_summary.csv").write_text(
        "\n".join(summary_lines) + "\n", encoding="utf-8"
    )
    from .plots import plot_sweep

    plot_sweep(results, out / f"sweep_{dim}.png")
    results["csv_path"] = str(out / f"sweep_{dim}.csv")
    results["summary_path"] = str(out / f"sweep_{dim}_summary.csv")
    results["figure_path"] = str(out / f"sweep_{dim}.png")
    return results
