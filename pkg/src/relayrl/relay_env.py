"""Two-hop relay network MDP environment.

One decision per slot: pick a relay and a source power level. The environment
advances every channel one slot, computes the end-to-end mutual information
of the chosen relay under the configured cooperative protocol
(amplify-and-forward or decode-and-forward), and emits a binary reward:
1 when the mutual information reaches the outage threshold, 0 on outage.

The agent observes the *previous* slot's channels (one-slot-stale CSI): each
``step`` first evolves the channels, then evaluates the action on the new
slot, and returns the new slot's features as the next observation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .channel_model import ChannelSnapshot, FadingParams, evolve, sample_initial, squared_norm

__all__ = [
    "EnvConfig",
    "Action",
    "StepResult",
    "RelayEnv",
    "power_from_level",
    "compute_amplification_factor",
    "snr_components",
    "mi_af",
    "mi_df",
    "outage_indicator",
    "outage_probability_estimate",
    "default_fading",
]

LINK_CLASSES = ("si", "id", "sd")


def default_fading() -> dict[str, FadingParams]:
    """One stationary unit-variance fading process per link class."""
    return {name: FadingParams() for name in LINK_CLASSES}


@dataclass
class EnvConfig:
    """Static description of the relay network and its fading processes.

    Attributes:
        K: Number of single-antenna relays.
        L: Number of power levels the maximum power is divided into; usable
            source levels are 1..L-1 so both hops always transmit.
        N_S: Source antenna count.
        N_D: Destination antenna count.
        P_max: Total transmit power budget per slot (watts), shared between
            the source and the chosen relay.
        lambda_: Outage threshold in bits/s/Hz (spelled ``lambda`` in config
            files).
        noise_variance: Receiver noise power (watts).
        protocol: "AF" (amplify-and-forward) or "DF" (decode-and-forward).
        fading: FadingParams per link class ("si", "id", "sd").
        episode_length: Slots per episode (t_max).
        relay_gains_si: Optional length-K positive multipliers on relay k's
            source-relay link variance, modelling relays at unequal distances
            from the source; None means all relays statistically identical.
        relay_gains_id: Same for the relay-destination link (distance from
            the destination). A relay close to the source has a strong si
            link and a weak id link, and vice versa.
    """

    K: int = 10
    L: int = 10
    N_S: int = 2
    N_D: int = 2
    P_max: float = 4.0
    lambda_: float = 2.0
    noise_variance: float = 1.0
    protocol: str = "DF"
    fading: dict[str, FadingParams] = field(default_factory=default_fading)
    episode_length: int = 100
    relay_gains_si: Sequence[float] | None = None
    relay_gains_id: Sequence[float] | None = None

    def __post_init__(self) -> None:
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.L < 2:
            raise ValueError("L must be >= 2")
        if self.N_S < 1 or self.N_D < 1:
            raise ValueError("antenna counts must be >= 1")
        if self.P_max <= 0.0:
            raise ValueError("P_max must be positive")
        if self.lambda_ < 0.0:
            raise ValueError("lambda must be nonnegative")
        if self.noise_variance <= 0.0:
            raise ValueError("noise_variance must be positive")
        if self.protocol not in ("AF", "DF"):
            raise ValueError(f"protocol must be 'AF' or 'DF', got {self.protocol!r}")
        if set(self.fading) != set(LINK_CLASSES):
            raise ValueError(f"fading must define exactly the link classes {LINK_CLASSES}")
        if self.episode_length < 1:
            raise ValueError("episode_length must be >= 1")
        for name in ("relay_gains_si", "relay_gains_id"):
            value = getattr(self, name)
            if value is not None:
                gains = np.asarray(value, dtype=np.float64)
                if gains.shape != (self.K,) or np.any(gains <= 0.0):
                    raise ValueError(f"{name} must be K positive numbers")
                setattr(self, name, gains)

    @property
    def observation_dim(self) -> int:
        return 2 * (self.K * self.N_S + self.K * self.N_D + self.N_S * self.N_D)

    @property
    def num_power_levels(self) -> int:
        """Count of usable source power levels (1..L-1)."""
        return self.L - 1


@dataclass
class Action:
    """A relay choice plus a source power level.

    ``power_level`` is the index l in [1, L-1]; the source transmits at
    l * P_max / L and the relay gets the remainder.
    """

    relay_index: int
    power_level: int


@dataclass
class StepResult:
    reward: int
    mutual_information: float
    outage: bool
    next_observation: np.ndarray


def power_from_level(l: int, L: int, P_max: float) -> tuple[float, float]:
    """Split the power budget at level ``l``: source l/L-th, relay the rest."""
    if not 1 <= l <= L - 1:
        raise ValueError(f"power level must lie in [1, {L - 1}], got {l}")
    p_s = l * P_max / L
    p_r = P_max - p_s
    return p_s, p_r


def compute_amplification_factor(
    P_s: float, h_si: np.ndarray, noise_variance: float
) -> float:
    """Amplify-and-forward relay gain: sqrt(1 / (P_s * ||h_si||^2 + sigma_n^2))."""
    if P_s < 0.0:
        raise ValueError("P_s must be nonnegative")
    if noise_variance <= 0.0:
        raise ValueError("noise_variance must be positive")
    return math.sqrt(1.0 / (P_s * squared_norm(h_si) + noise_variance))


def snr_components(
    snapshot: ChannelSnapshot, k: int, P_s: float, P_r: float, noise_variance: float
) -> tuple[float, float, float]:
    """Per-link SNRs (phi_si, phi_id, phi_sd) of relay ``k`` and the direct link."""
    phi_si = P_s * squared_norm(snapshot.h_si[k]) / noise_variance
    phi_id = P_r * squared_norm(snapshot.h_id[k]) / noise_variance
    phi_sd = P_s * squared_norm(snapshot.h_sd) / noise_variance
    return phi_si, phi_id, phi_sd


def mi_af(phi_si: float, phi_id: float, phi_sd: float) -> float:
    """Amplify-and-forward mutual information (bits/s/Hz).

    The destination combines the direct copy with the amplified relay copy,
    whose end-to-end SNR is phi_si*phi_id / (phi_si + phi_id + 1).
    """
    relayed = phi_si * phi_id / (phi_si + phi_id + 1.0) if phi_si + phi_id > 0.0 else 0.0
    return 0.5 * math.log2(1.0 + phi_sd + relayed)


def mi_df(phi_si: float, phi_id: float, phi_sd: float, lambda_: float) -> float:
    """Decode-and-forward mutual information (bits/s/Hz).

    The relay retransmits only if its own link supports the target rate
    (0.5*log2(1+phi_si) >= lambda); otherwise the destination falls back to
    the direct copy alone.
    """
    if 0.5 * math.log2(1.0 + phi_si) >= lambda_:
        return 0.5 * math.log2(1.0 + phi_sd + phi_id)
    return 0.5 * math.log2(1.0 + phi_sd)


def outage_indicator(I: float, lambda_: float) -> int:
    """1 when the rate falls strictly below the threshold, else 0."""
    return 1 if I < lambda_ else 0


class RelayEnv:
    """Stateful single-agent environment over the relay network.

    One instance owns its channels and random generator; independent seeded
    instances are fully reproducible and may run in parallel.
    """

    def __init__(self, config: EnvConfig, seed: int = 0):
        self.config = config
        self.rng = np.random.default_rng(seed)
        self.snapshot: ChannelSnapshot | None = None
        # Per-relay amplitude gains shaped for broadcasting over (K, N, 2).
        def amplitude(gains):
            g = np.ones(config.K) if gains is None else np.asarray(gains, dtype=np.float64)
            return np.sqrt(g)[:, None, None]

        self._gain_si = amplitude(config.relay_gains_si)
        self._gain_id = amplitude(config.relay_gains_id)

    # -- internal helpers -------------------------------------------------

    def _draw_relay_links(
        self, n_antennas: int, params: FadingParams, gain: np.ndarray
    ) -> np.ndarray:
        base = self.rng.normal(
            0.0,
            math.sqrt(params.element_variance / 2.0),
            size=(self.config.K, n_antennas, 2),
        )
        return base * gain

    def _evolve_relay_links(
        self, h: np.ndarray, params: FadingParams, gain: np.ndarray
    ) -> np.ndarray:
        rho = params.rho
        innovation = self.rng.normal(
            0.0, math.sqrt(params.innovation_variance / 2.0), size=h.shape
        )
        return rho * h + math.sqrt(1.0 - rho * rho) * (innovation * gain)

    def _observation(self) -> np.ndarray:
        s = self.snapshot
        return np.concatenate([s.h_si.ravel(), s.h_id.ravel(), s.h_sd.ravel()])

    # -- public API --------------------------------------------------------

    def reset(self) -> np.ndarray:
        """Draw fresh channels for every link and return their encoding."""
        cfg = self.config
        self.snapshot = ChannelSnapshot(
            h_si=self._draw_relay_links(cfg.N_S, cfg.fading["si"], self._gain_si),
            h_id=self._draw_relay_links(cfg.N_D, cfg.fading["id"], self._gain_id),
            h_sd=sample_initial(
                cfg.N_S * cfg.N_D, cfg.fading["sd"].element_variance, self.rng
            ).reshape(cfg.N_S, cfg.N_D, 2),
            slot_index=0,
        )
        return self._observation()

    def step(self, action: Action) -> StepResult:
        """Advance one slot and score the action on the new channels."""
        if self.snapshot is None:
            raise RuntimeError("step() called before reset()")
        cfg = self.config
        if not 0 <= action.relay_index < cfg.K:
            raise ValueError(f"relay_index out of range: {action.relay_index}")
        # power_from_level validates the level range.
        p_s, p_r = power_from_level(action.power_level, cfg.L, cfg.P_max)

        s = self.snapshot
        self.snapshot = ChannelSnapshot(
            h_si=self._evolve_relay_links(s.h_si, cfg.fading["si"], self._gain_si),
            h_id=self._evolve_relay_links(s.h_id, cfg.fading["id"], self._gain_id),
            h_sd=evolve(s.h_sd, cfg.fading["sd"], self.rng),
            slot_index=s.slot_index + 1,
        )

        phi_si, phi_id, phi_sd = snr_components(
            self.snapshot, action.relay_index, p_s, p_r, cfg.noise_variance
        )
        if cfg.protocol == "DF":
            mi = mi_df(phi_si, phi_id, phi_sd, cfg.lambda_)
        else:
            mi = mi_af(phi_si, phi_id, phi_sd)
        outage = outage_indicator(mi, cfg.lambda_)
        return StepResult(
            reward=1 - outage,
            mutual_information=mi,
            outage=bool(outage),
            next_observation=self._observation(),
        )


def outage_probability_estimate(
    policy: Callable[[np.ndarray], Action],
    episodes: int,
    config: EnvConfig,
    seed: int = 0,
) -> float:
    """Monte Carlo outage probability of a policy over whole episodes."""
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    env = RelayEnv(config, seed=seed)
    outages = 0
    total = 0
    for _ in range(episodes):
        obs = env.reset()
        for _ in range(config.episode_length):
            result = env.step(policy(obs))
            outages += int(result.outage)
            total += 1
            obs = result.next_observation
    return outages / total
