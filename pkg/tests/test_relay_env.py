"""Unit tests for the two-hop relay environment and its rate formulas."""

import math
from dataclasses import replace

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relayrl.channel_model import FadingParams, squared_norm
from relayrl.relay_env import (
    Action,
    EnvConfig,
    RelayEnv,
    compute_amplification_factor,
    mi_af,
    mi_df,
    outage_indicator,
    outage_probability_estimate,
    power_from_level,
    snr_components,
)

mpmath.mp.dps = 50


def small_config(**overrides) -> EnvConfig:
    defaults = dict(K=4, L=5, episode_length=6)
    defaults.update(overrides)
    return EnvConfig(**defaults)


# ---------------------------------------------------------------------------
# Power split
# ---------------------------------------------------------------------------

@settings(max_examples=200, deadline=None)
@given(
    L=st.integers(min_value=2, max_value=64),
    p_max=st.floats(min_value=1e-6, max_value=1e3, allow_nan=False),
    data=st.data(),
)
def test_power_split_is_exact_remainder(L, p_max, data):
    l = data.draw(st.integers(min_value=1, max_value=L - 1))
    p_s, p_r = power_from_level(l, L, p_max)
    assert p_s == l * p_max / L
    assert p_r == p_max - p_s          # the relay gets exactly the remainder
    assert p_s > 0.0 and p_r > 0.0


@settings(max_examples=200, deadline=None)
@given(
    L=st.integers(min_value=2, max_value=64),
    exponent=st.integers(min_value=-4, max_value=8),
    data=st.data(),
)
def test_power_split_sums_to_budget_exactly_for_binary_budgets(L, exponent, data):
    # With a power-of-two budget (the deployed P_max = 4.0 included) the
    # remainder subtraction is exact, so the split re-sums to the budget with
    # zero rounding error.
    p_max = float(2.0**exponent)
    l = data.draw(st.integers(min_value=1, max_value=L - 1))
    p_s, p_r = power_from_level(l, L, p_max)
    assert p_s + p_r == p_max


@pytest.mark.parametrize("bad_level", [0, 10, -3])
def test_power_split_rejects_out_of_range_levels(bad_level):
    with pytest.raises(ValueError):
        power_from_level(bad_level, 10, 4.0)


# ---------------------------------------------------------------------------
# Amplification factor and SNR components
# ---------------------------------------------------------------------------

def test_amplification_factor_formula():
    rng = np.random.default_rng(0)
    h = rng.normal(size=(2, 2))
    beta = compute_amplification_factor(3.0, h, 0.5)
    assert beta == pytest.approx(1.0 / math.sqrt(3.0 * squared_norm(h) + 0.5))


def test_amplification_factor_validation():
    h = np.ones((2, 2))
    with pytest.raises(ValueError):
        compute_amplification_factor(-1.0, h, 1.0)
    with pytest.raises(ValueError):
        compute_amplification_factor(1.0, h, 0.0)


def test_snr_components_formulas():
    cfg = small_config()
    env = RelayEnv(cfg, seed=1)
    env.reset()
    snap = env.snapshot
    p_s, p_r, k = 2.5, 1.5, 2
    phi_si, phi_id, phi_sd = snr_components(snap, k, p_s, p_r, cfg.noise_variance)
    assert phi_si == pytest.approx(p_s * squared_norm(snap.h_si[k]) / cfg.noise_variance)
    assert phi_id == pytest.approx(p_r * squared_norm(snap.h_id[k]) / cfg.noise_variance)
    assert phi_sd == pytest.approx(p_s * squared_norm(snap.h_sd) / cfg.noise_variance)


# ---------------------------------------------------------------------------
# Mutual information against a high-precision oracle
# ---------------------------------------------------------------------------

def _mi_af_oracle(phi_si, phi_id, phi_sd):
    si, id_, sd = mpmath.mpf(phi_si), mpmath.mpf(phi_id), mpmath.mpf(phi_sd)
    relayed = si * id_ / (si + id_ + 1)
    return float(mpmath.mpf("0.5") * mpmath.log(1 + sd + relayed) / mpmath.log(2))


def _mi_df_oracle(phi_si, phi_id, phi_sd, lam):
    si, id_, sd = mpmath.mpf(phi_si), mpmath.mpf(phi_id), mpmath.mpf(phi_sd)
    half = mpmath.mpf("0.5")
    log2 = mpmath.log(2)
    if half * mpmath.log(1 + si) / log2 >= lam:
        return float(half * mpmath.log(1 + sd + id_) / log2)
    return float(half * mpmath.log(1 + sd) / log2)


def test_mi_formulas_match_high_precision_oracle_on_1000_triples():
    rng = np.random.default_rng(2024)
    lam = 2.0
    for _ in range(1000):
        # Log-uniform SNRs spanning deep fades to strong links.
        phi = 10.0 ** rng.uniform(-3, 3, size=3)
        got_af = mi_af(*phi)
        want_af = _mi_af_oracle(*phi)
        assert got_af == pytest.approx(want_af, rel=1e-12, abs=1e-15)
        got_df = mi_df(*phi, lam)
        want_df = _mi_df_oracle(*phi, lam)
        assert got_df == pytest.approx(want_df, rel=1e-12, abs=1e-15)


def test_mi_af_zero_snr_degenerates_to_direct_link():
    assert mi_af(0.0, 0.0, 3.0) == pytest.approx(0.5 * math.log2(4.0))
    assert mi_af(0.0, 0.0, 0.0) == 0.0


def test_mi_df_gate_opens_exactly_at_threshold():
    lam = 1.0
    # 0.5*log2(1+phi_si) == 1.0  <=>  phi_si == 3.
    at_gate = mi_df(3.0, 5.0, 1.0, lam)
    below_gate = mi_df(3.0 - 1e-9, 5.0, 1.0, lam)
    assert at_gate == pytest.approx(0.5 * math.log2(1 + 1.0 + 5.0))
    assert below_gate == pytest.approx(0.5 * math.log2(1 + 1.0))


def test_df_success_iff_effective_snr_sum_reaches_threshold():
    # At lambda, success (I >= lambda) is equivalent to the combined SNR
    # reaching 2^(2*lambda) - 1 (= 15 at lambda = 2.0).
    lam = 2.0
    need = 2.0 ** (2 * lam) - 1.0
    assert need == pytest.approx(15.0)
    for phi_si, phi_id, phi_sd in [(40, 12, 3), (40, 11, 3.999), (2, 100, 15), (2, 100, 14.9)]:
        mi = mi_df(phi_si, phi_id, phi_sd, lam)
        gate_open = 0.5 * math.log2(1 + phi_si) >= lam
        combined = phi_sd + (phi_id if gate_open else 0.0)
        assert (mi >= lam) == (combined >= need)


# ---------------------------------------------------------------------------
# Outage indicator and reward coupling
# ---------------------------------------------------------------------------

@settings(max_examples=100, deadline=None)
@given(
    mi=st.floats(min_value=0.0, max_value=10.0, allow_nan=False),
    lam=st.floats(min_value=0.0, max_value=10.0, allow_nan=False),
)
def test_outage_indicator_is_strict_threshold(mi, lam):
    ind = outage_indicator(mi, lam)
    assert ind == (1 if mi < lam else 0)


def test_reward_plus_outage_indicator_is_one_every_step():
    cfg = small_config()
    env = RelayEnv(cfg, seed=0)
    env.reset()
    rng = np.random.default_rng(1)
    for _ in range(50):
        action = Action(int(rng.integers(cfg.K)), int(rng.integers(1, cfg.L)))
        result = env.step(action)
        assert result.reward + int(result.outage) == 1


def test_zero_threshold_means_no_outage():
    cfg = small_config(lambda_=0.0)
    p = outage_probability_estimate(
        lambda obs: Action(0, 1), episodes=5, config=cfg, seed=0
    )
    assert p == 0.0


# ---------------------------------------------------------------------------
# EnvConfig validation and derived quantities
# ---------------------------------------------------------------------------

def test_observation_dim_matches_flattened_channels():
    cfg = EnvConfig(K=10, L=10, N_S=2, N_D=2)
    # 2 * (K*N_S + K*N_D + N_S*N_D) = 2 * (20 + 20 + 4) = 88
    assert cfg.observation_dim == 88
    env = RelayEnv(cfg, seed=0)
    assert env.reset().shape == (88,)


def test_num_power_levels():
    assert EnvConfig(K=4, L=10).num_power_levels == 9


def test_env_config_rejects_bad_values():
    with pytest.raises(ValueError):
        EnvConfig(K=0)
    with pytest.raises(ValueError):
        EnvConfig(L=1)
    with pytest.raises(ValueError):
        EnvConfig(P_max=0.0)
    with pytest.raises(ValueError):
        EnvConfig(protocol="XX")
    with pytest.raises(ValueError):
        EnvConfig(episode_length=0)


def test_env_config_rejects_bad_relay_gains():
    with pytest.raises(ValueError):
        EnvConfig(K=4, relay_gains_si=[1.0, 1.0])          # wrong length
    with pytest.raises(ValueError):
        EnvConfig(K=2, relay_gains_id=[1.0, -1.0])         # nonpositive


def test_relay_gains_scale_drawn_channels_exactly():
    base = small_config()
    scaled = small_config(relay_gains_si=[4.0] * 4, relay_gains_id=[4.0] * 4)
    obs_a = RelayEnv(base, seed=3).reset()
    obs_b = RelayEnv(scaled, seed=3).reset()
    k_links = 2 * base.K * (base.N_S + base.N_D)
    np.testing.assert_allclose(obs_b[:k_links], 2.0 * obs_a[:k_links], rtol=1e-12)
    np.testing.assert_array_equal(obs_b[k_links:], obs_a[k_links:])   # direct link untouched


# ---------------------------------------------------------------------------
# Environment dynamics: evolve-then-evaluate with one-slot-stale observations
# ---------------------------------------------------------------------------

def test_step_scores_action_on_evolved_channels():
    # The observation handed to the agent is the PREVIOUS slot's channels;
    # the reward must be computed on the channels after one evolve step.
    cfg = small_config(fading={
        "si": FadingParams(rho=0.9),
        "id": FadingParams(rho=0.9),
        "sd": FadingParams(rho=0.9),
    })
    env = RelayEnv(cfg, seed=12)
    obs0 = env.reset()
    snap_before = env.snapshot
    result = env.step(Action(1, 2))
    snap_after = env.snapshot
    assert snap_after.slot_index == snap_before.slot_index + 1
    assert not np.array_equal(snap_after.h_si, snap_before.h_si)
    # Returned observation encodes the post-evolution snapshot (stale for the
    # next decision), and the reward matches the rate on that same snapshot.
    np.testing.assert_array_equal(
        result.next_observation,
        np.concatenate([snap_after.h_si.ravel(), snap_after.h_id.ravel(),
                        snap_after.h_sd.ravel()]),
    )
    p_s, p_r = power_from_level(2, cfg.L, cfg.P_max)
    phi = snr_components(snap_after, 1, p_s, p_r, cfg.noise_variance)
    expected_mi = mi_df(*phi, cfg.lambda_)
    assert result.mutual_information == pytest.approx(expected_mi, rel=1e-12)
    assert obs0.shape == result.next_observation.shape


def test_step_validates_action_and_requires_reset():
    cfg = small_config()
    env = RelayEnv(cfg, seed=0)
    with pytest.raises(RuntimeError):
        env.step(Action(0, 1))
    env.reset()
    with pytest.raises(ValueError):
        env.step(Action(cfg.K, 1))
    with pytest.raises(ValueError):
        env.step(Action(0, cfg.L))


def test_af_protocol_is_used_when_configured():
    cfg = small_config(protocol="AF", lambda_=1.0)
    env = RelayEnv(cfg, seed=5)
    env.reset()
    result = env.step(Action(0, 2))
    p_s, p_r = power_from_level(2, cfg.L, cfg.P_max)
    phi = snr_components(env.snapshot, 0, p_s, p_r, cfg.noise_variance)
    assert result.mutual_information == pytest.approx(mi_af(*phi), rel=1e-12)


def test_env_is_deterministic_given_seed():
    cfg = small_config()
    rng = np.random.default_rng(0)
    actions = [Action(int(rng.integers(cfg.K)), int(rng.integers(1, cfg.L)))
               for _ in range(cfg.episode_length)]
    def rollout():
        env = RelayEnv(cfg, seed=77)
        env.reset()
        return [env.step(a).mutual_information for a in actions]
    assert rollout() == rollout()


# ---------------------------------------------------------------------------
# Monte Carlo outage estimation
# ---------------------------------------------------------------------------

def test_outage_probability_estimate_is_deterministic_and_bounded():
    cfg = small_config()
    policy = lambda obs: Action(0, 2)
    a = outage_probability_estimate(policy, 10, cfg, seed=4)
    b = outage_probability_estimate(policy, 10, cfg, seed=4)
    assert a == b
    assert 0.0 <= a <= 1.0


def test_outage_probability_monotone_in_threshold_on_same_trace():
    cfg = small_config(episode_length=40)
    policy = lambda obs: Action(1, 2)
    grid = [0.5, 1.0, 1.5, 2.0, 2.5]
    outages = [
        outage_probability_estimate(policy, 10, replace(cfg, lambda_=lam), seed=9)
        for lam in grid
    ]
    # DF decode gates differ across lambda, but the direct-link fallback only
    # removes rate, so outage stays monotone on an identical channel trace.
    assert all(x <= y for x, y in zip(outages, outages[1:]))


def test_outage_probability_estimate_rejects_zero_episodes():
    with pytest.raises(ValueError):
        outage_probability_estimate(lambda obs: Action(0, 1), 0, small_config())
