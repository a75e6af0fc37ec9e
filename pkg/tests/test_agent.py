import copy
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hypersac import agent as sac
from hypersac import autodiff as ad
from hypersac.agent import (AgentNetworks, SacAgent, SacConfig, UpdateNoise, policy_loss,
                            policy_loss_t, q_loss, running_mean, select_action,
                            smoothing_q, soft_update, squashed_sample, actor_heads, update_step,
                            value_loss)
from hypersac.errors import ConfigError, DimensionError, EmptyBatchError
from hypersac.gradcheck import numeric_gradient, relative_error
from hypersac.nn import MlpNetwork, mlp_forward
from hypersac.replay import TransitionBatch

from conftest import random_batch


def constant_net(sizes, c):
    """Network whose output is ``c`` for every input."""
    net = MlpNetwork.init(sizes, np.random.default_rng(0))
    last = net.layers[-1]
    last.weights[:] = 0.0
    last.biases[:] = c
    return net


def with_constant_critics(nets, c1, c2=None):
    nets = copy.deepcopy(nets)
    sizes = nets.critic1.sizes
    nets.critic1 = constant_net(sizes, c1)
    nets.critic2 = constant_net(sizes, c1 if c2 is None else c2)
    return nets


def test_network_shapes(ref_nets):
    assert ref_nets.actor.sizes == [8, 256, 256, 10]
    assert ref_nets.critic1.sizes == ref_nets.critic2.sizes == [13, 256, 256, 1]
    assert ref_nets.value.sizes == ref_nets.target_value.sizes == [8, 256, 256, 1]
    for a, b in zip(ref_nets.value.parameters(), ref_nets.target_value.parameters()):
        np.testing.assert_array_equal(a, b)
        assert a is not b


def test_shared_critics_rejected(small_nets):
    with pytest.raises(ValueError):
        AgentNetworks(small_nets.actor, small_nets.critic1, small_nets.critic1, small_nets.value,
                      small_nets.target_value)


def test_config_validation():
    for bad in (dict(gamma=1.5), dict(tau=0.0), dict(temperature=-1), dict(batch_size=0),
                dict(smoothing_samples=0), dict(critic_lr=0), dict(dtype="float16")):
        with pytest.raises(ConfigError):
            SacConfig(**bad)


def test_zero_actor_deterministic_action():
    nets = AgentNetworks.init(8, 5, np.random.default_rng(0), hidden_sizes=(4,), dtype=np.float64)
    for layer in nets.actor.layers:
        layer.weights[:] = 0.0
        layer.biases[:] = 0.0
    s = select_action(nets, np.ones(8), deterministic=True)
    np.testing.assert_array_equal(s.pre_squash, 0.0)
    np.testing.assert_array_equal(s.action, 0.0)
    # log-prob is the standard normal at its mode minus a near-zero correction
    assert s.log_prob == pytest.approx(-5 * 0.5 * math.log(2 * math.pi) - 5 * math.log(1 + 1e-6))


def test_same_noise_same_sample(small_nets, rng):
    state, noise = rng.normal(size=8), rng.normal(size=5)
    a, b = select_action(small_nets, state, noise), select_action(small_nets, state, noise)
    assert a.pre_squash.tobytes() == b.pre_squash.tobytes()
    assert a.action.tobytes() == b.action.tobytes() and a.log_prob == b.log_prob
    np.testing.assert_array_equal(a.action, np.tanh(a.pre_squash))


def test_select_action_validation(small_nets):
    with pytest.raises(DimensionError):
        select_action(small_nets, np.ones(7), np.zeros(5))
    with pytest.raises(DimensionError):
        select_action(small_nets, np.ones(8), np.zeros(4))
    with pytest.raises(ValueError):
        select_action(small_nets, np.ones(8))


def test_sample_mean_matches_actor_mean(small_nets):
    state = np.linspace(-1, 1, 8)
    mean, log_std = actor_heads(small_nets, state[None])
    n = 100_000
    noise = np.random.default_rng(0).standard_normal((n, 5))
    u, _, _ = squashed_sample(ad.as_tensor(np.repeat(mean.value, n, 0)),
                              ad.as_tensor(np.repeat(log_std.value, n, 0)), noise)
    se = np.exp(log_std.value[0]) / math.sqrt(n)
    assert np.all(np.abs(u.value.mean(axis=0) - mean.value[0]) < 3 * se)
    single = select_action(small_nets, state, noise[0])
    np.testing.assert_allclose(single.pre_squash, u.value[0], rtol=1e-14)


def test_running_mean_values():
    assert running_mean([1.0, 2.0, 3.0]) == 2.0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=64))
def test_running_mean_is_arithmetic_mean(values):
    assert running_mean(values) == pytest.approx(math.fsum(values) / len(values), abs=1e-9)


def test_single_sample_smoothing_is_min_twin(small_nets, rng):
    state, noise = rng.normal(size=8), rng.normal(size=(1, 5))
    a = select_action(small_nets, state, noise[0]).action
    x = np.concatenate([state, a])
    expected = min(mlp_forward(small_nets.critic1, x)[0], mlp_forward(small_nets.critic2, x)[0])
    assert smoothing_q(small_nets, state, 1, noise=noise) == expected


@pytest.mark.parametrize("m", [2, 5, 32])
def test_smoothing_equals_mean_of_min_twin(ref_nets, m):
    rng = np.random.default_rng(m)
    state, noise = rng.normal(size=8), rng.normal(size=(m, 5))
    values = []
    for k in range(m):
        x = np.concatenate([state, select_action(ref_nets, state, noise[k]).action])
        values.append(min(mlp_forward(ref_nets.critic1, x)[0],
                          mlp_forward(ref_nets.critic2, x)[0]))
    assert abs(smoothing_q(ref_nets, state, m, noise=noise) - np.mean(values)) < 1e-12


def test_large_sample_smoothing_matches_monte_carlo(small_nets):
    state = np.linspace(1, -1, 8)
    m = 10_000
    estimate = smoothing_q(small_nets, state, m, rng=np.random.default_rng(1))
    mean, log_std = actor_heads(small_nets, state[None])
    noise = np.random.default_rng(2).standard_normal((m, 5))
    actions = np.tanh(mean.value + np.exp(log_std.value) * noise)
    x = np.hstack([np.repeat(state[None], m, 0), actions])
    q = np.minimum(mlp_forward(small_nets.critic1, x), mlp_forward(small_nets.critic2, x))[:, 0]
    se = q.std(ddof=1) / math.sqrt(m) * math.sqrt(2)
    assert abs(estimate - q.mean()) < 3 * se


def test_smoothing_rejects_zero_samples(small_nets):
    with pytest.raises(ValueError):
        smoothing_q(small_nets, np.ones(8), 0, rng=np.random.default_rng(0))


# value loss


def test_value_loss_fixed_point(small_nets, config64, rng):
    cfg = SacConfig(temperature=0.0, dtype="float64")
    nets = with_constant_critics(small_nets, 1.7)
    nets.value = constant_net(nets.value.sizes, 1.7)
    assert value_loss(nets, cfg, rng.normal(size=(5, 8)), rng=rng) == 0.0


def test_value_loss_half(small_nets, rng):
    cfg = SacConfig(temperature=0.0, dtype="float64")
    nets = with_constant_critics(small_nets, 0.0)
    nets.value = constant_net(nets.value.sizes, 1.0)
    assert value_loss(nets, cfg, rng.normal(size=(1, 8)), rng=rng) == 0.5


def test_value_loss_matches_loop_oracle(small_nets, config64, rng):
    states = rng.normal(size=(6, 8))
    noise = UpdateNoise.draw(rng, 6, 5, 1)
    total = 0.0
    for s, eps in zip(states, noise.value):
        a = select_action(small_nets, s, eps)
        x = np.concatenate([s, a.action])
        q = min(mlp_forward(small_nets.critic1, x)[0], mlp_forward(small_nets.critic2, x)[0])
        v = mlp_forward(small_nets.value, s)[0]
        total += 0.5 * (v - (q - config64.temperature * a.log_prob)) ** 2
    assert value_loss(small_nets, config64, states, noise=noise) == pytest.approx(total / 6,
                                                                                 abs=1e-10)


def test_empty_batch_raises(small_nets, config64):
    with pytest.raises(EmptyBatchError):
        value_loss(small_nets, config64, np.zeros((0, 8)), rng=np.random.default_rng(0))


# q loss


def test_q_loss_bellman_fixed_point(small_nets, rng):
    cfg = SacConfig(gamma=0.5, dtype="float64")
    nets = with_constant_critics(small_nets, 3.0)
    nets.target_value = constant_net(nets.value.sizes, 2.0)
    batch = random_batch(rng, 4)
    batch.rewards[:] = 3.0 - 0.5 * 2.0
    assert q_loss(nets, cfg, batch) == (0.0, 0.0)


def test_q_loss_direct_substitution(small_nets):
    cfg = SacConfig(gamma=0.0, dtype="float64")
    nets = with_constant_critics(small_nets, 0.0)
    batch = TransitionBatch(np.zeros((1, 8)), np.zeros((1, 5)), np.zeros((1, 8)), np.array([2.0]))
    assert q_loss(nets, cfg, batch) == (2.0, 2.0)


def test_q_loss_matches_loop_oracle(small_nets, config64, rng):
    batch = random_batch(rng, 5)
    l1 = l2 = 0.0
    for t in batch:
        y = t.reward + config64.gamma * mlp_forward(small_nets.target_value, t.next_state)[0]
        x = np.concatenate([t.state, t.action])
        l1 += 0.5 * (mlp_forward(small_nets.critic1, x)[0] - y) ** 2
        l2 += 0.5 * (mlp_forward(small_nets.critic2, x)[0] - y) ** 2
    q1, q2 = q_loss(small_nets, config64, batch)
    assert q1 == pytest.approx(l1 / 5, abs=1e-10) and q2 == pytest.approx(l2 / 5, abs=1e-10)


# policy loss


def test_policy_loss_constant_critic(small_nets, rng):
    cfg = SacConfig(temperature=0.0, dtype="float64")
    nets = with_constant_critics(small_nets, 4.25)
    for m in (1, 3):
        assert policy_loss(nets, cfg, rng.normal(size=(7, 8)),
                           noise=UpdateNoise.draw(rng, 7, 5, m)) == pytest.approx(-4.25, abs=1e-14)


def test_single_sample_policy_loss_is_plain_sac(small_nets, config64, rng):
    states = rng.normal(size=(4, 8))
    noise = UpdateNoise.draw(rng, 4, 5, 1)
    noise.smoothing[0] = noise.policy
    expected = 0.0
    for s, eps in zip(states, noise.policy):
        a = select_action(small_nets, s, eps)
        x = np.concatenate([s, a.action])
        q = min(mlp_forward(small_nets.critic1, x)[0], mlp_forward(small_nets.critic2, x)[0])
        expected += config64.temperature * a.log_prob - q
    assert policy_loss(small_nets, config64, states, noise=noise) == pytest.approx(expected / 4,
                                                                                  abs=1e-10)


def relu_pattern(nets, states, noise, actor_params):
    """Bytes describing every relu sign in the actor and the critics' smoothing pass."""
    bits = []
    h = states
    for k in range(len(nets.actor.layers)):
        h = h @ actor_params[2 * k].T + actor_params[2 * k + 1]
        if k < len(nets.actor.layers) - 1:
            bits.append(h > 0)
            h = np.maximum(h, 0)
    a = nets.action_dim
    mean, log_std = h[:, :a], np.clip(h[:, a:], -20, 2)
    acts = np.tanh(mean[None] + np.exp(log_std)[None] * noise.smoothing).reshape(-1, a)
    x = np.hstack([np.tile(states, (noise.smoothing.shape[0], 1)), acts])
    for critic in (nets.critic1, nets.critic2):
        g = x
        for layer in critic.layers[:-1]:
            g = g @ layer.weights.T + layer.biases
            bits.append(g > 0)
            g = np.maximum(g, 0)
    q1 = mlp_forward(nets.critic1, x)
    q2 = mlp_forward(nets.critic2, x)
    bits.append(q1 <= q2)
    return np.packbits(np.concatenate([b.ravel() for b in bits])).tobytes()


@pytest.mark.parametrize("seed", range(3))
def test_policy_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    nets = AgentNetworks.init(2, 1, rng, hidden_sizes=(8, 8), dtype=np.float64)
    cfg = SacConfig(dtype="float64")
    states = rng.normal(size=(5, 2))
    noise = UpdateNoise.draw(rng, 5, 1, 3)
    params = nets.actor.parameters()
    _, analytic = ad.grad_scalar(lambda p: policy_loss_t(nets, cfg, states, noise, p), params)
    numeric, _ = numeric_gradient(
        lambda p: float(policy_loss_t(nets, cfg, states, noise, p).value), params,
        pattern_fn=lambda p: relu_pattern(nets, states, noise, p))
    for k, (pos, vals) in numeric.items():
        err = relative_error(analytic[k].reshape(-1)[pos], vals, floor=1e-6)
        assert err.max() < 1e-3


# soft update


def test_soft_update_tau_one_copies(rng):
    src, dst = [rng.normal(size=(3, 4))], [rng.normal(size=(3, 4))]
    soft_update(src, dst, 1.0)
    np.testing.assert_array_equal(dst[0], src[0])


def test_soft_update_direct_substitution():
    dst = [np.zeros(1)]
    soft_update([np.ones(1)], dst, 0.005)
    assert dst[0][0] == pytest.approx(0.005, abs=1e-18)


def test_soft_update_geometric_closed_form():
    src, dst = [np.ones(3)], [np.array([0.0, 2.0, -5.0])]
    start = dst[0].copy()
    for k in range(1, 1001):
        soft_update(src, dst, 0.005)
        if k in (1, 10, 100, 1000):
            np.testing.assert_allclose(np.abs(dst[0] - 1.0), 0.995 ** k * np.abs(start - 1.0),
                                       rtol=0, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(-10, 10), st.floats(1e-3, 1.0), st.integers(0, 10**6))
def test_soft_update_is_linear(c, tau, seed):
    rng = np.random.default_rng(seed)
    src, dst = rng.normal(size=5), rng.normal(size=5)
    a, b = [dst.copy()], [c * dst]
    soft_update([src], a, tau)
    soft_update([c * src], b, tau)
    np.testing.assert_allclose(b[0], c * a[0], rtol=1e-12, atol=1e-12)


def test_soft_update_validation():
    with pytest.raises(ConfigError):
        soft_update([np.ones(1)], [np.ones(1)], 0.0)
    with pytest.raises(DimensionError):
        soft_update([np.ones(2)], [np.ones(3)], 0.5)


# update step


def make_agent(batch=16, dtype="float64", seed=0, **kw):
    cfg = SacConfig(batch_size=batch, hidden_sizes=(16, 16), dtype=dtype, **kw)
    return SacAgent.create(8, 5, cfg, np.random.default_rng(seed), np.random.default_rng(seed + 1))


def test_loss_report_matches_individual_losses(rng):
    agent = make_agent()
    batch = random_batch(rng, 16)
    noise = UpdateNoise.draw(rng, 16, 5, 4)
    before = copy.deepcopy(agent.nets)
    report = update_step(agent, batch, noise=noise)
    cfg = agent.config
    assert report.value_loss == pytest.approx(value_loss(before, cfg, batch.states, noise=noise),
                                              rel=1e-12)
    q1, q2 = q_loss(before, cfg, batch)
    assert report.q1_loss == pytest.approx(q1, rel=1e-12)
    assert report.q2_loss == pytest.approx(q2, rel=1e-12)
    # the actor step sees the updated critics and the actor as it was before its own step
    mixed = copy.deepcopy(agent.nets)
    mixed.actor = before.actor
    assert report.policy_loss == pytest.approx(policy_loss(mixed, cfg, batch.states, noise=noise),
                                               rel=1e-12)


def test_update_moves_every_network_and_blends_target(rng):
    agent = make_agent()
    before = copy.deepcopy(agent.nets)
    update_step(agent, random_batch(rng, 16))
    for name in ("actor", "critic1", "critic2", "value"):
        old, new = getattr(before, name).parameters(), getattr(agent.nets, name).parameters()
        assert any(not np.array_equal(a, b) for a, b in zip(old, new)), name
    tau = agent.config.tau
    for t_old, v_new, t_new in zip(before.target_value.parameters(), agent.nets.value.parameters(),
                                   agent.nets.target_value.parameters()):
        np.testing.assert_allclose(t_new, tau * v_new + (1 - tau) * t_old, rtol=1e-12, atol=1e-15)
    assert agent.updates == 1


def test_zero_gradients_leave_parameters(monkeypatch, rng):
    agent = make_agent()
    before = copy.deepcopy(agent.nets)

    def zero_grads(loss_fn, params):
        return 0.0, [np.zeros_like(p) for p in params]

    monkeypatch.setattr(sac.ad, "grad_scalar", zero_grads)
    update_step(agent, random_batch(rng, 16))
    for name in ("actor", "critic1", "critic2", "value"):
        for a, b in zip(getattr(before, name).parameters(), getattr(agent.nets, name).parameters()):
            np.testing.assert_array_equal(a, b)
    for t_old, v, t_new in zip(before.target_value.parameters(), before.value.parameters(),
                               agent.nets.target_value.parameters()):
        np.testing.assert_allclose(t_new, 0.005 * v + 0.995 * t_old, rtol=1e-12)


def test_twin_critics_stay_distinct(rng):
    agent = make_agent()
    for _ in range(5):
        update_step(agent, random_batch(rng, 16))
    assert not np.array_equal(agent.nets.critic1.layers[0].weights,
                              agent.nets.critic2.layers[0].weights)


def test_update_is_deterministic(rng):
    batch = random_batch(rng, 16)
    agents = [make_agent(seed=3) for _ in range(2)]
    reports = [update_step(a, batch) for a in agents]
    assert reports[0] == reports[1]
    for a, b in zip(agents[0].nets.actor.parameters(), agents[1].nets.actor.parameters()):
        assert a.tobytes() == b.tobytes()


def test_batch_size_mismatch_raises(rng):
    with pytest.raises(DimensionError):
        update_step(make_agent(), random_batch(rng, 8))


def test_float32_agent_runs(rng):
    agent = make_agent(dtype="float32")
    report = update_step(agent, random_batch(rng, 16))
    assert all(np.isfinite(v) for v in vars(report).values())
    assert agent.nets.actor.layers[0].weights.dtype == np.float32
    assert select_action(agent.nets, np.ones(8), rng=rng).action.dtype == np.float64


def test_bandit_policy_loss_trends_down():
    """Two-state bandit: reward peaks at a = +0.5 in state 0 and a = -0.5 in state 1."""
    rng = np.random.default_rng(0)
    cfg = SacConfig(batch_size=32, hidden_sizes=(32, 32), dtype="float64", gamma=0.0)
    agent = SacAgent.create(2, 1, cfg, np.random.default_rng(1), np.random.default_rng(2))
    states = np.eye(2)[rng.integers(0, 2, 2000)]
    actions = rng.uniform(-1, 1, (2000, 1))
    goal = np.where(states[:, 0] == 1, 0.5, -0.5)
    rewards = 1.0 - (actions[:, 0] - goal) ** 2
    losses = []
    for _ in range(500):
        idx = rng.choice(2000, 32, replace=False)
        batch = TransitionBatch(states[idx], actions[idx], states[idx], rewards[idx])
        losses.append(update_step(agent, batch).policy_loss)
    slope = np.polyfit(np.arange(500), losses, 1)[0]
    assert slope < 0
