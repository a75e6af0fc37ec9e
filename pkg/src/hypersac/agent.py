"""Soft actor-critic with twin critics and a state-value target.

The policy loss uses smoothing-Q: the running mean of min-twin Q over
several reparameterized actions."""
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import kernels
from .errors import ConfigError, DimensionError, EmptyBatchError, NonFiniteError
from .nn import (LOG_STD_MAX, LOG_STD_MIN, MlpNetwork, gaussian_log_prob_t, mlp_forward,
                 tanh_squash_correction_t)
from .optim import AdamState, adam_step


@dataclass
class SacConfig:
    gamma: float = 0.5
    tau: float = 0.005
    temperature: float = 0.2
    critic_lr: float = 3e-4
    actor_lr: float = 3e-3
    batch_size: int = 64
    smoothing_samples: int = 4
    hidden_sizes: tuple = (256, 256)
    dtype: str = "float32"

    def __post_init__(self):
        self.hidden_sizes = tuple(self.hidden_sizes)
        if self.dtype not in ("float32", "float64"):
            raise ConfigError("dtype must be 'float32' or 'float64'")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError("gamma must lie in [0, 1]")
        if not 0.0 < self.tau <= 1.0:
            raise ConfigError("tau must lie in (0, 1]")
        if self.temperature < 0:
            raise ConfigError("temperature must be non-negative")
        if self.critic_lr <= 0 or self.actor_lr <= 0:
            raise ConfigError("learning rates must be positive")
        if self.batch_size < 1 or self.smoothing_samples < 1:
            raise ConfigError("batch_size and smoothing_samples must be positive")


@dataclass
class AgentNetworks:
    actor: MlpNetwork
    critic1: MlpNetwork
    critic2: MlpNetwork
    value: MlpNetwork
    target_value: MlpNetwork

    def __post_init__(self):
        if self.actor.out_dim % 2:
            raise DimensionError("actor must emit a mean and a log-std per action dimension")
        if self.critic1.sizes != self.critic2.sizes:
            raise DimensionError("twin critics differ in shape")
        if self.value.sizes != self.target_value.sizes:
            raise DimensionError("value and target-value networks differ in shape")
        if self.critic1.in_dim != self.state_dim + self.action_dim:
            raise DimensionError("critic input must be state_dim + action_dim")
        if self.critic1.parameters()[0] is self.critic2.parameters()[0]:
            raise ValueError("twin critics must not share parameters")

    @classmethod
    def init(cls, state_dim, action_dim, rng, hidden_sizes=(256, 256), dtype=np.float64):
        hidden = list(hidden_sizes)
        value = MlpNetwork.init([state_dim] + hidden + [1], rng, dtype)
        return cls(
            actor=MlpNetwork.init([state_dim] + hidden + [2 * action_dim], rng, dtype),
            critic1=MlpNetwork.init([state_dim + action_dim] + hidden + [1], rng, dtype),
            critic2=MlpNetwork.init([state_dim + action_dim] + hidden + [1], rng, dtype),
            value=value,
            target_value=value.copy(),
        )

    @property
    def state_dim(self):
        return self.actor.in_dim

    @property
    def action_dim(self):
        return self.actor.out_dim // 2

    @property
    def dtype(self):
        return self.actor.dtype


@dataclass
class ActionSample:
    pre_squash: np.ndarray
    action: np.ndarray
    log_prob: float


@dataclass
class UpdateNoise:
    """Standard-normal draws consumed by one update step."""

    value: np.ndarray      # (B, A) actions for the value target
    policy: np.ndarray     # (B, A) action whose log-prob enters the policy loss
    smoothing: np.ndarray  # (M, B, A) actions averaged by smoothing-Q

    @classmethod
    def draw(cls, rng, batch, action_dim, samples):
        return cls(rng.standard_normal((batch, action_dim)),
                   rng.standard_normal((batch, action_dim)),
                   rng.standard_normal((samples, batch, action_dim)))


@dataclass
class LossReport:
    value_loss: float
    q1_loss: float
    q2_loss: float
    policy_loss: float


# --- policy ---------------------------------------------------------------

def actor_heads(nets, states, params=None):
    """Mean and clamped log-std tensors for a batch of states."""
    out = nets.actor.apply(states, params)
    a = nets.action_dim
    return out[:, :a], ad.clip(out[:, a:], LOG_STD_MIN, LOG_STD_MAX)


def squashed_sample(mean, log_std, noise):
    """Reparameterized draw: ``(u, tanh(u), log pi(tanh(u)))`` as tensors."""
    u = ad.add(mean, ad.mul(ad.exp(log_std), noise))
    log_prob = ad.sub(gaussian_log_prob_t(mean, log_std, u), tanh_squash_correction_t(u))
    return u, ad.tanh(u), log_prob


def select_action(nets, state, noise=None, deterministic=False, rng=None):
    state = np.asarray(state, dtype=np.float64)
    if state.shape != (nets.state_dim,):
        raise DimensionError(f"state has shape {state.shape}, expected ({nets.state_dim},)")
    if deterministic:
        noise = np.zeros(nets.action_dim)
    elif noise is None:
        if rng is None:
            raise ValueError("either noise or rng is required for a stochastic action")
        noise = rng.standard_normal(nets.action_dim)
    noise = np.asarray(noise, dtype=np.float64)
    if noise.shape != (nets.action_dim,):
        raise DimensionError(f"noise has shape {noise.shape}, expected ({nets.action_dim},)")
    try:
        mean, log_std = actor_heads(nets, state[None])
        u, a, log_prob = squashed_sample(mean, log_std, noise[None].astype(nets.dtype))
    except NonFiniteError as exc:
        raise NonFiniteError(f"actor/{exc.primitive}") from exc
    return ActionSample(u.value[0].astype(np.float64), a.value[0].astype(np.float64),
                        float(log_prob.value[0]))


# --- critics --------------------------------------------------------------

def _critic_input(states, actions):
    return ad.concat([states, actions], axis=-1)


def min_twin_q(nets, states, actions):
    """min(Q1, Q2) as a (B, 1) tensor; critic weights are treated as constants."""
    x = _critic_input(states, actions)
    return ad.minimum(nets.critic1.apply(x), nets.critic2.apply(x))


def smoothing_q(nets, state, samples, rng=None, noise=None):
    """Running-mean estimate of min-twin Q over ``samples`` policy actions at one state.

    ``noise`` (samples, A) fixes the draws; otherwise they come from ``rng``.
    """
    if samples < 1:
        raise ValueError("samples must be at least 1")
    state = np.asarray(state, dtype=nets.dtype)
    if noise is None:
        noise = rng.standard_normal((samples, nets.action_dim))
    noise = np.asarray(noise, dtype=nets.dtype).reshape(samples, nets.action_dim)
    mean, log_std = actor_heads(nets, state[None])
    actions = np.tanh(mean.value + np.exp(log_std.value) * noise)
    q = min_twin_q(nets, np.repeat(state[None], samples, axis=0), actions).value[:, 0]
    return running_mean(q)


def running_mean(values):
    """Incremental mean ``m <- (m * i + v_i) / (i + 1)``."""
    mean = 0.0
    for i, v in enumerate(values):
        mean = (mean * i + float(v)) / (i + 1)
    return mean


# --- losses ---------------------------------------------------------------

def _check_batch(n):
    if n == 0:
        raise EmptyBatchError("loss needs a non-empty batch")


def value_loss_t(nets, config, states, noise, value_params=None):
    states = np.asarray(states, dtype=nets.dtype)
    _check_batch(len(states))
    mean, log_std = actor_heads(nets, states)
    _, actions, log_prob = squashed_sample(mean, log_std, np.asarray(noise, dtype=nets.dtype))
    q = min_twin_q(nets, states, actions).value[:, 0]
    target = q - config.temperature * log_prob.value
    v = nets.value.apply(states, value_params)[:, 0]
    return ad.mul(ad.mean(ad.square(ad.sub(v, target))), 0.5)


def q_targets(nets, config, batch):
    v_next = mlp_forward(nets.target_value, batch.next_states)[:, 0]
    return (batch.rewards + config.gamma * v_next).astype(nets.dtype)


def q_loss_t(nets, config, batch, critic, critic_params=None, targets=None):
    _check_batch(len(batch))
    if targets is None:
        targets = q_targets(nets, config, batch)
    q = critic.apply(np.concatenate([batch.states, batch.actions], axis=1), critic_params)
    return ad.mul(ad.mean(ad.square(ad.sub(q[:, 0], np.asarray(targets, dtype=nets.dtype)))),
                  0.5)


def policy_loss_t(nets, config, states, noise, actor_params=None):
    """mean_b [temperature * log pi(a_b|s_b) - smoothing-Q(s_b)] with reparameterized actions."""
    states = np.asarray(states, dtype=nets.dtype)
    _check_batch(len(states))
    m, b, a = noise.smoothing.shape
    mean, log_std = actor_heads(nets, states, actor_params)
    _, _, log_prob = squashed_sample(mean, log_std, np.asarray(noise.policy, dtype=nets.dtype))
    u = ad.add(ad.reshape(mean, (1, b, a)),
               ad.mul(ad.reshape(ad.exp(log_std), (1, b, a)),
                      np.asarray(noise.smoothing, dtype=nets.dtype)))
    actions = ad.tanh(ad.reshape(u, (m * b, a)))
    q = min_twin_q(nets, np.tile(states, (m, 1)), actions)
    sq = ad.mean(ad.reshape(q, (m, b)), axis=0)
    return ad.mean(ad.sub(ad.mul(log_prob, config.temperature), sq))


def _noise_for(nets, config, n, rng, noise, samples=None):
    if noise is not None:
        return noise
    if rng is None:
        raise ValueError("either noise or rng is required")
    return UpdateNoise.draw(rng, n, nets.action_dim,
                            samples if samples is not None else config.smoothing_samples)


def value_loss(nets, config, states, rng=None, noise=None):
    noise = _noise_for(nets, config, len(states), rng, noise)
    return float(value_loss_t(nets, config, states, noise.value).value)


def q_loss(nets, config, batch):
    targets = q_targets(nets, config, batch)
    return (float(q_loss_t(nets, config, batch, nets.critic1, targets=targets).value),
            float(q_loss_t(nets, config, batch, nets.critic2, targets=targets).value))


def policy_loss(nets, config, states, rng=None, noise=None):
    noise = _noise_for(nets, config, len(states), rng, noise)
    return float(policy_loss_t(nets, config, states, noise).value)


def soft_update(value_params, target_params, tau):
    """target <- tau * value + (1 - tau) * target, in place; returns the targets."""
    if not 0.0 < tau <= 1.0:
        raise ConfigError("tau must lie in (0, 1]")
    if len(value_params) != len(target_params):
        raise DimensionError("parameter lists differ in length")
    for src, dst in zip(value_params, target_params):
        if src.shape != dst.shape:
            raise DimensionError(f"shape {src.shape} vs {dst.shape}")
        kernels.soft_update(dst, src, tau)
    return target_params


# --- learner --------------------------------------------------------------

@dataclass
class SacAgent:
    """Networks, optimizer states and the noise generator of one learner."""

    nets: AgentNetworks
    config: SacConfig
    rng: np.random.Generator
    value_opt: AdamState = None
    critic1_opt: AdamState = None
    critic2_opt: AdamState = None
    actor_opt: AdamState = None
    updates: int = 0

    def __post_init__(self):
        c = self.config
        self.value_opt = self.value_opt or AdamState.for_params(self.nets.value.parameters(),
                                                                lr=c.critic_lr)
        self.critic1_opt = self.critic1_opt or AdamState.for_params(
            self.nets.critic1.parameters(), lr=c.critic_lr)
        self.critic2_opt = self.critic2_opt or AdamState.for_params(
            self.nets.critic2.parameters(), lr=c.critic_lr)
        self.actor_opt = self.actor_opt or AdamState.for_params(self.nets.actor.parameters(),
                                                                lr=c.actor_lr)

    @classmethod
    def create(cls, state_dim, action_dim, config, init_rng, noise_rng):
        nets = AgentNetworks.init(state_dim, action_dim, init_rng, config.hidden_sizes,
                                  np.dtype(config.dtype))
        return cls(nets, config, noise_rng)

    def act(self, state, deterministic=False):
        return select_action(self.nets, state, deterministic=deterministic, rng=self.rng)

    def update(self, batch, smoothing_samples=None, noise=None):
        return update_step(self, batch, smoothing_samples=smoothing_samples, noise=noise)


def update_step(agent, batch, smoothing_samples=None, noise=None):
    """Value, twin-critic and actor Adam steps in that order, then the target blend.

    Each reported loss is the one its own gradient step descended, i.e. the
    actor's loss already sees the freshly updated critics.
    """
    nets, config = agent.nets, agent.config
    if len(batch) != config.batch_size:
        raise DimensionError(f"batch of {len(batch)} rows, config expects {config.batch_size}")
    samples = smoothing_samples or config.smoothing_samples
    noise = _noise_for(nets, config, len(batch), agent.rng, noise, samples)

    v_loss, grads = ad.grad_scalar(
        lambda p: value_loss_t(nets, config, batch.states, noise.value, p),
        nets.value.parameters())
    adam_step(agent.value_opt, nets.value.parameters(), grads)

    targets = q_targets(nets, config, batch)
    q_losses = []
    for critic, opt in ((nets.critic1, agent.critic1_opt), (nets.critic2, agent.critic2_opt)):
        loss, grads = ad.grad_scalar(
            lambda p, critic=critic: q_loss_t(nets, config, batch, critic, p, targets),
            critic.parameters())
        adam_step(opt, critic.parameters(), grads)
        q_losses.append(loss)

    pi_loss, grads = ad.grad_scalar(
        lambda p: policy_loss_t(nets, config, batch.states, noise, p),
        nets.actor.parameters())
    adam_step(agent.actor_opt, nets.actor.parameters(), grads)

    soft_update(nets.value.parameters(), nets.target_value.parameters(), config.tau)
    agent.updates += 1
    return LossReport(v_loss, q_losses[0], q_losses[1], pi_loss)
