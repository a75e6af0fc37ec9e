"""Ring-buffer replay storage and hierarchical mixture augmentation."""
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigError, DimensionError, InsufficientSamplesError


@dataclass
class Transition:
    state: np.ndarray
    action: np.ndarray
    next_state: np.ndarray
    reward: float


@dataclass
class TransitionBatch:
    """Column-stacked transitions."""

    states: np.ndarray
    actions: np.ndarray
    next_states: np.ndarray
    rewards: np.ndarray

    def __len__(self):
        return len(self.rewards)

    def __getitem__(self, k):
        return Transition(self.states[k], self.actions[k], self.next_states[k],
                          float(self.rewards[k]))

    def __iter__(self):
        return (self[k] for k in range(len(self)))

    @classmethod
    def from_transitions(cls, transitions):
        transitions = list(transitions)
        return cls(np.array([t.state for t in transitions], dtype=np.float64),
                   np.array([t.action for t in transitions], dtype=np.float64),
                   np.array([t.next_state for t in transitions], dtype=np.float64),
                   np.array([t.reward for t in transitions], dtype=np.float64))


class ReplayBuffer:
    """Fixed-capacity FIFO of transitions with seeded uniform sampling."""

    def __init__(self, capacity, state_dim, action_dim, rng=None):
        if capacity < 1:
            raise ConfigError("capacity must be positive")
        self.capacity = capacity
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros((capacity, action_dim))
        self.next_states = np.zeros((capacity, state_dim))
        self.rewards = np.zeros(capacity)
        self.size = 0
        self.cursor = 0

    def __len__(self):
        return self.size

    def push(self, t):
        state = np.asarray(t.state, dtype=np.float64)
        action = np.asarray(t.action, dtype=np.float64)
        next_state = np.asarray(t.next_state, dtype=np.float64)
        if (state.shape != (self.state_dim,) or next_state.shape != (self.state_dim,)
                or action.shape != (self.action_dim,)):
            raise DimensionError(
                f"transition shapes {state.shape}/{action.shape}/{next_state.shape} do not fit "
                f"state_dim={self.state_dim}, action_dim={self.action_dim}", where="replay")
        k = self.cursor
        self.states[k] = state
        self.actions[k] = action
        self.next_states[k] = next_state
        self.rewards[k] = t.reward
        self.cursor = (k + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def _slot(self, age_index):
        """Storage slot of the ``age_index``-th oldest item."""
        start = self.cursor if self.size == self.capacity else 0
        return (start + age_index) % self.capacity

    def contents(self):
        """Stored transitions, oldest first."""
        slots = [self._slot(k) for k in range(self.size)]
        return self.gather(np.array(slots, dtype=np.intp))

    def gather(self, slots):
        return TransitionBatch(self.states[slots].copy(), self.actions[slots].copy(),
                               self.next_states[slots].copy(), self.rewards[slots].copy())

    def sample_indices(self, k, replace=False):
        if k > self.size and not replace:
            raise InsufficientSamplesError(self.size, k)
        if self.size == 0:
            raise InsufficientSamplesError(0, k)
        return self.rng.choice(self.size, size=k, replace=replace)

    def sample_batch(self, k):
        """``k`` distinct transitions drawn uniformly at random."""
        return self.gather(self.sample_indices(k))


@dataclass
class MixConfig:
    alpha_mix: float = 0.1
    levels: int = 2

    def __post_init__(self):
        if not 0.0 < self.alpha_mix < 1.0:
            raise ConfigError("alpha_mix must lie strictly between 0 and 1")
        if self.levels < 1:
            raise ConfigError("levels must be at least 1")


def mix_weights(n, alpha):
    """Weights on (base, partner_1, ..., partner_n); they sum to one."""
    j = np.arange(1, n + 1)
    return (1.0 - alpha) ** n, alpha * (1.0 - alpha) ** (n - j)


def mix_closed_form(base, partners, alpha):
    """(1-a)^n * base + sum_j a (1-a)^(n-j) * partner_j over n partners.

    ``base`` is a scalar or vector; ``partners`` holds one row per partner.
    """
    scalar = np.ndim(base) == 0
    base = np.atleast_1d(np.asarray(base, dtype=np.float64))
    partners = np.asarray(partners, dtype=np.float64).reshape(-1, base.size)
    if partners.shape[0] < 1:
        raise ValueError("at least one partner is required")
    out = kernels.mix_closed_form(base, partners, alpha)
    return float(out[0]) if scalar else out


class AugmentStats:
    def __init__(self):
        self.skipped = 0
        self.with_replacement = 0


def augment_hierarchical(t, buffer, config, rng, stats=None):
    """One mixed transition per level n = 1..N.

    Each level draws its own n partners (without replacement when the
    buffer is large enough); state, next-state and reward are mixed over
    the same partners and the action is carried over unchanged. Stored
    transitions are only read.
    """
    if buffer.size == 0:
        if stats is not None:
            stats.skipped += 1
        return []
    out = []
    state = np.asarray(t.state, dtype=np.float64)
    next_state = np.asarray(t.next_state, dtype=np.float64)
    for n in range(1, config.levels + 1):
        replace = buffer.size < n
        if replace and stats is not None:
            stats.with_replacement += 1
        picks = rng.choice(buffer.size, size=n, replace=replace)
        slots = np.array([buffer._slot(int(k)) for k in picks], dtype=np.intp)
        out.append(Transition(
            mix_closed_form(state, buffer.states[slots], config.alpha_mix),
            np.array(t.action, dtype=np.float64),
            mix_closed_form(next_state, buffer.next_states[slots], config.alpha_mix),
            mix_closed_form(float(t.reward), buffer.rewards[slots], config.alpha_mix),
        ))
    return out
