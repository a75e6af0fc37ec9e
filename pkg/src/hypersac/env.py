"""The tuning MDP: a frozen random LSTM turns the action history into the
agent's state, and each action is decoded into a hyper-parameter vector
whose validation loss sets the reward."""
from dataclasses import dataclass, field
import math

import numpy as np

from .errors import ConfigError, DimensionError, RewardBaselineError
from .nn import LstmCellParams, lstm_step


@dataclass(frozen=True)
class HyperParamDim:
    name: str
    lower: float
    upper: float
    scale: str = "linear"
    integer: bool = False

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ConfigError(f"{self.name}: lower {self.lower} must be below upper {self.upper}")
        if self.scale not in ("linear", "log10"):
            raise ConfigError(f"{self.name}: unknown scale {self.scale!r}")
        if self.scale == "log10" and self.lower <= 0:
            raise ConfigError(f"{self.name}: log10 scale needs a positive lower bound")
        if self.integer and round(self.lower) > round(self.upper):
            raise ConfigError(f"{self.name}: integer bounds round to an empty range")

    def decode(self, a):
        t = (a + 1.0) / 2.0
        if self.scale == "log10":
            lo, hi = math.log10(self.lower), math.log10(self.upper)
            value = 10.0 ** (lo + t * (hi - lo))
        else:
            value = self.lower + t * (self.upper - self.lower)
        if self.integer:
            value = math.floor(value + 0.5)
        return min(max(value, self.lower), self.upper)

    def normalize(self, value):
        """Position of ``value`` inside the bounds, in [0, 1]."""
        if self.scale == "log10":
            lo, hi = math.log10(self.lower), math.log10(self.upper)
            return (math.log10(value) - lo) / (hi - lo)
        return (value - self.lower) / (self.upper - self.lower)

    def to_dict(self):
        return {"name": self.name, "lower": self.lower, "upper": self.upper,
                "scale": self.scale, "integer": self.integer}


@dataclass(frozen=True)
class HyperParamSpace:
    dims: tuple

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(self.dims))
        if not self.dims:
            raise ConfigError("a search space needs at least one dimension")
        names = [d.name for d in self.dims]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate dimension names in {names}")

    def __len__(self):
        return len(self.dims)

    @property
    def names(self):
        return [d.name for d in self.dims]

    def normalize(self, lam):
        return np.array([d.normalize(v) for d, v in zip(self.dims, lam)])

    def sample(self, rng):
        """Uniform draw in action coordinates, decoded."""
        return decode_action(self, rng.uniform(-1.0, 1.0, size=len(self)))

    @classmethod
    def from_list(cls, items):
        return cls(tuple(HyperParamDim(**item) for item in items))

    def to_list(self):
        return [d.to_dict() for d in self.dims]


# search spaces for a gradient-boosting learner and a small CNN
LIGHTGBM_SPACE = HyperParamSpace((
    HyperParamDim("feature_fraction", 0.00001, 1.0),
    HyperParamDim("learning_rate", 0.00001, 1.0),
    HyperParamDim("bagging_fraction", 0.00001, 1.0),
    HyperParamDim("reg_alpha", 0.0, 1000.0),
    HyperParamDim("reg_lambda", 0.0, 1000.0),
))

CNN_SPACE = HyperParamSpace((
    HyperParamDim("conv_channels", 1, 10, integer=True),
    HyperParamDim("conv_kernel", 1, 5, integer=True),
    HyperParamDim("conv_stride", 1, 5, integer=True),
    HyperParamDim("fc_nodes", 10, 1000, integer=True),
    HyperParamDim("learning_rate", 0.00001, 1.0),
))


class ActionClampCounter:
    def __init__(self):
        self.count = 0


def decode_action(space, action, warnings=None):
    """Map an action in [-1, 1]^d to a hyper-parameter vector.

    Entries outside [-1, 1] are clamped; ``warnings`` (an object with a
    ``count`` attribute) is incremented once per clamped entry.
    """
    action = np.asarray(action, dtype=np.float64)
    if action.shape != (len(space),):
        raise DimensionError(f"action has shape {action.shape}, space has {len(space)} dims")
    outside = np.abs(action) > 1.0
    if outside.any():
        if warnings is not None:
            warnings.count += int(outside.sum())
        action = np.clip(action, -1.0, 1.0)
    return np.array([d.decode(a) for d, a in zip(space.dims, action)])


@dataclass
class RewardConfig:
    baseline: float = 0.0
    min_gap: float = 1e-6
    adaptive: bool = False
    adaptive_margin: float = 1e-3

    def __post_init__(self):
        if self.min_gap <= 0:
            raise ConfigError("min_gap must be positive")


def compute_reward(loss, config=None):
    """Reciprocal reward 1 / (loss - baseline); strictly positive."""
    config = config or RewardConfig()
    if not loss > config.baseline + config.min_gap:
        raise RewardBaselineError(loss, config.baseline, config.min_gap)
    return 1.0 / (loss - config.baseline)


@dataclass
class EnvState:
    hidden: np.ndarray
    cell: np.ndarray
    step_index: int = 0


@dataclass
class StepResult:
    next_state: np.ndarray
    reward: float
    done: bool
    loss: float
    hyperparams: np.ndarray


@dataclass
class HpoEnv:
    """Fixed-horizon tuning environment.

    ``objective`` is any callable ``lambda_vector -> loss``. The LSTM
    weights are drawn once from ``rng`` and never trained.
    """

    space: HyperParamSpace
    objective: object
    horizon: int = 10
    hidden_dim: int = 8
    reward: RewardConfig = field(default_factory=RewardConfig)
    rng: np.random.Generator = None
    lstm: LstmCellParams = None

    def __post_init__(self):
        if self.horizon < 1:
            raise ConfigError("horizon must be positive")
        if self.lstm is None:
            rng = self.rng if self.rng is not None else np.random.default_rng(0)
            self.lstm = LstmCellParams.init(len(self.space), self.hidden_dim, rng)
        if self.lstm.input_dim != len(self.space) or self.lstm.hidden_dim != self.hidden_dim:
            raise DimensionError("LSTM shape does not match action and state sizes", where="env")
        self.clamp_warnings = ActionClampCounter()
        self._min_loss = math.inf
        self.state = self.reset()

    @property
    def state_dim(self):
        return self.hidden_dim

    @property
    def action_dim(self):
        return len(self.space)

    def reset(self):
        self.state = EnvState(np.ones(self.hidden_dim), np.ones(self.hidden_dim), 0)
        return self.state

    def _reward_config(self, loss):
        cfg = self.reward
        if not cfg.adaptive:
            return cfg
        self._min_loss = min(self._min_loss, loss)
        return RewardConfig(min(cfg.baseline, self._min_loss - cfg.adaptive_margin), cfg.min_gap)

    def step(self, action):
        if self.state.step_index >= self.horizon:
            raise RuntimeError("episode finished; call reset()")
        lam = decode_action(self.space, action, self.clamp_warnings)
        loss = float(self.objective(lam))
        reward = compute_reward(loss, self._reward_config(loss))
        a = np.clip(np.asarray(action, dtype=np.float64), -1.0, 1.0)
        hidden, cell = lstm_step(self.lstm, a, self.state.hidden, self.state.cell)
        index = self.state.step_index + 1
        self.state = EnvState(hidden, cell, index)
        return StepResult(hidden.copy(), reward, index == self.horizon, loss, lam)


def env_step(env, action):
    """Functional alias for :meth:`HpoEnv.step`."""
    return env.step(action)
