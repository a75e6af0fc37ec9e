"""Hyper-parameter optimization with a soft actor-critic agent.

The policy loss averages Q over several sampled actions, and replay data is
augmented by hierarchical mixing of stored transitions."""
from .agent import AgentNetworks, SacAgent, SacConfig, select_action, smoothing_q, update_step
from .env import CNN_SPACE, LIGHTGBM_SPACE, HpoEnv, HyperParamDim, HyperParamSpace, RewardConfig
from .errors import (ConfigError, DatasetError, DimensionError, EmptyBatchError, HyperSacError,
                     InsufficientSamplesError, NonFiniteError, RewardBaselineError)
from .harness import RunConfig, run_ablation, run_random_search, run_sac_hpo
from .kernels import BACKEND
from .objectives import Objective, ObjectiveSpec
from .replay import MixConfig, ReplayBuffer, Transition, augment_hierarchical

__version__ = "0.1.0"

__all__ = [
    "AgentNetworks", "SacAgent", "SacConfig", "select_action", "smoothing_q", "update_step",
    "CNN_SPACE", "LIGHTGBM_SPACE", "HpoEnv", "HyperParamDim", "HyperParamSpace", "RewardConfig",
    "ConfigError", "DatasetError", "DimensionError", "EmptyBatchError", "HyperSacError",
    "InsufficientSamplesError", "NonFiniteError", "RewardBaselineError",
    "RunConfig", "run_ablation", "run_random_search", "run_sac_hpo", "BACKEND",
    "Objective", "ObjectiveSpec", "MixConfig", "ReplayBuffer", "Transition",
    "augment_hierarchical",
]
