import numpy as np
import pytest

from hypersac.agent import AgentNetworks, SacConfig
from hypersac.replay import TransitionBatch


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_nets():
    """float64 agent with the reference state/action sizes but narrow hidden layers."""
    return AgentNetworks.init(8, 5, np.random.default_rng(7), hidden_sizes=(16, 16),
                              dtype=np.float64)


@pytest.fixture
def ref_nets():
    """float64 agent with the reference 256-256 layout."""
    return AgentNetworks.init(8, 5, np.random.default_rng(11), dtype=np.float64)


def random_batch(rng, n, state_dim=8, action_dim=5):
    return TransitionBatch(rng.normal(size=(n, state_dim)), rng.uniform(-1, 1, (n, action_dim)),
                           rng.normal(size=(n, state_dim)), rng.uniform(1, 50, n))


@pytest.fixture
def config64():
    return SacConfig(batch_size=16, hidden_sizes=(16, 16), dtype="float64")
