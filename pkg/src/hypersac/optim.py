"""Adam with bias correction, updating parameter arrays in place."""
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DimensionError


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)
    step: int = 0

    @classmethod
    def for_params(cls, params, **hyper):
        return cls(m=[np.zeros_like(p) for p in params], v=[np.zeros_like(p) for p in params],
                   **hyper)


def adam_step(state, params, grads):
    """Apply one Adam update to ``params`` (in place) and return them."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise DimensionError(
            f"{len(params)} parameters, {len(grads)} gradients, {len(state.m)} moment slots")
    for p, g, m in zip(params, grads, state.m):
        if p.shape != np.shape(g) or p.shape != m.shape:
            raise DimensionError(f"parameter {p.shape} vs gradient {np.shape(g)}")
    state.step += 1
    for p, g, m, v in zip(params, grads, state.m, state.v):
        kernels.adam_update(p, m, v, np.asarray(g, dtype=np.float64), state.lr, state.beta1,
                            state.beta2, state.epsilon, state.step)
    return params
