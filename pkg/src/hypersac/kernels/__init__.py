"""Hot elementwise kernels with a jitted and a pure-numpy implementation.

The jitted path is used when numba imports cleanly and the environment
variable ``HYPERSAC_NUMBA`` is not set to ``0``. ``BACKEND`` reports the
choice made at import time.
"""
import os

from . import _numpy as numpy_impl

numba_impl = None
if os.environ.get("HYPERSAC_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off"):
    try:
        from . import _numba as numba_impl
    except ImportError:  # pragma: no cover - numba missing
        numba_impl = None

_active = numba_impl if numba_impl is not None else numpy_impl
BACKEND = "numba" if numba_impl is not None else "numpy"

sigmoid = _active.sigmoid
relu = _active.relu
relu_backward = _active.relu_backward
adam_update = _active.adam_update
soft_update = _active.soft_update
mix_closed_form = _active.mix_closed_form
lstm_pointwise = _active.lstm_pointwise

__all__ = [
    "BACKEND", "numpy_impl", "numba_impl", "sigmoid", "relu", "relu_backward",
    "adam_update", "soft_update", "mix_closed_form", "lstm_pointwise",
]
