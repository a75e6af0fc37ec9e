"""Dense networks and the LSTM cell, plus diagonal-Gaussian helpers for the policy."""
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import DimensionError

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
SQUASH_EPS = 1e-6
_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)


def uniform_init(rng, out_dim, in_dim, dtype=np.float64):
    bound = 1.0 / np.sqrt(in_dim)
    return (rng.uniform(-bound, bound, size=(out_dim, in_dim)).astype(dtype),
            rng.uniform(-bound, bound, size=out_dim).astype(dtype))


def _float_array(x):
    x = np.asarray(x)
    return x if x.dtype.kind == "f" else x.astype(np.float64)


@dataclass
class DenseLayer:
    weights: np.ndarray
    biases: np.ndarray

    def __post_init__(self):
        self.weights = _float_array(self.weights)
        self.biases = _float_array(self.biases).astype(self.weights.dtype, copy=False)
        if self.weights.ndim != 2 or self.biases.shape != (self.weights.shape[0],):
            raise DimensionError(
                f"weights {self.weights.shape} and biases {self.biases.shape} disagree")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.biases))):
            raise ValueError("layer parameters must be finite")

    @property
    def in_dim(self):
        return self.weights.shape[1]

    @property
    def out_dim(self):
        return self.weights.shape[0]


class MlpNetwork:
    """Stack of dense layers; relu between layers, identity on the output."""

    def __init__(self, layers):
        self.layers = list(layers)
        if not self.layers:
            raise ValueError("an MLP needs at least one layer")
        for k in range(1, len(self.layers)):
            if self.layers[k - 1].out_dim != self.layers[k].in_dim:
                raise DimensionError(
                    f"expects {self.layers[k].in_dim} inputs but layer {k - 1} "
                    f"emits {self.layers[k - 1].out_dim}", where=f"layer {k}")

    @classmethod
    def init(cls, sizes, rng, dtype=np.float64):
        """Fresh network with layer widths ``sizes`` (input first).

        Draws happen in float64 and are then cast, so a float32 network holds
        the rounded values of its float64 twin from the same seed.
        """
        return cls([DenseLayer(*uniform_init(rng, n_out, n_in, dtype))
                    for n_in, n_out in zip(sizes[:-1], sizes[1:])])

    @property
    def dtype(self):
        return self.layers[0].weights.dtype

    @property
    def sizes(self):
        return [self.layers[0].in_dim] + [layer.out_dim for layer in self.layers]

    @property
    def in_dim(self):
        return self.layers[0].in_dim

    @property
    def out_dim(self):
        return self.layers[-1].out_dim

    def parameters(self):
        """Live parameter arrays, ordered (w0, b0, w1, b1, ...)."""
        params = []
        for layer in self.layers:
            params += [layer.weights, layer.biases]
        return params

    def copy(self):
        return MlpNetwork([DenseLayer(l.weights.copy(), l.biases.copy()) for l in self.layers])

    def apply(self, x, params=None):
        """Tape-aware forward pass on a batch ``x`` of shape (B, in).

        ``params`` optionally replaces the stored arrays (e.g. with trainable
        leaves from :func:`hypersac.autodiff.grad_scalar`).
        """
        if params is None:
            params = self.parameters()
        if not isinstance(x, ad.Tensor):
            x = np.asarray(x, dtype=self.dtype)
        width = ad.as_tensor(x).shape[-1]
        if width != self.in_dim:
            raise DimensionError(f"expected {self.in_dim} inputs, got {width}", where="layer 0")
        out = x
        last = len(self.layers) - 1
        for k in range(len(self.layers)):
            out = ad.dense(out, params[2 * k], params[2 * k + 1])
            if k < last:
                out = ad.relu(out)
        return out


def mlp_forward(net, x):
    """Plain forward pass; accepts one input vector or a (B, in) batch."""
    x = np.asarray(x, dtype=net.dtype)
    single = x.ndim == 1
    out = net.apply(x[None, :] if single else x).value
    return out[0] if single else out


@dataclass
class LstmCellParams:
    """Stacked LSTM weights, gate blocks ordered (input, forget, output, candidate)."""

    w_input: np.ndarray      # (4H, I)
    w_recurrent: np.ndarray  # (4H, H)
    biases: np.ndarray       # (4H,)

    GATES = ("input", "forget", "output", "candidate")

    def __post_init__(self):
        self.w_input = np.asarray(self.w_input, dtype=np.float64)
        self.w_recurrent = np.asarray(self.w_recurrent, dtype=np.float64)
        self.biases = np.asarray(self.biases, dtype=np.float64)
        four_h = self.w_recurrent.shape[0]
        if (four_h % 4 or self.w_recurrent.shape != (four_h, four_h // 4)
                or self.w_input.shape[0] != four_h or self.biases.shape != (four_h,)):
            raise DimensionError("inconsistent LSTM parameter shapes", where="lstm")

    @classmethod
    def zeros(cls, input_dim, hidden_dim):
        return cls(np.zeros((4 * hidden_dim, input_dim)),
                   np.zeros((4 * hidden_dim, hidden_dim)), np.zeros(4 * hidden_dim))

    @classmethod
    def init(cls, input_dim, hidden_dim, rng):
        bound = 1.0 / np.sqrt(hidden_dim)
        return cls(rng.uniform(-bound, bound, (4 * hidden_dim, input_dim)),
                   rng.uniform(-bound, bound, (4 * hidden_dim, hidden_dim)),
                   rng.uniform(-bound, bound, 4 * hidden_dim))

    @property
    def hidden_dim(self):
        return self.w_recurrent.shape[1]

    @property
    def input_dim(self):
        return self.w_input.shape[1]

    def gate(self, name):
        """``(w_input, w_recurrent, biases)`` views for one gate."""
        k = self.GATES.index(name)
        rows = slice(k * self.hidden_dim, (k + 1) * self.hidden_dim)
        return self.w_input[rows], self.w_recurrent[rows], self.biases[rows]

    def parameters(self):
        return [self.w_input, self.w_recurrent, self.biases]


def lstm_step(params, x, hidden, cell):
    """Advance the cell by one step; returns ``(hidden', cell')``."""
    x, hidden, cell = (np.asarray(v, dtype=np.float64) for v in (x, hidden, cell))
    if x.shape[-1] != params.input_dim:
        raise DimensionError(f"input has {x.shape[-1]} entries, cell expects {params.input_dim}",
                             where="lstm")
    if hidden.shape[-1] != params.hidden_dim or cell.shape != hidden.shape:
        raise DimensionError(f"state shapes {hidden.shape}/{cell.shape} do not match "
                             f"hidden size {params.hidden_dim}", where="lstm")
    single = x.ndim == 1
    if single:
        x, hidden, cell = x[None], hidden[None], cell[None]
    out = ad.lstm_step(x, hidden, cell, *params.parameters()).value
    h, c = out[:, :params.hidden_dim], out[:, params.hidden_dim:]
    return (h[0], c[0]) if single else (h, c)


def gaussian_log_prob_t(mean, log_std, value):
    """Tape version of :func:`gaussian_log_prob`; sums over the last axis."""
    log_std = ad.clip(log_std, LOG_STD_MIN, LOG_STD_MAX)
    z = ad.mul(ad.sub(value, mean), ad.exp(ad.mul(log_std, -1.0)))
    per_dim = ad.sub(ad.mul(ad.square(z), -0.5), ad.add(log_std, _HALF_LOG_2PI))
    return ad.sum(per_dim, axis=-1)


def gaussian_log_prob(mean, log_std, value):
    mean, log_std, value = (np.asarray(v, dtype=np.float64) for v in (mean, log_std, value))
    if not mean.shape == log_std.shape == value.shape:
        raise DimensionError(f"shapes {mean.shape}, {log_std.shape}, {value.shape} differ")
    out = gaussian_log_prob_t(mean, log_std, value).value
    return float(out) if out.ndim == 0 else out


def tanh_squash_correction_t(pre_squash):
    t = ad.tanh(pre_squash)
    return ad.sum(ad.log(ad.sub(1.0 + SQUASH_EPS, ad.square(t))), axis=-1)


def tanh_squash_correction(pre_squash):
    """Sum of log(1 - tanh(u)^2 + 1e-6); subtract it from the pre-squash log-density."""
    out = tanh_squash_correction_t(np.asarray(pre_squash, dtype=np.float64)).value
    return float(out) if out.ndim == 0 else out
