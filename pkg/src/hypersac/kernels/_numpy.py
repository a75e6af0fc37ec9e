"""Pure-numpy reference kernels. Every function here has a jitted twin in ``_numba``."""
import numpy as np


def sigmoid(x):
    # exp(-|x|) never overflows; pick the matching branch of the logistic
    e = np.exp(-np.abs(x))
    inv = 1.0 / (1.0 + e)
    return np.where(x >= 0, inv, e * inv)


def relu(x):
    return np.maximum(x, 0.0)


def relu_backward(x, grad):
    return grad * (x > 0.0)


def adam_update(param, m, v, grad, lr, beta1, beta2, eps, step):
    """In-place bias-corrected Adam update of ``param``, ``m`` and ``v``."""
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * (grad * grad)
    step_size = lr / (1.0 - beta1 ** step)
    inv_bc2 = 1.0 / (1.0 - beta2 ** step)
    param -= step_size * m / (np.sqrt(v * inv_bc2) + eps)


def soft_update(target, source, tau):
    target *= 1.0 - tau
    target += tau * source


def mix_closed_form(base, partners, alpha):
    n = partners.shape[0]
    j = np.arange(1, n + 1)
    weights = alpha * (1.0 - alpha) ** (n - j)
    return (1.0 - alpha) ** n * base + weights @ partners


def lstm_pointwise(z, cell):
    """Gate nonlinearities and state update for stacked pre-activations ``z`` (B, 4H)."""
    hidden = cell.shape[1]
    gates = np.empty_like(z)
    gates[:, : 3 * hidden] = sigmoid(z[:, : 3 * hidden])
    gates[:, 3 * hidden:] = np.tanh(z[:, 3 * hidden:])
    i, f, o, g = (gates[:, k * hidden:(k + 1) * hidden] for k in range(4))
    new_cell = f * cell + i * g
    new_hidden = o * np.tanh(new_cell)
    return new_hidden, new_cell, gates
