"""Jitted kernels. Signatures and results match ``_numpy`` up to float rounding."""
import math

import numpy as np
from numba import njit


@njit(cache=True, inline="always", error_model="numpy")
def _sigmoid_scalar(x):
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    ex = math.exp(x)
    return ex / (1.0 + ex)


@njit(cache=True, error_model="numpy")
def _sigmoid_flat(x, out):
    for k in range(x.size):
        out[k] = _sigmoid_scalar(x[k])


def sigmoid(x):
    x = np.ascontiguousarray(x)
    out = np.empty_like(x)
    _sigmoid_flat(x.reshape(-1), out.reshape(-1))
    return out


@njit(cache=True, error_model="numpy")
def _relu_flat(x, out):
    for k in range(x.size):
        out[k] = x[k] if x[k] > 0 else 0


def relu(x):
    x = np.ascontiguousarray(x)
    out = np.empty_like(x)
    _relu_flat(x.reshape(-1), out.reshape(-1))
    return out


@njit(cache=True, error_model="numpy")
def _relu_backward_flat(x, grad, out):
    for k in range(x.size):
        out[k] = grad[k] if x[k] > 0 else 0


def relu_backward(x, grad):
    x = np.ascontiguousarray(x)
    grad = np.ascontiguousarray(np.broadcast_to(grad, x.shape))
    out = np.empty_like(x)
    _relu_backward_flat(x.reshape(-1), grad.reshape(-1), out.reshape(-1))
    return out


@njit(cache=True, error_model="numpy")
def _adam_flat(param, m, v, grad, step_size, beta1, beta2, inv_bc2, eps):
    c1 = 1 - beta1
    c2 = 1 - beta2
    for k in range(param.size):
        g = grad[k]
        mk = beta1 * m[k] + c1 * g
        vk = beta2 * v[k] + c2 * (g * g)
        m[k] = mk
        v[k] = vk
        param[k] -= step_size * mk / (np.sqrt(vk * inv_bc2) + eps)


def adam_update(param, m, v, grad, lr, beta1, beta2, eps, step):
    # scalars in the array dtype keep the loop free of conversions (and vectorizable)
    t = param.dtype.type
    grad = np.ascontiguousarray(grad, dtype=param.dtype)
    step_size = lr / (1.0 - beta1 ** step)
    inv_bc2 = 1.0 / (1.0 - beta2 ** step)
    _adam_flat(param.reshape(-1), m.reshape(-1), v.reshape(-1), grad.reshape(-1),
               t(step_size), t(beta1), t(beta2), t(inv_bc2), t(eps))


@njit(cache=True, error_model="numpy")
def _soft_update_flat(target, source, tau):
    for k in range(target.size):
        target[k] = (1 - tau) * target[k] + tau * source[k]


def soft_update(target, source, tau):
    source = np.ascontiguousarray(source, dtype=target.dtype)
    _soft_update_flat(target.reshape(-1), source.reshape(-1), target.dtype.type(tau))


@njit(cache=True, error_model="numpy")
def _mix(base, partners, alpha):
    n = partners.shape[0]
    out = base * (1.0 - alpha) ** n
    for j in range(1, n + 1):
        w = alpha * (1.0 - alpha) ** (n - j)
        for d in range(base.size):
            out[d] += w * partners[j - 1, d]
    return out


def mix_closed_form(base, partners, alpha):
    base = np.ascontiguousarray(base, dtype=np.float64)
    partners = np.ascontiguousarray(partners, dtype=np.float64)
    return _mix(base, partners, float(alpha))


@njit(cache=True, error_model="numpy")
def _lstm_pointwise(z, cell):
    rows, hidden = cell.shape
    gates = np.empty_like(z)
    new_cell = np.empty_like(cell)
    new_hidden = np.empty_like(cell)
    for r in range(rows):
        for k in range(hidden):
            i = _sigmoid_scalar(z[r, k])
            f = _sigmoid_scalar(z[r, hidden + k])
            o = _sigmoid_scalar(z[r, 2 * hidden + k])
            g = math.tanh(z[r, 3 * hidden + k])
            gates[r, k] = i
            gates[r, hidden + k] = f
            gates[r, 2 * hidden + k] = o
            gates[r, 3 * hidden + k] = g
            c = f * cell[r, k] + i * g
            new_cell[r, k] = c
            new_hidden[r, k] = o * math.tanh(c)
    return new_hidden, new_cell, gates


def lstm_pointwise(z, cell):
    return _lstm_pointwise(np.ascontiguousarray(z), np.ascontiguousarray(cell))
