"""A deliberately small reverse-mode tape.

Only the primitives the agent's losses are built from are supported:
dense, LSTM step, relu, tanh, sigmoid, log, exp, square, mean/sum,
minimum-of-two, plus the elementwise arithmetic, slicing, concatenation and
reshaping needed to wire them together. Nodes whose inputs are all
constants are not recorded, so forward passes over frozen networks cost no
more than plain numpy.
"""
import math

import numpy as np

from . import kernels
from .errors import NonFiniteError


class Tensor:
    __slots__ = ("value", "requires_grad", "grad", "op", "_parents", "_backward")

    def __init__(self, value, requires_grad=False, op="leaf"):
        value = np.asarray(value)
        if value.dtype.kind != "f":
            value = value.astype(np.float64)
        self.value = value
        self.requires_grad = requires_grad
        self.grad = None
        self.op = op
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.value.shape

    def item(self):
        return float(self.value)

    def __repr__(self):
        return f"Tensor(op={self.op!r}, shape={self.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __getitem__(self, index):
        return getitem(self, index)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def parameter(x):
    """Leaf tensor that accumulates a gradient."""
    return Tensor(np.array(x), requires_grad=True)


def detach(x):
    return Tensor(as_tensor(x).value)


def _record(value, op, parents, backward):
    # a finite total implies finite entries; an overflowing total gets the full check
    if not math.isfinite(value.sum()) and not np.all(np.isfinite(value)):
        raise NonFiniteError(op)
    out = Tensor(value, op=op)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward
    return out


def _unbroadcast(grad, shape):
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# elementwise arithmetic

def _operand(x):
    """Tensor plus the raw value to compute with.

    Scalar constants stay Python floats so they do not promote float32
    tensors to float64.
    """
    if isinstance(x, Tensor):
        return x, x.value
    if np.ndim(x) == 0:
        x = float(x)
        return Tensor(x), x
    t = Tensor(x)
    return t, t.value


def add(a, b):
    (a, av), (b, bv) = _operand(a), _operand(b)
    return _record(np.asarray(av + bv), "add", (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b):
    (a, av), (b, bv) = _operand(a), _operand(b)
    return _record(np.asarray(av - bv), "sub", (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b):
    (a, av), (b, bv) = _operand(a), _operand(b)

    def backward(g):
        ga = _unbroadcast(g * bv, a.shape) if a.requires_grad else None
        gb = _unbroadcast(g * av, b.shape) if b.requires_grad else None
        return ga, gb

    return _record(np.asarray(av * bv), "mul", (a, b), backward)


def square(a):
    a = as_tensor(a)
    return _record(a.value * a.value, "square", (a,), lambda g: (2.0 * a.value * g,))


def exp(a):
    a = as_tensor(a)
    with np.errstate(over="ignore"):
        out = np.exp(a.value)
    return _record(out, "exp", (a,), lambda g: (g * out,))


def log(a):
    a = as_tensor(a)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(a.value)
    return _record(out, "log", (a,), lambda g: (g / a.value,))


def tanh(a):
    a = as_tensor(a)
    out = np.tanh(a.value)
    return _record(out, "tanh", (a,), lambda g: (g * (1.0 - out * out),))


def sigmoid(a):
    a = as_tensor(a)
    out = kernels.sigmoid(a.value)
    return _record(out, "sigmoid", (a,), lambda g: (g * out * (1.0 - out),))


def relu(a):
    a = as_tensor(a)
    return _record(kernels.relu(a.value), "relu", (a,),
                   lambda g: (kernels.relu_backward(a.value, g),))


def clip(a, lo, hi):
    """Clamp; the derivative is zero wherever the bound is active."""
    a = as_tensor(a)
    inside = (a.value >= lo) & (a.value <= hi)
    return _record(np.clip(a.value, lo, hi).astype(a.value.dtype, copy=False), "clip", (a,), lambda g: (g * inside,))


def minimum(a, b):
    """Elementwise min of two equally shaped tensors; ties route to ``a``."""
    a, b = as_tensor(a), as_tensor(b)
    pick_a = a.value <= b.value
    return _record(np.where(pick_a, a.value, b.value), "minimum", (a, b),
                   lambda g: (g * pick_a, g * ~pick_a))


# reductions and reshaping

def sum(a, axis=None):  # noqa: A001 - mirrors numpy
    a = as_tensor(a)

    def backward(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _record(np.sum(a.value, axis=axis), "sum", (a,), backward)


def mean(a, axis=None):
    a = as_tensor(a)
    count = a.value.size if axis is None else a.value.shape[axis]
    return mul(sum(a, axis=axis), 1.0 / count)


def reshape(a, shape):
    a = as_tensor(a)
    return _record(a.value.reshape(shape), "reshape", (a,), lambda g: (g.reshape(a.shape),))


def getitem(a, index):
    a = as_tensor(a)

    def backward(g):
        full = np.zeros_like(a.value)
        full[index] = g
        return (full,)

    return _record(a.value[index], "getitem", (a,), backward)


def concat(tensors, axis=-1):
    tensors = tuple(as_tensor(t) for t in tensors)
    sizes = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    return _record(np.concatenate([t.value for t in tensors], axis=axis), "concat", tensors,
                   lambda g: tuple(np.split(g, sizes, axis=axis)))


# layers

def dense(x, weights, biases):
    """Affine map ``x @ weights.T + biases`` for a batch ``x`` of shape (B, in)."""
    x, w, b = as_tensor(x), as_tensor(weights), as_tensor(biases)

    def backward(g):
        gx = g @ w.value if x.requires_grad else None
        gw = g.T @ x.value if w.requires_grad else None
        gb = g.sum(axis=0) if b.requires_grad else None
        return gx, gw, gb

    return _record(x.value @ w.value.T + b.value, "dense", (x, w, b), backward)


def lstm_step(x, hidden, cell, w_input, w_recurrent, biases):
    """One LSTM cell step on a batch; returns ``concat([hidden', cell'], -1)``.

    Gates are stacked (input, forget, output, candidate) along the first
    axis of the weight matrices.
    """
    x, hidden, cell = as_tensor(x), as_tensor(hidden), as_tensor(cell)
    wx, wh, b = as_tensor(w_input), as_tensor(w_recurrent), as_tensor(biases)
    size = cell.shape[-1]
    z = x.value @ wx.value.T + hidden.value @ wh.value.T + b.value
    new_hidden, new_cell, gates = kernels.lstm_pointwise(z, cell.value)

    def backward(g):
        gh, gc = g[:, :size], g[:, size:]
        i, f, o, cand = (gates[:, k * size:(k + 1) * size] for k in range(4))
        tanh_c = np.tanh(new_cell)
        d_cell = gc + gh * o * (1.0 - tanh_c * tanh_c)
        dz = np.concatenate([
            d_cell * cand * i * (1.0 - i),
            d_cell * cell.value * f * (1.0 - f),
            gh * tanh_c * o * (1.0 - o),
            d_cell * i * (1.0 - cand * cand),
        ], axis=1)
        return (
            dz @ wx.value if x.requires_grad else None,
            dz @ wh.value if hidden.requires_grad else None,
            d_cell * f if cell.requires_grad else None,
            dz.T @ x.value if wx.requires_grad else None,
            dz.T @ hidden.value if wh.requires_grad else None,
            dz.sum(axis=0) if b.requires_grad else None,
        )

    return _record(np.concatenate([new_hidden, new_cell], axis=1), "lstm_step",
                   (x, hidden, cell, wx, wh, b), backward)


# driver

def _topological(root):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in seen:
                stack.append((parent, False))
    return order


def backward(root):
    """Accumulate d(root)/d(leaf) into ``leaf.grad`` for every trainable leaf."""
    if root.value.size != 1:
        raise ValueError("backward() needs a scalar root")
    if not root.requires_grad:
        return
    pending = {id(root): np.ones_like(root.value)}
    for node in reversed(_topological(root)):
        g = pending.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            node.grad = g.copy() if node.grad is None else node.grad + g
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            pending[key] = pg if key not in pending else pending[key] + pg


def grad_scalar(loss_fn, params):
    """Gradient of the scalar ``loss_fn(leaves)`` with respect to each array in ``params``.

    ``loss_fn`` receives one trainable leaf per array, in order, and must
    return a scalar Tensor. Parameters the loss never touches get zeros.
    Returns ``(loss_value, grads)``.
    """
    leaves = [parameter(p) for p in params]
    loss = as_tensor(loss_fn(leaves))
    backward(loss)
    grads = [leaf.grad if leaf.grad is not None else np.zeros_like(leaf.value) for leaf in leaves]
    return float(loss.value), grads
