"""Reverse-mode autodiff over numpy arrays.

Small tape-based engine: every op builds a Tensor whose closure knows how
to push its output gradient into its parents.  float64 is used by the
gradient-check tests, float32 by the actual training runs; ops never
change the dtype they are given.

Inference code wraps calls in `no_grad()` so no tape is built.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

from ..errors import InputError

_grad_enabled = True


@contextmanager
def no_grad():
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def grad_enabled() -> bool:
    return _grad_enabled


class Tensor:
    __slots__ = ("value", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, value, requires_grad: bool = False):
        self.value = np.asarray(value)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.value.shape

    @property
    def dtype(self):
        return self.value.dtype

    def __repr__(self):
        return f"Tensor(shape={self.value.shape}, requires_grad={self.requires_grad})"

    def zero_grad(self):
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.value)

    def item(self) -> float:
        return float(self.value)

    def backward(self):
        """Accumulate gradients of this (scalar) tensor into the graph."""
        if self.value.size != 1:
            raise InputError("backward() requires a scalar loss")
        topo: list[Tensor] = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.value)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # operator sugar (scalars allowed on either side)
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        return add(self, mul(other, -1.0) if isinstance(other, Tensor) else -other)

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return take(self, key)


def _make(value: np.ndarray, parents: tuple, backward) -> Tensor:
    out = Tensor(value)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward
    return out


def _accum(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=t.value.dtype)
    else:
        t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum g down to `shape` (inverse of numpy broadcasting)."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _as_value(x, like: Tensor):
    if isinstance(x, Tensor):
        return x.value
    return np.asarray(x, dtype=like.value.dtype)


# -- arithmetic ---------------------------------------------------------


def add(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor):
        bv = _as_value(b, a)
        out = _make(a.value + bv, (a,), None)
        out._backward = lambda g: _accum(a, _unbroadcast(g, a.value.shape))
        return out
    out = _make(a.value + b.value, (a, b), None)

    def bw(g):
        _accum(a, _unbroadcast(g, a.value.shape))
        _accum(b, _unbroadcast(g, b.value.shape))

    out._backward = bw
    return out


def mul(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor):
        bv = _as_value(b, a)
        out = _make(a.value * bv, (a,), None)
        out._backward = lambda g: _accum(a, _unbroadcast(g * bv, a.value.shape))
        return out
    out = _make(a.value * b.value, (a, b), None)

    def bw(g):
        _accum(a, _unbroadcast(g * b.value, a.value.shape))
        _accum(b, _unbroadcast(g * a.value, b.value.shape))

    out._backward = bw
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    out = _make(a.value @ b.value, (a, b), None)

    def bw(g):
        _accum(a, g @ b.value.T)
        _accum(b, a.value.T @ g)

    out._backward = bw
    return out


def transpose(a: Tensor) -> Tensor:
    out = _make(a.value.T, (a,), None)
    out._backward = lambda g: _accum(a, g.T)
    return out


def reshape(a: Tensor, shape) -> Tensor:
    out = _make(a.value.reshape(shape), (a,), None)
    out._backward = lambda g: _accum(a, g.reshape(a.value.shape))
    return out


def take(a: Tensor, key) -> Tensor:
    out = _make(a.value[key], (a,), None)

    def bw(g):
        buf = np.zeros_like(a.value)
        np.add.at(buf, key, g)
        _accum(a, buf)

    out._backward = bw
    return out


def concat(tensors: list, axis: int = 0) -> Tensor:
    vals = [t.value for t in tensors]
    out = _make(np.concatenate(vals, axis=axis), tuple(tensors), None)
    sizes = [v.shape[axis] for v in vals]

    def bw(g):
        offset = 0
        for t, n in zip(tensors, sizes):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(offset, offset + n)
            _accum(t, g[tuple(idx)])
            offset += n

    out._backward = bw
    return out


def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = _make(a.value.sum(axis=axis, keepdims=keepdims), (a,), None)

    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accum(a, np.broadcast_to(g, a.value.shape))

    out._backward = bw
    return out


def tmean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    n = a.value.size if axis is None else a.value.shape[axis]
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / n)


# -- nonlinearities -----------------------------------------------------


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.value)
    out = _make(y, (a,), None)
    out._backward = lambda g: _accum(a, g * (1.0 - y * y))
    return out


def sigmoid(a: Tensor) -> Tensor:
    y = _sigmoid_np(a.value)
    out = _make(y, (a,), None)
    out._backward = lambda g: _accum(a, g * y * (1.0 - y))
    return out


def _sigmoid_np(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def relu(a: Tensor) -> Tensor:
    y = np.maximum(a.value, 0)
    out = _make(y, (a,), None)
    out._backward = lambda g: _accum(a, g * (a.value > 0))
    return out


def exp(a: Tensor) -> Tensor:
    y = np.exp(a.value)
    out = _make(y, (a,), None)
    out._backward = lambda g: _accum(a, g * y)
    return out


def log(a: Tensor) -> Tensor:
    out = _make(np.log(a.value), (a,), None)
    out._backward = lambda g: _accum(a, g / a.value)
    return out


# -- softmax family -----------------------------------------------------


def softmax_np(x: np.ndarray, axis: int = -1) -> np.ndarray:
    """Max-subtracted softmax; never NaN for finite inputs."""
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def log_softmax_np(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = x - x.max(axis=axis, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    y = softmax_np(a.value, axis)
    out = _make(y, (a,), None)

    def bw(g):
        dot = (g * y).sum(axis=axis, keepdims=True)
        _accum(a, (g - dot) * y)

    out._backward = bw
    return out


def log_softmax(a: Tensor, axis: int = -1) -> Tensor:
    y = log_softmax_np(a.value, axis)
    out = _make(y, (a,), None)

    def bw(g):
        _accum(a, g - np.exp(y) * g.sum(axis=axis, keepdims=True))

    out._backward = bw
    return out


def cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean of -log p(label) over rows; logits (N, K), labels (N,) ints."""
    labels = np.asarray(labels)
    if labels.ndim == 0:
        labels = labels[None]
    n, k = logits.value.shape
    if labels.min() < 0 or labels.max() >= k:
        raise InputError(f"label out of range [0, {k})")
    logp = log_softmax(logits, axis=-1)
    picked = take(logp, (np.arange(n), labels))
    return mul(tsum(picked), -1.0 / n)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then scale and shift."""
    mu = x.value.mean(axis=-1, keepdims=True)
    var = x.value.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.value - mu) * inv
    out = _make(xhat * gain.value + bias.value, (x, gain, bias), None)
    d = x.value.shape[-1]

    def bw(g):
        _accum(gain, _unbroadcast(g * xhat, gain.value.shape))
        _accum(bias, _unbroadcast(g, bias.value.shape))
        gx = g * gain.value
        term = gx - gx.mean(axis=-1, keepdims=True) \
            - xhat * (gx * xhat).mean(axis=-1, keepdims=True)
        _accum(x, term * inv)

    out._backward = bw
    return out
