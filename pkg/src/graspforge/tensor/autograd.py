"""Reverse-mode automatic differentiation over dense float64 arrays.

A ``Tensor`` wraps a numpy array and, when produced by an operation,
remembers its parents together with one vector-Jacobian-product callable
per parent.  ``backward`` walks the graph in reverse topological order and
accumulates gradients into every reachable node that requires them.

All arrays are float64 and operations never mutate their inputs; each op
allocates a fresh output array (or an explicit copy for view-like ops).
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Tensor",
    "add", "sub", "mul", "div", "neg",
    "log", "sqrt", "relu", "sigmoid", "clamp",
    "tsum", "tmean", "reshape", "matmul",
    "gradients",
]


class Tensor:
    """Node in the computation graph backed by a float64 ndarray."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_vjps")

    # make ndarray <op> Tensor dispatch to the reflected Tensor operators
    __array_ufunc__ = None

    def __init__(self, data, requires_grad=False, _parents=(), _vjps=()):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad) or any(
            p.requires_grad for p in _parents
        )
        self._parents = _parents
        self._vjps = _vjps

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"

    def item(self):
        if self.data.size != 1:
            raise ValueError(f"item() needs a single-element tensor, got shape {self.data.shape}")
        return float(self.data.reshape(()))

    # graph construction helpers -------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    # backward pass ---------------------------------------------------------------

    def backward(self):
        """Accumulate gradients of this scalar into every reachable node."""
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar loss node")
        if not self._parents and not self.requires_grad:
            raise RuntimeError("backward() called on a node with no recorded forward pass")
        order = _toposort(self)
        self.grad = np.ones_like(self.data)
        for node in order:
            g = node.grad
            if g is None:
                continue
            for parent, vjp in zip(node._parents, node._vjps):
                if not parent.requires_grad:
                    continue
                contrib = vjp(g)
                if parent.grad is None:
                    parent.grad = contrib.copy()
                else:
                    parent.grad = parent.grad + contrib


def _toposort(root):
    """Reverse topological order of the subgraph that requires gradients."""
    order, visited, stack = [], set(), [(root, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in visited:
                stack.append((parent, False))
    order.reverse()
    return order


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _sum_to_shape(grad, shape):
    """Reduce a broadcast gradient back to the shape of its source operand."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# elementwise operations ------------------------------------------------------------


def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    return Tensor(
        a.data + b.data,
        _parents=(a, b),
        _vjps=(
            lambda g: _sum_to_shape(g, a.data.shape),
            lambda g: _sum_to_shape(g, b.data.shape),
        ),
    )


def sub(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    return Tensor(
        a.data - b.data,
        _parents=(a, b),
        _vjps=(
            lambda g: _sum_to_shape(g, a.data.shape),
            lambda g: _sum_to_shape(-g, b.data.shape),
        ),
    )


def mul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    return Tensor(
        a.data * b.data,
        _parents=(a, b),
        _vjps=(
            lambda g: _sum_to_shape(g * b.data, a.data.shape),
            lambda g: _sum_to_shape(g * a.data, b.data.shape),
        ),
    )


def div(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    return Tensor(
        a.data / b.data,
        _parents=(a, b),
        _vjps=(
            lambda g: _sum_to_shape(g / b.data, a.data.shape),
            lambda g: _sum_to_shape(-g * a.data / (b.data * b.data), b.data.shape),
        ),
    )


def neg(a):
    a = _as_tensor(a)
    return Tensor(-a.data, _parents=(a,), _vjps=(lambda g: -g,))


def log(a):
    a = _as_tensor(a)
    return Tensor(np.log(a.data), _parents=(a,), _vjps=(lambda g: g / a.data,))


def sqrt(a):
    a = _as_tensor(a)
    out = np.sqrt(a.data)
    return Tensor(out, _parents=(a,), _vjps=(lambda g: g * (0.5 / out),))


def relu(a):
    a = _as_tensor(a)
    mask = a.data > 0.0
    return Tensor(
        np.where(mask, a.data, 0.0),
        _parents=(a,),
        _vjps=(lambda g: g * mask,),
    )


def sigmoid(a):
    a = _as_tensor(a)
    out = 1.0 / (1.0 + np.exp(-a.data))
    return Tensor(out, _parents=(a,), _vjps=(lambda g: g * out * (1.0 - out),))


def clamp(a, lo, hi):
    """Clip values to [lo, hi]; gradient is zero where the clip is active."""
    a = _as_tensor(a)
    mask = (a.data > lo) & (a.data < hi)
    return Tensor(
        np.clip(a.data, lo, hi),
        _parents=(a,),
        _vjps=(lambda g: g * mask,),
    )


# reductions and shape ops ----------------------------------------------------------


def tsum(a, axis=None, keepdims=False):
    a = _as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is None:
            return np.broadcast_to(g, a.data.shape).copy()
        if not keepdims:
            g = np.expand_dims(g, axis)
        return np.broadcast_to(g, a.data.shape).copy()

    return Tensor(out, _parents=(a,), _vjps=(vjp,))


def tmean(a, axis=None, keepdims=False):
    a = _as_tensor(a)
    if axis is None:
        count = a.data.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        count = 1
        for ax in axes:
            count *= a.data.shape[ax]
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def reshape(a, shape):
    a = _as_tensor(a)
    return Tensor(
        a.data.reshape(shape).copy(),
        _parents=(a,),
        _vjps=(lambda g: g.reshape(a.data.shape),),
    )


def gather_rows(a, idx):
    """Select rows by index; gradients scatter-add back to the source rows."""
    a = _as_tensor(a)
    idx = np.asarray(idx, dtype=np.int64)

    def vjp(g):
        out = np.zeros_like(a.data)
        np.add.at(out, idx, g)
        return out

    return Tensor(a.data[idx], _parents=(a,), _vjps=(vjp,))


def matmul(a, b):
    """2-D matrix product (batch, in) @ (in, out)."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ValueError(f"matmul expects 2-D operands, got {a.data.shape} @ {b.data.shape}")
    if a.data.shape[1] != b.data.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.data.shape} @ {b.data.shape}")
    return Tensor(
        a.data @ b.data,
        _parents=(a, b),
        _vjps=(
            lambda g: g @ b.data.T,
            lambda g: a.data.T @ g,
        ),
    )


def gradients(loss, params):
    """Run backward from a scalar loss and collect per-parameter gradients.

    ``params`` maps parameter id to its leaf Tensor.  Raises if the loss was
    produced without a recorded forward pass, or if a requested parameter
    never received a gradient (i.e. is unreachable from the loss).
    """
    loss.backward()
    grads = {}
    for name, p in params.items():
        if p.requires_grad:
            if p.grad is None:
                raise ValueError(f"parameter {name!r} is not reachable from the loss")
            grads[name] = p.grad
    return grads
