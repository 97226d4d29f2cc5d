"""Reverse-mode automatic differentiation over small dense numpy graphs.

Tensors wrap float64 arrays and record a backward closure per operation;
backward() traverses the graph once in reverse topological order and
accumulates gradients into every tensor created with requires_grad=True.
Only the operations the agents need are implemented.
"""

from __future__ import annotations

import numpy as np

from ..errors import ValidationError

__all__ = ["Tensor", "backward", "concat", "softmax_t"]


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _as_tensor(value) -> "Tensor":
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=np.float64))


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_bw")

    def __init__(self, data, requires_grad: bool = False, _parents=(), _bw=None):
        arr = data if isinstance(data, np.ndarray) else np.asarray(data, dtype=np.float64)
        if arr.dtype != np.float64:
            arr = arr.astype(np.float64)
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad) or any(p.requires_grad for p in _parents)
        self._parents = _parents
        self._bw = _bw

    @property
    def shape(self):
        return self.data.shape

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    # arithmetic -----------------------------------------------------------

    def __add__(self, other):
        other = _as_tensor(other)
        a, b = self, other

        def bw(g):
            return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

        return Tensor(a.data + b.data, _parents=(a, b), _bw=bw)

    __radd__ = __add__

    def __neg__(self):
        a = self

        def bw(g):
            return (-g,)

        return Tensor(-a.data, _parents=(a,), _bw=bw)

    def __sub__(self, other):
        return self + (-_as_tensor(other))

    def __rsub__(self, other):
        return _as_tensor(other) + (-self)

    def __mul__(self, other):
        other = _as_tensor(other)
        a, b = self, other

        def bw(g):
            return (
                _unbroadcast(g * b.data, a.data.shape),
                _unbroadcast(g * a.data, b.data.shape),
            )

        return Tensor(a.data * b.data, _parents=(a, b), _bw=bw)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _as_tensor(other)
        a, b = self, other

        def bw(g):
            return (
                _unbroadcast(g / b.data, a.data.shape),
                _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape),
            )

        return Tensor(a.data / b.data, _parents=(a, b), _bw=bw)

    def __rtruediv__(self, other):
        return _as_tensor(other) / self

    def __pow__(self, exponent):
        if not isinstance(exponent, (int, float)):
            raise ValidationError("only scalar exponents are supported")
        a, p = self, float(exponent)

        def bw(g):
            return (g * p * a.data ** (p - 1.0),)

        return Tensor(a.data**p, _parents=(a,), _bw=bw)

    def __matmul__(self, other):
        other = _as_tensor(other)
        a, b = self, other

        def bw(g):
            return g @ b.data.T, a.data.T @ g

        return Tensor(a.data @ b.data, _parents=(a, b), _bw=bw)

    # elementwise functions --------------------------------------------------

    def tanh(self):
        a = self
        out_data = np.tanh(a.data)

        def bw(g):
            return (g * (1.0 - out_data * out_data),)

        return Tensor(out_data, _parents=(a,), _bw=bw)

    def relu(self):
        a = self
        mask = a.data > 0.0

        def bw(g):
            return (g * mask,)

        return Tensor(a.data * mask, _parents=(a,), _bw=bw)

    def exp(self):
        a = self
        out_data = np.exp(a.data)

        def bw(g):
            return (g * out_data,)

        return Tensor(out_data, _parents=(a,), _bw=bw)

    def log(self):
        a = self

        def bw(g):
            return (g / a.data,)

        return Tensor(np.log(a.data), _parents=(a,), _bw=bw)

    def clip(self, lo: float, hi: float):
        a = self
        inside = (a.data > lo) & (a.data < hi)

        def bw(g):
            return (g * inside,)

        return Tensor(np.clip(a.data, lo, hi), _parents=(a,), _bw=bw)

    def minimum(self, other):
        other = _as_tensor(other)
        a, b = self, other
        take_a = a.data <= b.data  # ties route to the first argument

        def bw(g):
            return (
                _unbroadcast(g * take_a, a.data.shape),
                _unbroadcast(g * ~take_a, b.data.shape),
            )

        return Tensor(np.minimum(a.data, b.data), _parents=(a, b), _bw=bw)

    # reductions / shaping ----------------------------------------------------

    def sum(self, axis: int | None = None, keepdims: bool = False):
        a = self
        out_data = a.data.sum(axis=axis, keepdims=keepdims)

        def bw(g):
            gg = g
            if axis is not None and not keepdims:
                gg = np.expand_dims(gg, axis)
            return (np.broadcast_to(gg, a.data.shape).copy(),)

        return Tensor(out_data, _parents=(a,), _bw=bw)

    def mean(self, axis: int | None = None):
        a = self
        count = a.data.size if axis is None else a.data.shape[axis]
        out_data = a.data.mean(axis=axis)

        def bw(g):
            gg = g / count
            if axis is not None:
                gg = np.expand_dims(gg, axis)
            return (np.broadcast_to(gg, a.data.shape).copy(),)

        return Tensor(out_data, _parents=(a,), _bw=bw)

    def reshape(self, *shape):
        a = self
        orig = a.data.shape

        def bw(g):
            return (g.reshape(orig),)

        return Tensor(a.data.reshape(*shape), _parents=(a,), _bw=bw)


def concat(tensors, axis: int = 1) -> Tensor:
    """Concatenate along an axis; backward splits the gradient."""
    ts = [_as_tensor(t) for t in tensors]
    sizes = [t.data.shape[axis] for t in ts]
    bounds = np.cumsum(sizes)[:-1]

    def bw(g):
        return tuple(np.split(g, bounds, axis=axis))

    return Tensor(np.concatenate([t.data for t in ts], axis=axis), _parents=tuple(ts), _bw=bw)


def softmax_t(t: Tensor, axis: int = -1) -> Tensor:
    """Numerically stabilized softmax; the max shift is treated as constant."""
    shifted = t - Tensor(t.data.max(axis=axis, keepdims=True))
    e = shifted.exp()
    return e / e.sum(axis=axis if axis >= 0 else t.data.ndim - 1, keepdims=True)


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into .grad over the whole graph.

    The loss must be a scalar. Gradients add up across calls until the
    owning module zeroes them.
    """
    if loss.data.size != 1:
        raise ValidationError(f"backward needs a scalar loss, got shape {loss.data.shape}")
    if not loss.requires_grad:
        return
    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in visited:
                stack.append((parent, False))
    loss.grad = np.ones_like(loss.data)
    for node in reversed(topo):
        if node._bw is None or node.grad is None:
            continue
        for parent, grad in zip(node._parents, node._bw(node.grad)):
            if not parent.requires_grad or grad is None:
                continue
            if parent.grad is None:
                parent.grad = grad
            else:
                parent.grad = parent.grad + grad
