"""Reverse-mode automatic differentiation over dense float64 arrays.

A ``Tensor`` wraps a numpy float64 array plus the bookkeeping needed for
backpropagation: the parent tensors it was computed from and a closure that
routes the output gradient back to them. ``Tensor.backward()`` walks the
graph once in reverse topological order, so every node is visited exactly
once no matter how often it is reused.

Anything that is not a ``Tensor`` (floats, ints, ndarrays) is treated as a
constant: it participates in the forward value but receives no gradient.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np


class ShapeError(ValueError):
    """Operand shapes are incompatible for the named operation."""


class ContractError(ValueError):
    """A documented precondition was violated by the caller."""


class NumericalError(FloatingPointError):
    """A non-finite value appeared where the contract forbids it."""


def as_array(x) -> np.ndarray:
    """Coerce to a float64 ndarray without copying when already one."""
    if isinstance(x, np.ndarray) and x.dtype == np.float64:
        return x
    return np.asarray(x, dtype=np.float64)


class Tensor:
    __slots__ = ("value", "grad", "_parents", "_backward")

    def __init__(self, value, _parents=(), _backward=None):
        self.value = as_array(value)
        self.grad = None
        self._parents = _parents
        self._backward = _backward

    # -- inspection ---------------------------------------------------------

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    @property
    def size(self):
        return self.value.size

    def item(self) -> float:
        return float(self.value.reshape(()))

    def __repr__(self):
        return f"Tensor(shape={self.value.shape})"

    def detach(self) -> np.ndarray:
        return self.value

    # -- autodiff -----------------------------------------------------------

    def backward(self):
        """Populate ``.grad`` on every tensor reachable from this scalar."""
        if self.value.size != 1:
            raise ContractError(
                f"backward requires a scalar loss, got shape {self.value.shape}"
            )
        order = _toposort(self)
        self.grad = np.ones_like(self.value)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- operators ----------------------------------------------------------

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

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __pow__(self, p):
        return pow_const(self, p)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return getitem(self, key)


def _toposort(root: Tensor) -> list:
    order, seen, stack = [], set(), [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def accumulate(t: Tensor, g: np.ndarray):
    if t.grad is None:
        t.grad = np.zeros_like(t.value)
    t.grad += g


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum a gradient down to ``shape`` after numpy broadcasting."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _lift(x):
    """Split into (value, tensor-or-None)."""
    if isinstance(x, Tensor):
        return x.value, x
    return as_array(x), None


# -- elementwise arithmetic (broadcasting) -----------------------------------


def add(a, b) -> Tensor:
    av, at = _lift(a)
    bv, bt = _lift(b)
    out_parents = tuple(t for t in (at, bt) if t is not None)

    def backward(g, at=at, bt=bt, ash=av.shape, bsh=bv.shape):
        if at is not None:
            accumulate(at, _unbroadcast(g, ash))
        if bt is not None:
            accumulate(bt, _unbroadcast(g, bsh))

    return Tensor(av + bv, out_parents, backward)


def sub(a, b) -> Tensor:
    av, at = _lift(a)
    bv, bt = _lift(b)
    out_parents = tuple(t for t in (at, bt) if t is not None)

    def backward(g, at=at, bt=bt, ash=av.shape, bsh=bv.shape):
        if at is not None:
            accumulate(at, _unbroadcast(g, ash))
        if bt is not None:
            accumulate(bt, _unbroadcast(-g, bsh))

    return Tensor(av - bv, out_parents, backward)


def mul(a, b) -> Tensor:
    av, at = _lift(a)
    bv, bt = _lift(b)
    out_parents = tuple(t for t in (at, bt) if t is not None)

    def backward(g, at=at, bt=bt, av=av, bv=bv):
        if at is not None:
            accumulate(at, _unbroadcast(g * bv, av.shape))
        if bt is not None:
            accumulate(bt, _unbroadcast(g * av, bv.shape))

    return Tensor(av * bv, out_parents, backward)


def div(a, b) -> Tensor:
    av, at = _lift(a)
    bv, bt = _lift(b)
    out_parents = tuple(t for t in (at, bt) if t is not None)

    def backward(g, at=at, bt=bt, av=av, bv=bv):
        if at is not None:
            accumulate(at, _unbroadcast(g / bv, av.shape))
        if bt is not None:
            accumulate(bt, _unbroadcast(-g * av / (bv * bv), bv.shape))

    return Tensor(av / bv, out_parents, backward)


def pow_const(a: Tensor, p: float) -> Tensor:
    av, at = _lift(a)
    out = av**p

    def backward(g, at=at, av=av, p=p):
        accumulate(at, g * p * av ** (p - 1))

    return Tensor(out, (at,), backward)


def exp(a: Tensor) -> Tensor:
    av, at = _lift(a)
    out = np.exp(av)

    def backward(g, at=at, out=out):
        accumulate(at, g * out)

    return Tensor(out, (at,), backward)


def log(a: Tensor) -> Tensor:
    av, at = _lift(a)

    def backward(g, at=at, av=av):
        accumulate(at, g / av)

    return Tensor(np.log(av), (at,), backward)


def sqrt(a: Tensor) -> Tensor:
    av, at = _lift(a)
    out = np.sqrt(av)

    def backward(g, at=at, out=out):
        accumulate(at, g * 0.5 / out)

    return Tensor(out, (at,), backward)


# -- activations --------------------------------------------------------------


def relu(a: Tensor) -> Tensor:
    av, at = _lift(a)

    def backward(g, at=at, av=av):
        accumulate(at, g * (av > 0))

    return Tensor(np.maximum(av, 0.0), (at,), backward)


def leaky_relu(a: Tensor, slope: float = 0.1) -> Tensor:
    av, at = _lift(a)

    def backward(g, at=at, av=av, slope=slope):
        accumulate(at, g * np.where(av > 0, 1.0, slope))

    return Tensor(np.where(av > 0, av, slope * av), (at,), backward)


def tanh(a: Tensor) -> Tensor:
    av, at = _lift(a)
    out = np.tanh(av)

    def backward(g, at=at, out=out):
        accumulate(at, g * (1.0 - out * out))

    return Tensor(out, (at,), backward)


def sigmoid(a: Tensor) -> Tensor:
    av, at = _lift(a)
    out = 1.0 / (1.0 + np.exp(-av))

    def backward(g, at=at, out=out):
        accumulate(at, g * out * (1.0 - out))

    return Tensor(out, (at,), backward)


_GELU_C = 0.7978845608028654  # sqrt(2/pi)


def gelu(a: Tensor) -> Tensor:
    """tanh-approximation GELU; smooth, so finite differences apply."""
    av, at = _lift(a)
    inner = _GELU_C * (av + 0.044715 * av**3)
    t = np.tanh(inner)
    out = 0.5 * av * (1.0 + t)

    def backward(g, at=at, av=av, t=t):
        d_inner = _GELU_C * (1.0 + 3 * 0.044715 * av**2)
        d = 0.5 * (1.0 + t) + 0.5 * av * (1.0 - t * t) * d_inner
        accumulate(at, g * d)

    return Tensor(out, (at,), backward)


# -- matmul, reductions, shape ops --------------------------------------------


def matmul(a, b) -> Tensor:
    av, at = _lift(a)
    bv, bt = _lift(b)
    a2 = av[None, :] if av.ndim == 1 else av
    b2 = bv[:, None] if bv.ndim == 1 else bv
    if a2.shape[-1] != b2.shape[-2]:
        raise ShapeError(f"matmul: inner dims differ, {av.shape} @ {bv.shape}")
    out = np.matmul(a2, b2)
    if av.ndim == 1:
        out = out[..., 0, :]
    if bv.ndim == 1:
        out = out[..., 0]
    out_parents = tuple(t for t in (at, bt) if t is not None)

    def backward(g, at=at, bt=bt, av=av, bv=bv, a2=a2, b2=b2):
        g2 = g
        if av.ndim == 1:
            g2 = np.expand_dims(g2, -2)
        if bv.ndim == 1:
            g2 = np.expand_dims(g2, -1)
        if at is not None:
            ga = np.matmul(g2, np.swapaxes(b2, -1, -2))
            accumulate(at, _unbroadcast(ga, a2.shape).reshape(av.shape))
        if bt is not None:
            gb = np.matmul(np.swapaxes(a2, -1, -2), g2)
            accumulate(bt, _unbroadcast(gb, b2.shape).reshape(bv.shape))

    return Tensor(out, out_parents, backward)


def _norm_axes(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


def sum_(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    av, at = _lift(a)
    axes = _norm_axes(axis, av.ndim)
    out = av.sum(axis=axes, keepdims=keepdims)

    def backward(g, at=at, av=av, axes=axes, keepdims=keepdims):
        if not keepdims:
            g = np.expand_dims(g, axes)
        accumulate(at, np.broadcast_to(g, av.shape).copy())

    return Tensor(out, (at,), backward)


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    av, at = _lift(a)
    axes = _norm_axes(axis, av.ndim)
    count = int(np.prod([av.shape[i] for i in axes]))
    out = av.mean(axis=axes, keepdims=keepdims)

    def backward(g, at=at, av=av, axes=axes, keepdims=keepdims, count=count):
        if not keepdims:
            g = np.expand_dims(g, axes)
        accumulate(at, np.broadcast_to(g / count, av.shape).copy())

    return Tensor(out, (at,), backward)


def reshape(a: Tensor, shape) -> Tensor:
    av, at = _lift(a)

    def backward(g, at=at, orig=av.shape):
        accumulate(at, g.reshape(orig))

    return Tensor(av.reshape(shape), (at,), backward)


def transpose(a: Tensor, axes) -> Tensor:
    av, at = _lift(a)
    inv = np.argsort(axes)

    def backward(g, at=at, inv=inv):
        accumulate(at, g.transpose(inv))

    return Tensor(av.transpose(axes), (at,), backward)


def concat(parts: Sequence, axis: int = 0) -> Tensor:
    vals, tens = [], []
    for p in parts:
        v, t = _lift(p)
        vals.append(v)
        tens.append(t)
    axis = axis % vals[0].ndim
    ref = [v.shape[:axis] + v.shape[axis + 1 :] for v in vals]
    if len(set(ref)) > 1:
        raise ShapeError(f"concat: incompatible shapes {[v.shape for v in vals]}")
    sizes = [v.shape[axis] for v in vals]
    out = np.concatenate(vals, axis=axis)

    def backward(g, tens=tens, sizes=sizes, axis=axis):
        start = 0
        for t, s in zip(tens, sizes):
            if t is not None:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(start, start + s)
                accumulate(t, g[tuple(sl)])
            start += s

    return Tensor(out, tuple(t for t in tens if t is not None), backward)


def getitem(a: Tensor, key) -> Tensor:
    """Basic (slice/int) indexing. Gradient scatters back into place."""
    av, at = _lift(a)
    out = av[key]

    def backward(g, at=at, av=av, key=key):
        buf = np.zeros_like(av)
        buf[key] = g
        accumulate(at, buf)

    return Tensor(out.copy(), (at,), backward)


def pad1d(a: Tensor, left: int, right: int) -> Tensor:
    """Zero-pad the length axis of a (B, L, C) tensor."""
    av, at = _lift(a)
    width = [(0, 0)] * av.ndim
    width[-2] = (left, right)
    out = np.pad(av, width)

    def backward(g, at=at, left=left, L=av.shape[-2]):
        accumulate(at, g[..., left : left + L, :])

    return Tensor(out, (at,), backward)
