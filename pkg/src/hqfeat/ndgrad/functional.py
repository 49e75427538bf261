"""Network-level primitives built on the autodiff engine.

Convolutions take explicit stride and padding; no length is ever implied.
Output lengths follow

    conv1d:            L_out = (L + 2*padding - kernel) // stride + 1
    conv1d_transpose:  L_out = (L - 1) * stride + kernel

Sequence tensors are (batch, length, channels) throughout.
"""

from __future__ import annotations

import numpy as np

from .engine import (
    ContractError,
    ShapeError,
    Tensor,
    _lift,
    accumulate,
    add,
    as_array,
    matmul,
    mean,
    mul,
    sqrt,
    sub,
    sum_,
)

_MASK_NEG = -1e30  # additive mask value; exp() underflows to exactly 0.0


def affine(x, w, b=None) -> Tensor:
    """x @ w + b with a shape check that names the operation."""
    xv = x.value if isinstance(x, Tensor) else as_array(x)
    wv = w.value if isinstance(w, Tensor) else as_array(w)
    if xv.shape[-1] != wv.shape[0]:
        raise ShapeError(f"affine: input {xv.shape} incompatible with weight {wv.shape}")
    out = matmul(x, w)
    if b is not None:
        out = add(out, b)
    return out


def softmax(a, axis: int = -1) -> Tensor:
    av, at = _lift(a)
    shifted = av - av.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g, at=at, out=out, axis=axis):
        dot = (g * out).sum(axis=axis, keepdims=True)
        accumulate(at, out * (g - dot))

    return Tensor(out, (at,), backward)


def log_softmax(a, axis: int = -1) -> Tensor:
    av, at = _lift(a)
    m = av.max(axis=axis, keepdims=True)
    shifted = av - m
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = shifted - lse

    def backward(g, at=at, out=out, axis=axis):
        accumulate(at, g - np.exp(out) * g.sum(axis=axis, keepdims=True))

    return Tensor(out, (at,), backward)


def embedding(weight: Tensor, idx) -> Tensor:
    """Row lookup; gradient scatter-adds into the table."""
    idx = np.asarray(idx)
    wv, wt = _lift(weight)
    out = wv[idx]

    def backward(g, wt=wt, idx=idx, wv=wv):
        buf = np.zeros_like(wv)
        np.add.at(buf, idx.reshape(-1), g.reshape(-1, wv.shape[-1]))
        accumulate(wt, buf)

    return Tensor(out.copy(), (wt,), backward)


def take_along_last(a: Tensor, idx) -> Tensor:
    """Pick one entry per row along the last axis (e.g. token log-probs)."""
    av, at = _lift(a)
    idx = np.asarray(idx)
    out = np.take_along_axis(av, idx[..., None], axis=-1)[..., 0]

    def backward(g, at=at, av=av, idx=idx):
        buf = np.zeros_like(av)
        np.put_along_axis(buf, idx[..., None], g[..., None], axis=-1)
        accumulate(at, buf)

    return Tensor(out, (at,), backward)


def layer_norm(x, gamma=None, beta=None, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean, unit variance; optional affine."""
    mu = mean(x, axis=-1, keepdims=True)
    centered = sub(x, mu)
    var = mean(mul(centered, centered), axis=-1, keepdims=True)
    out = mul(centered, pow_rsqrt(add(var, eps)))
    if gamma is not None:
        out = mul(out, gamma)
    if beta is not None:
        out = add(out, beta)
    return out


def pow_rsqrt(a: Tensor) -> Tensor:
    av, at = _lift(a)
    out = 1.0 / np.sqrt(av)

    def backward(g, at=at, av=av, out=out):
        accumulate(at, g * (-0.5) * out / av)

    return Tensor(out, (at,), backward)


def batch_norm(x, running_mean, running_var, gamma=None, beta=None, eps: float = 1e-5):
    """Inference-form batch normalization with fixed statistics."""
    rm = as_array(running_mean)
    rv = as_array(running_var)
    out = mul(sub(x, rm), 1.0 / np.sqrt(rv + eps))
    if gamma is not None:
        out = mul(out, gamma)
    if beta is not None:
        out = add(out, beta)
    return out


def softplus(a) -> Tensor:
    """log(1 + exp(a)) computed stably; derivative is sigmoid(a)."""
    av, at = _lift(a)
    out = np.logaddexp(0.0, av)

    def backward(g, at=at, av=av):
        accumulate(at, g / (1.0 + np.exp(-av)))

    return Tensor(out, (at,), backward)


def dropout(x, p: float, rng: np.random.Generator, training: bool) -> Tensor:
    """Inverted dropout; identity when not training or p == 0."""
    if not training or p <= 0.0:
        return x if isinstance(x, Tensor) else Tensor(x)
    xv = x.value if isinstance(x, Tensor) else as_array(x)
    keep = (rng.random(xv.shape) >= p) / (1.0 - p)
    return mul(x, keep)


# -- convolutions -------------------------------------------------------------


def conv1d(x, w, b=None, stride: int = 1, padding: int = 0) -> Tensor:
    """1-D convolution. x: (B, L, Cin), w: (K, Cin, Cout), b: (Cout,)."""
    xv, xt = _lift(x)
    wv, wt = _lift(w)
    bv, bt = _lift(b) if b is not None else (None, None)
    if xv.ndim != 3 or wv.ndim != 3:
        raise ShapeError(f"conv1d: expected (B,L,Cin) and (K,Cin,Cout), got {xv.shape}, {wv.shape}")
    K, cin, cout = wv.shape
    if xv.shape[-1] != cin:
        raise ShapeError(f"conv1d: input channels {xv.shape} vs weight {wv.shape}")
    xp = np.pad(xv, ((0, 0), (padding, padding), (0, 0))) if padding else xv
    Lp = xp.shape[1]
    if K > Lp:
        raise ShapeError(f"conv1d: kernel {K} exceeds padded length {Lp} (input {xv.shape})")
    L_out = (Lp - K) // stride + 1
    out = np.zeros((xv.shape[0], L_out, cout))
    for k in range(K):
        out += xp[:, k : k + stride * L_out : stride, :] @ wv[k]
    if bv is not None:
        out += bv
    parents = tuple(t for t in (xt, wt, bt) if t is not None)

    def backward(g, xt=xt, wt=wt, bt=bt, xp=xp, wv=wv, K=K, stride=stride,
                 L_out=L_out, padding=padding, L=xv.shape[1]):
        if xt is not None:
            gxp = np.zeros_like(xp)
            for k in range(K):
                gxp[:, k : k + stride * L_out : stride, :] += g @ wv[k].T
            accumulate(xt, gxp[:, padding : padding + L, :])
        if wt is not None:
            gw = np.empty_like(wv)
            gf = g.reshape(-1, g.shape[-1])
            for k in range(K):
                patch = xp[:, k : k + stride * L_out : stride, :]
                gw[k] = patch.reshape(-1, patch.shape[-1]).T @ gf
            accumulate(wt, gw)
        if bt is not None:
            accumulate(bt, g.sum(axis=(0, 1)))

    return Tensor(out, parents, backward)


def conv1d_transpose(x, w, b=None, stride: int = 1) -> Tensor:
    """Transposed 1-D convolution. x: (B, L, Cin), w: (K, Cin, Cout)."""
    xv, xt = _lift(x)
    wv, wt = _lift(w)
    bv, bt = _lift(b) if b is not None else (None, None)
    if xv.ndim != 3 or wv.ndim != 3:
        raise ShapeError(
            f"conv1d_transpose: expected (B,L,Cin) and (K,Cin,Cout), got {xv.shape}, {wv.shape}"
        )
    K, cin, cout = wv.shape
    if xv.shape[-1] != cin:
        raise ShapeError(f"conv1d_transpose: input channels {xv.shape} vs weight {wv.shape}")
    B, L, _ = xv.shape
    L_out = (L - 1) * stride + K
    out = np.zeros((B, L_out, cout))
    for k in range(K):
        out[:, k : k + stride * (L - 1) + 1 : stride, :] += xv @ wv[k]
    if bv is not None:
        out += bv
    parents = tuple(t for t in (xt, wt, bt) if t is not None)

    def backward(g, xt=xt, wt=wt, bt=bt, xv=xv, wv=wv, K=K, stride=stride, L=L):
        if xt is not None:
            gx = np.zeros_like(xv)
            for k in range(K):
                gx += g[:, k : k + stride * (L - 1) + 1 : stride, :] @ wv[k].T
            accumulate(xt, gx)
        if wt is not None:
            gw = np.empty_like(wv)
            xf = xv.reshape(-1, xv.shape[-1])
            for k in range(K):
                gs = g[:, k : k + stride * (L - 1) + 1 : stride, :]
                gw[k] = xf.T @ gs.reshape(-1, gs.shape[-1])
            accumulate(wt, gw)
        if bt is not None:
            accumulate(bt, g.sum(axis=(0, 1)))

    return Tensor(out, parents, backward)


# -- attention ----------------------------------------------------------------

_mask_cache: dict = {}


def causal_mask(L: int, window: int | None = None) -> np.ndarray:
    """Additive mask (L, L): 0 where allowed, large negative elsewhere.

    ``window`` limits each query to the last ``window`` positions (itself
    included), giving a finite receptive field per layer.
    """
    key = (L, window)
    m = _mask_cache.get(key)
    if m is None:
        i = np.arange(L)[:, None]
        j = np.arange(L)[None, :]
        allowed = j <= i
        if window is not None:
            allowed &= j > i - window
        m = np.where(allowed, 0.0, _MASK_NEG)
        _mask_cache[key] = m
    return m


def scaled_dot_attention(q, k, v, mask: np.ndarray | None = None) -> Tensor:
    """softmax(q k^T / sqrt(d) + mask) v over the last two axes."""
    d = q.shape[-1]
    scores = matmul(q, swap_last(k)) * (1.0 / np.sqrt(d))
    if mask is not None:
        scores = add(scores, mask)
    return matmul(softmax(scores, axis=-1), v)


def swap_last(a: Tensor) -> Tensor:
    av, at = _lift(a)

    def backward(g, at=at):
        accumulate(at, np.swapaxes(g, -1, -2))

    return Tensor(np.swapaxes(av, -1, -2).copy(), (at,), backward)
