"""Small neural-network layer library on top of the autodiff engine.

Modules register parameters and children explicitly so that the parameter
dictionary is deterministic: iteration order is registration order, and the
flat names double as checkpoint keys.
"""

from __future__ import annotations

import numpy as np

from . import ndgrad as nd
from .ndgrad import Tensor


class Module:
    def __init__(self):
        self._params: dict[str, Tensor] = {}
        self._buffers: dict[str, np.ndarray] = {}
        self._children: dict[str, "Module"] = {}

    def param(self, name: str, value: np.ndarray) -> Tensor:
        t = Tensor(np.array(value, dtype=np.float64))
        self._params[name] = t
        return t

    def buffer(self, name: str, value: np.ndarray) -> np.ndarray:
        """Persistent non-trainable state (e.g. dataset statistics)."""
        self._buffers[name] = np.array(value, dtype=np.float64)
        return self._buffers[name]

    def get_buffer(self, name: str) -> np.ndarray:
        return self._buffers[name]

    def child(self, name: str, module: "Module"):
        self._children[name] = module
        return module

    def parameters(self, prefix: str = "") -> dict[str, Tensor]:
        out = {}
        for name, t in self._params.items():
            out[prefix + name] = t
        for name, child in self._children.items():
            out.update(child.parameters(prefix + name + "."))
        return out

    def buffers(self, prefix: str = "") -> dict[str, np.ndarray]:
        out = {}
        for name, b in self._buffers.items():
            out[prefix + name] = b
        for name, child in self._children.items():
            out.update(child.buffers(prefix + name + "."))
        return out

    def state_dict(self) -> dict[str, np.ndarray]:
        out = {k: v.value.copy() for k, v in self.parameters().items()}
        for k, b in self.buffers().items():
            out["buffer:" + k] = b.copy()
        return out

    def load_state_dict(self, state: dict[str, np.ndarray]):
        params = self.parameters()
        bufs = self.buffers()
        expected = set(params) | {"buffer:" + k for k in bufs}
        missing = expected - set(state)
        extra = set(state) - expected
        if missing or extra:
            raise nd.ContractError(
                f"state mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}"
            )
        for k, t in params.items():
            arr = np.asarray(state[k], dtype=np.float64)
            if arr.shape != t.value.shape:
                raise nd.ShapeError(f"parameter {k}: shape {arr.shape} != {t.value.shape}")
            t.value = arr.copy()
        for k in bufs:
            arr = np.asarray(state["buffer:" + k], dtype=np.float64)
            owner = self
            *path, leaf = k.split(".")
            for part in path:
                owner = owner._children[part]
            owner._buffers[leaf] = arr.copy()

    def zero_grad(self):
        for t in self.parameters().values():
            t.grad = None


class Linear(Module):
    def __init__(self, rng: np.random.Generator, n_in: int, n_out: int,
                 bias: bool = True, scale: float | None = None, zero_init: bool = False):
        super().__init__()
        if zero_init:
            w = np.zeros((n_in, n_out))
        else:
            s = scale if scale is not None else 1.0 / np.sqrt(n_in)
            w = rng.normal(0.0, s, size=(n_in, n_out))
        self.w = self.param("w", w)
        self.b = self.param("b", np.zeros(n_out)) if bias else None

    def __call__(self, x) -> Tensor:
        return nd.affine(x, self.w, self.b)


class Conv1d(Module):
    def __init__(self, rng, n_in: int, n_out: int, kernel: int,
                 stride: int = 1, padding: int = 0, bias: bool = True):
        super().__init__()
        s = 1.0 / np.sqrt(kernel * n_in)
        self.w = self.param("w", rng.normal(0.0, s, size=(kernel, n_in, n_out)))
        self.b = self.param("b", np.zeros(n_out)) if bias else None
        self.stride = stride
        self.padding = padding

    def __call__(self, x) -> Tensor:
        return nd.conv1d(x, self.w, self.b, stride=self.stride, padding=self.padding)


class ConvTranspose1d(Module):
    def __init__(self, rng, n_in: int, n_out: int, kernel: int, stride: int = 1,
                 bias: bool = True):
        super().__init__()
        s = 1.0 / np.sqrt(kernel * n_in)
        self.w = self.param("w", rng.normal(0.0, s, size=(kernel, n_in, n_out)))
        self.b = self.param("b", np.zeros(n_out)) if bias else None
        self.stride = stride

    def __call__(self, x) -> Tensor:
        return nd.conv1d_transpose(x, self.w, self.b, stride=self.stride)


class Embedding(Module):
    def __init__(self, rng, n_rows: int, width: int, scale: float | None = None):
        super().__init__()
        s = scale if scale is not None else 1.0 / np.sqrt(width)
        self.w = self.param("w", rng.normal(0.0, s, size=(n_rows, width)))

    def __call__(self, idx) -> Tensor:
        return nd.embedding(self.w, idx)


class LayerNorm(Module):
    def __init__(self, width: int):
        super().__init__()
        self.gamma = self.param("gamma", np.ones(width))
        self.beta = self.param("beta", np.zeros(width))

    def __call__(self, x) -> Tensor:
        return nd.layer_norm(x, self.gamma, self.beta)


class CausalResBlock(Module):
    """Kernel-3 residual block that only looks backward in time."""

    def __init__(self, rng, width: int):
        super().__init__()
        self.conv = self.child("conv", Conv1d(rng, width, width, kernel=3))
        self.proj = self.child("proj", Conv1d(rng, width, width, kernel=1))

    def __call__(self, x) -> Tensor:
        h = nd.pad1d(x, 2, 0)  # left pad keeps output at slot t blind to t+1..
        h = nd.leaky_relu(self.conv(h))
        return nd.add(x, self.proj(h))

    left_reach = 2


class ResBlock(Module):
    """Symmetric kernel-3 residual block (same length in, same length out)."""

    def __init__(self, rng, width: int):
        super().__init__()
        self.conv = self.child("conv", Conv1d(rng, width, width, kernel=3, padding=1))
        self.proj = self.child("proj", Conv1d(rng, width, width, kernel=1))

    def __call__(self, x) -> Tensor:
        return nd.add(x, self.proj(nd.leaky_relu(self.conv(x))))


class MultiHeadAttention(Module):
    """Self-attention over (B, L, D). Mask is supplied by the caller."""

    def __init__(self, rng, width: int, heads: int):
        super().__init__()
        if width % heads:
            raise nd.ShapeError(f"attention: width {width} not divisible by heads {heads}")
        self.heads = heads
        self.width = width
        self.wq = self.child("wq", Linear(rng, width, width, bias=False))
        self.wk = self.child("wk", Linear(rng, width, width, bias=False))
        self.wv = self.child("wv", Linear(rng, width, width, bias=False))
        self.wo = self.child("wo", Linear(rng, width, width, bias=False))

    def _split(self, t: Tensor, B: int, L: int) -> Tensor:
        t = nd.reshape(t, (B, L, self.heads, self.width // self.heads))
        return nd.transpose(t, (0, 2, 1, 3))

    def __call__(self, x: Tensor, mask: np.ndarray | None = None) -> Tensor:
        B, L, _ = x.shape
        q = self._split(self.wq(x), B, L)
        k = self._split(self.wk(x), B, L)
        v = self._split(self.wv(x), B, L)
        o = nd.scaled_dot_attention(q, k, v, mask=mask)
        o = nd.reshape(nd.transpose(o, (0, 2, 1, 3)), (B, L, self.width))
        return self.wo(o)


class TransformerBlock(Module):
    """Pre-norm block: x + attn(ln(x)), then x + mlp(ln(x))."""

    def __init__(self, rng, width: int, heads: int, ff_mult: int = 4):
        super().__init__()
        self.ln1 = self.child("ln1", LayerNorm(width))
        self.attn = self.child("attn", MultiHeadAttention(rng, width, heads))
        self.ln2 = self.child("ln2", LayerNorm(width))
        self.fc1 = self.child("fc1", Linear(rng, width, ff_mult * width))
        self.fc2 = self.child("fc2", Linear(rng, ff_mult * width, width))

    def __call__(self, x: Tensor, mask: np.ndarray | None = None) -> Tensor:
        x = nd.add(x, self.attn(self.ln1(x), mask=mask))
        return nd.add(x, self.fc2(nd.gelu(self.fc1(self.ln2(x)))))


class Adam(Module):
    """Adam with optional decoupled weight decay. Deterministic given order."""

    def __init__(self, params: dict[str, Tensor], lr: float,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8,
                 weight_decay: float = 0.0):
        super().__init__()
        self.items = list(params.items())
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = [np.zeros_like(p.value) for _, p in self.items]
        self.v = [np.zeros_like(p.value) for _, p in self.items]

    def zero_grad(self):
        for _, p in self.items:
            p.grad = None

    def step(self):
        self.t += 1
        b1t = 1.0 - self.b1**self.t
        b2t = 1.0 - self.b2**self.t
        for i, (_, p) in enumerate(self.items):
            g = p.grad
            if g is None:
                continue
            self.m[i] = self.b1 * self.m[i] + (1 - self.b1) * g
            self.v[i] = self.b2 * self.v[i] + (1 - self.b2) * g * g
            update = (self.m[i] / b1t) / (np.sqrt(self.v[i] / b2t) + self.eps)
            if self.weight_decay:
                update = update + self.weight_decay * p.value
            p.value = p.value - self.lr * update
