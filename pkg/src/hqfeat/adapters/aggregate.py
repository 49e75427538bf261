"""Feature pre-processing for time-invariant tasks.

Per-level feature sequences are pooled to one token per fixed-length span,
projected to a common width (input normalization + linear), concatenated
behind a learnable class token, optionally thinned by token-out, and run
through a single attention block; the class-token output feeds a small MLP
probe. The aggregator carries no positional encoding, so it is exactly
permutation invariant over the non-class tokens.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import ndgrad as nd
from ..ndgrad import ContractError, Tensor
from ..nn import LayerNorm, Linear, Module, TransformerBlock


@dataclass
class AggregatorConfig:
    width: int = 768
    heads: int = 1
    input_norm: str = "layer"  # "layer" or "batch" (fixed dataset statistics)
    dropout: float = 0.10  # MLP hidden dropout, grid {0.10, 0.25, 0.50, 0.75}
    label_smoothing: float = 0.1  # single-label tasks

    def __post_init__(self):
        if self.input_norm not in ("layer", "batch"):
            raise ContractError(f"input_norm must be layer|batch, got {self.input_norm!r}")


def pool_to_single_token(features: np.ndarray) -> np.ndarray:
    """Arithmetic mean over frames; one vector per segment."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] == 0:
        raise ContractError(f"expected non-empty (frames, width), got {features.shape}")
    return features.mean(axis=0)


def pooled_segment_tokens(features: np.ndarray, span_frames: int) -> list[np.ndarray]:
    """Split into non-overlapping spans and average-pool each one."""
    features = np.asarray(features, dtype=np.float64)
    if span_frames < 1:
        raise ContractError("span must be at least one frame")
    out = []
    for start in range(0, features.shape[0], span_frames):
        chunk = features[start : start + span_frames]
        if chunk.shape[0] > 0:
            out.append(pool_to_single_token(chunk))
    return out


class TokenProjector(Module):
    """Per-level input normalization followed by a linear map to the width."""

    def __init__(self, rng, in_width: int, out_width: int, norm: str = "layer"):
        super().__init__()
        self.norm = norm
        self.lin = self.child("lin", Linear(rng, in_width, out_width))
        if norm == "batch":
            self.buffer("mean", np.zeros(in_width))
            self.buffer("var", np.ones(in_width))

    def fit(self, rows: np.ndarray):
        """Freeze dataset statistics for the inference-form batch norm."""
        rows = np.asarray(rows, dtype=np.float64)
        self.buffer("mean", rows.mean(axis=0))
        self.buffer("var", rows.var(axis=0) + 1e-8)

    def __call__(self, x) -> Tensor:
        if self.norm == "batch":
            h = nd.batch_norm(x, self.get_buffer("mean"), self.get_buffer("var"))
        else:
            h = nd.layer_norm(x)
        return self.lin(h)


def concat_with_class_token(class_token: Tensor, token_groups: list[list]) -> Tensor:
    """[class, group0 tokens..., group1 tokens...]; widths must agree."""
    width = class_token.shape[-1]
    rows = [nd.reshape(class_token, (1, width))]
    for group in token_groups:
        for tok in group:
            if tok.shape[-1] != width:
                raise ContractError(
                    f"token width {tok.shape[-1]} != aggregator width {width}"
                )
            rows.append(nd.reshape(tok, (1, width)))
    return nd.concat(rows, axis=0)


def token_out(seq: Tensor, rng: np.random.Generator, ratio: float | None = None,
              protect_first: bool = True) -> Tensor:
    """Delete a uniformly drawn fraction of the (non-class) tokens.

    The deletion ratio is sampled from U[0, 1] unless given; floor(ratio * n)
    tokens are removed, so the class token survives even at ratio -> 1.
    """
    n_total = seq.shape[0]
    first = 1 if protect_first else 0
    n = n_total - first
    rho = float(rng.random()) if ratio is None else float(ratio)
    n_drop = int(np.floor(rho * n))
    if n_drop == 0:
        return seq
    dropped = rng.choice(n, size=n_drop, replace=False)
    keep_mask = np.ones(n, dtype=bool)
    keep_mask[dropped] = False
    keep = np.concatenate([np.arange(first), first + np.flatnonzero(keep_mask)])
    return seq[keep]


class AttentionAggregator(Module):
    """Single attention block + feed-forward; returns the class-token output."""

    def __init__(self, rng, cfg: AggregatorConfig):
        super().__init__()
        self.cfg = cfg
        self.class_token = self.param("class_token", rng.normal(0.0, 0.02, size=cfg.width))
        self.block = self.child("block", TransformerBlock(rng, cfg.width, cfg.heads))
        self.ln_out = self.child("ln_out", LayerNorm(cfg.width))

    def __call__(self, tokens: list, rng: np.random.Generator | None = None,
                 training: bool = False) -> Tensor:
        """tokens: list of projected (width,) tensors, class token excluded."""
        seq = concat_with_class_token(self.class_token, [tokens])
        if training and rng is not None:
            seq = token_out(seq, rng)
        out = self.block(nd.reshape(seq, (1,) + tuple(seq.shape)), mask=None)
        return self.ln_out(out[0, 0, :])


class AveragePoolAggregator(Module):
    """Baseline aggregation: plain mean over the projected tokens."""

    def __init__(self, rng, cfg: AggregatorConfig):
        super().__init__()
        self.cfg = cfg

    def __call__(self, tokens: list, rng=None, training: bool = False) -> Tensor:
        stacked = nd.concat([nd.reshape(t, (1, -1)) for t in tokens], axis=0)
        return nd.mean(stacked, axis=0)


class ProbeHead(Module):
    """MLP with one 512-wide hidden layer; link picked by the task."""

    LINKS = ("sigmoid", "softmax", "identity")

    def __init__(self, rng, in_width: int, out_width: int, link: str,
                 hidden: int = 512, dropout: float = 0.0):
        super().__init__()
        if link not in self.LINKS:
            raise ContractError(f"link must be one of {self.LINKS}, got {link!r}")
        self.link = link
        self.dropout = dropout
        self.fc1 = self.child("fc1", Linear(rng, in_width, hidden))
        self.fc2 = self.child("fc2", Linear(rng, hidden, out_width))

    def logits(self, x, rng: np.random.Generator | None = None,
               training: bool = False) -> Tensor:
        h = nd.relu(self.fc1(x))
        if training and self.dropout > 0 and rng is not None:
            h = nd.dropout(h, self.dropout, rng, training=True)
        return self.fc2(h)

    def predict(self, x) -> np.ndarray:
        z = self.logits(x).value
        if self.link == "sigmoid":
            return 1.0 / (1.0 + np.exp(-z))
        if self.link == "softmax":
            e = np.exp(z - z.max(axis=-1, keepdims=True))
            return e / e.sum(axis=-1, keepdims=True)
        return z


def bce_multilabel(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Stable elementwise binary cross entropy, averaged."""
    targets = np.asarray(targets, dtype=np.float64)
    return nd.mean(nd.sub(nd.softplus(logits), nd.mul(logits, targets)))


def cross_entropy_smoothed(logits: Tensor, class_index: int, n_classes: int,
                           smoothing: float = 0.1) -> Tensor:
    """Single-label loss against a smoothed one-hot target."""
    q = np.full(n_classes, smoothing / (n_classes - 1))
    q[class_index] = 1.0 - smoothing
    logp = nd.log_softmax(logits, axis=-1)
    return nd.mul(nd.sum_(nd.mul(logp, q)), -1.0)


def mse_loss(pred: Tensor, target: np.ndarray) -> Tensor:
    err = nd.sub(pred, np.asarray(target, dtype=np.float64))
    return nd.mean(nd.mul(err, err))
