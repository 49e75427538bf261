"""Causal transformer priors over the hierarchical token streams.

One prior per level. The top prior models its stream unconditionally (save
for the optional conditioning embedding in slot 0); the middle prior is
conditioned on the top stream and the bottom prior on both upper streams,
each brought to the target frame rate by upsampling modules.

Upsampling is strictly span-causal: the conditioning vector added at slot t
is a function only of upper tokens whose audio span ends no later than the
span of token t. Combined with the causal attention mask, the activation at
position t can never see audio content past token t's span, which is what
makes teacher-forced feature extraction causally clean.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import ndgrad as nd
from ..ndgrad import ContractError, Tensor
from ..nn import (
    CausalResBlock,
    ConvTranspose1d,
    Embedding,
    LayerNorm,
    Linear,
    Module,
    TransformerBlock,
)
from .conditioning import ConditioningEmbedding


@dataclass
class PriorConfig:
    level: int  # 1 top, 2 middle, 3 bottom
    vocab: int
    context_length: int = 256
    depth: int = 8
    width: int = 48
    heads: int = 4
    tap_layer: int | None = None  # defaults to depth // 2
    attention_pattern: str = "dense"  # "dense" or "local:<window>"
    position_mode: str = "learned"  # "learned" or "none"
    cond_width: int = 512
    upper_vocabs: tuple = ()  # (K1,) for level 2, (K1, K2) for level 3
    upsample_ratios: tuple = ()  # (4,) for level 2, (4, 4) for level 3
    upsampler_res_blocks: int = 1

    def __post_init__(self):
        if self.tap_layer is None:
            self.tap_layer = max(1, self.depth // 2)
        if not 1 <= self.tap_layer <= self.depth:
            raise ContractError(f"tap_layer {self.tap_layer} outside 1..{self.depth}")
        if self.context_length < 1:
            raise ContractError("context_length must be at least 1")
        if len(self.upper_vocabs) != len(self.upsample_ratios):
            raise ContractError("upper_vocabs and upsample_ratios must align")
        if self.attention_window is None and self.attention_pattern != "dense":
            raise ContractError(f"unknown attention pattern {self.attention_pattern!r}")

    @property
    def attention_window(self) -> int | None:
        if self.attention_pattern == "dense":
            return None
        if self.attention_pattern.startswith("local:"):
            try:
                w = int(self.attention_pattern.split(":", 1)[1])
            except ValueError:
                return None
            return w if w >= 1 else None
        return None

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "vocab": self.vocab,
            "context_length": self.context_length,
            "depth": self.depth,
            "width": self.width,
            "heads": self.heads,
            "tap_layer": self.tap_layer,
            "attention_pattern": self.attention_pattern,
            "position_mode": self.position_mode,
            "cond_width": self.cond_width,
            "upper_vocabs": list(self.upper_vocabs),
            "upsample_ratios": list(self.upsample_ratios),
            "upsampler_res_blocks": self.upsampler_res_blocks,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PriorConfig":
        d = dict(d)
        d["upper_vocabs"] = tuple(d.get("upper_vocabs", ()))
        d["upsample_ratios"] = tuple(d.get("upsample_ratios", ()))
        return cls(**d)


def shift_right(x: Tensor, amount: int) -> Tensor:
    """Delay a (B, L, C) stream by ``amount`` frames, zero-filling the front."""
    if amount == 0:
        return x
    padded = nd.pad1d(x, amount, 0)
    return padded[:, : x.shape[1], :]


class CausalUpsampler(Module):
    """Upsample an embedding stream by ``ratio`` without looking ahead.

    The transposed convolution (kernel == stride) is followed by a right
    shift of ratio - 1 frames, so output frame t only uses input frames whose
    span ends at or before frame t's span end.
    """

    def __init__(self, rng, width: int, ratio: int, res_blocks: int = 1):
        super().__init__()
        self.ratio = ratio
        self.pre = [self.child(f"pre{i}", CausalResBlock(rng, width)) for i in range(res_blocks)]
        self.up = self.child("up", ConvTranspose1d(rng, width, width, kernel=ratio, stride=ratio))
        self.post = self.child("post", CausalResBlock(rng, width))

    def __call__(self, x: Tensor) -> Tensor:
        for r in self.pre:
            x = r(x)
        y = shift_right(self.up(x), self.ratio - 1)
        return self.post(y)

    @property
    def left_reach_out(self) -> int:
        """Conservative dependence reach in output frames."""
        reach_in = 2 * len(self.pre) + 1  # pre blocks plus the current input frame
        return self.ratio * reach_in + (self.ratio - 1) + 2  # + shift + post block


class PriorModel(Module):
    """Next-token transformer for one level's stream."""

    def __init__(self, cfg: PriorConfig, rng: np.random.Generator):
        super().__init__()
        self.cfg = cfg
        w = cfg.width
        self.tok_emb = self.child("tok_emb", Embedding(rng, cfg.vocab, w))
        self.start = self.param("start", rng.normal(0.0, 0.02, size=w))
        self.cond_proj = self.child("cond_proj", Linear(rng, cfg.cond_width, w))
        if cfg.position_mode == "learned":
            self.pos = self.param("pos", rng.normal(0.0, 0.02, size=(cfg.context_length, w)))
        else:
            self.pos = None
        self.upper_embs = [
            self.child(f"upper_emb{i}", Embedding(rng, k, w))
            for i, k in enumerate(cfg.upper_vocabs)
        ]
        self.upsamplers = [
            self.child(f"upsampler{i}", CausalUpsampler(rng, w, r, cfg.upsampler_res_blocks))
            for i, r in enumerate(cfg.upsample_ratios)
        ]
        self.blocks = [
            self.child(f"block{i}", TransformerBlock(rng, w, cfg.heads)) for i in range(cfg.depth)
        ]
        self.ln_f = self.child("ln_f", LayerNorm(w))
        self.head = self.child("head", Linear(rng, w, cfg.vocab, zero_init=True))

    # -- conditioning ---------------------------------------------------------

    def upsampled_conditioning(self, upper: list[np.ndarray]) -> Tensor | None:
        """Chain the upper streams down to this level's frame rate."""
        if not self.upsamplers:
            return None
        if len(upper) != len(self.upsamplers):
            raise ContractError(
                f"level {self.cfg.level} prior expects {len(self.upsamplers)} upper "
                f"streams, got {len(upper)}"
            )
        stream = None
        for i, tokens in enumerate(upper):
            tokens = np.asarray(tokens)
            if tokens.ndim == 1:
                tokens = tokens[None, :]
            emb = self.upper_embs[i](tokens)
            stream = emb if stream is None else nd.add(stream, emb)
            stream = self.upsamplers[i](stream)
        return stream

    def conditioning_left_reach(self) -> int:
        """Worst-case frames of left context the conditioning chain uses."""
        reach = 0
        for ups in reversed(self.upsamplers):
            reach = ups.left_reach_out + ups.ratio * reach
        return reach

    def attention_left_reach(self) -> int | None:
        """Frames of left context attention can see; None means unbounded."""
        win = self.cfg.attention_window
        if win is None:
            return None
        return self.cfg.depth * (win - 1)

    def receptive_field(self) -> int | None:
        """Total left-context frames a position can depend on (None = all)."""
        attn = self.attention_left_reach()
        if attn is None:
            return None
        return attn + self.conditioning_left_reach()

    # -- forward --------------------------------------------------------------

    def _slot0(self, cond, B: int) -> Tensor:
        w = self.cfg.width
        if cond is None:
            base = nd.reshape(self.start, (1, 1, w))
            return nd.mul(base, np.ones((B, 1, 1)))
        if isinstance(cond, ConditioningEmbedding):
            cond = cond.vector
        vec = cond.value if isinstance(cond, Tensor) else np.asarray(cond, dtype=np.float64)
        if vec.ndim == 1:
            vec = np.broadcast_to(vec, (B, vec.shape[0]))
        if vec.shape[-1] != self.cfg.cond_width:
            raise ContractError(
                f"conditioning width {vec.shape[-1]} != configured {self.cfg.cond_width}"
            )
        return nd.reshape(self.cond_proj(vec), (B, 1, w))

    def build_input_sequence(self, tokens: np.ndarray, cond=None,
                             upper: list | None = None,
                             cond_stream: Tensor | None = None) -> Tensor:
        """Shift-right token embeddings plus conditioning and positions.

        Slot 0 carries the conditioning embedding when given, otherwise the
        learned start embedding; slot t >= 1 carries token t-1. A precomputed
        ``cond_stream`` (from ``upsampled_conditioning``) may be passed to
        avoid recomputation; otherwise it is derived from ``upper``.
        """
        tokens = np.asarray(tokens)
        if tokens.ndim == 1:
            tokens = tokens[None, :]
        B, L = tokens.shape
        if L > self.cfg.context_length:
            raise ContractError(
                f"sequence length {L} exceeds context {self.cfg.context_length}; segment first"
            )
        slot0 = self._slot0(cond, B)
        if L > 1:
            x = nd.concat([slot0, self.tok_emb(tokens[:, :-1])], axis=1)
        else:
            x = slot0
        if cond_stream is None and upper:
            cond_stream = self.upsampled_conditioning(upper)
        if cond_stream is not None:
            if cond_stream.shape[1] < L:
                raise ContractError(
                    f"conditioning stream length {cond_stream.shape[1]} shorter than tokens {L}"
                )
            x = nd.add(x, cond_stream[:, :L, :])
        if self.pos is not None:
            x = nd.add(x, self.pos[:L])
        return x

    def forward_logits(self, x: Tensor, want_tap: bool = True):
        """Run the stack; returns (logits, tap activations after layer N)."""
        L = x.shape[1]
        mask = nd.causal_mask(L, self.cfg.attention_window)
        tap = None
        for i, block in enumerate(self.blocks, start=1):
            x = block(x, mask=mask)
            if want_tap and i == self.cfg.tap_layer:
                tap = x
        logits = self.head(self.ln_f(x))
        return logits, tap

    def tap_activations(self, x: Tensor) -> Tensor:
        """Residual-stream output of the tap layer only (cheaper than logits)."""
        L = x.shape[1]
        mask = nd.causal_mask(L, self.cfg.attention_window)
        for block in self.blocks[: self.cfg.tap_layer]:
            x = block(x, mask=mask)
        return x

    def nll(self, tokens: np.ndarray, cond=None, upper: list | None = None) -> Tensor:
        """Mean negative log-likelihood of tokens under teacher forcing."""
        tokens = np.asarray(tokens)
        if tokens.ndim == 1:
            tokens = tokens[None, :]
        x = self.build_input_sequence(tokens, cond, upper)
        logits, _ = self.forward_logits(x, want_tap=False)
        logp = nd.log_softmax(logits, axis=-1)
        picked = nd.take_along_last(logp, tokens)
        return nd.mul(nd.mean(picked), -1.0)


def default_prior_configs(codebook_sizes=(16, 32, 32), context_length: int = 256,
                          depth: int = 8, widths=(48, 32, 28), heads=(4, 4, 4),
                          **kw) -> dict[int, PriorConfig]:
    """Toy-scale config triple with the standard 1:4:16 rate chain."""
    k1, k2, k3 = codebook_sizes
    return {
        1: PriorConfig(level=1, vocab=k1, context_length=context_length, depth=depth,
                       width=widths[0], heads=heads[0], **kw),
        2: PriorConfig(level=2, vocab=k2, context_length=context_length, depth=depth,
                       width=widths[1], heads=heads[1], upper_vocabs=(k1,),
                       upsample_ratios=(4,), **kw),
        3: PriorConfig(level=3, vocab=k3, context_length=context_length, depth=depth,
                       width=widths[2], heads=heads[2], upper_vocabs=(k1, k2),
                       upsample_ratios=(4, 4), **kw),
    }
