"""Three-level stochastically quantized hierarchical autoencoder.

Level 1 is the top (coarsest) stream, level 3 the bottom. With the default
encoder strides (8, 4, 4) the token rates are one top token per 128 input
samples, one middle per 32, one bottom per 8.

Quantization onto codebook ``b_k`` is stochastic: the assignment probability
is softmax over ``-||z - b_k||^2 / (2 s^2)`` with a trainable temperature
``s^2``. The training objective combines a Gaussian reconstruction term
(trainable variance ``sigma^2``) with a per-level quantization-error term and
an entropy bonus; the quantization error and the entropy are computed
analytically over all K entries.

The reconstruction path uses one stochastic sample per frame, realized with
Gumbel noise: the integer token is the argmax of the noise-perturbed logits
(an exact draw from the assignment probabilities), while the decoder consumes
the matching softly-relaxed assignment, so reconstruction pressure
backpropagates into the encoder, the codebook, and the temperatures. With
the noise frozen by seed the whole loss is a smooth function of the
parameters and finite differences verify the gradient exactly. A hard sample
with a bypassed gradient has no such data coupling and lets the entropy term
collapse every codebook onto one point, which is why it is not used here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import ndgrad as nd
from ..ndgrad import ContractError, Tensor
from ..nn import Conv1d, ConvTranspose1d, Linear, Module, ResBlock

LEVEL_NAMES = {1: "top", 2: "middle", 3: "bottom"}
LEVEL_BY_NAME = {v: k for k, v in LEVEL_NAMES.items()}


@dataclass
class Sqvae2Config:
    sample_rate: int = 4410
    strides: tuple = (8, 4, 4)  # bottom, middle, top encoder downsampling
    widths: tuple = (32, 24, 16)  # channel width per level (top, middle, bottom)
    codebook_sizes: tuple = (16, 32, 32)  # entries per level (top, middle, bottom)
    codebook_dim: int = 8
    residual_blocks: int = 2
    init_log_sigma2: float = -2.0
    init_log_s2: float = -2.0
    relax_temperature: float = 1.0  # Gumbel relaxation for the recon path

    @property
    def rates(self) -> dict[int, int]:
        """Samples per token for levels 1 (top) .. 3 (bottom)."""
        bot, mid, top = self.strides
        return {1: bot * mid * top, 2: bot * mid, 3: bot}

    def to_dict(self) -> dict:
        return {
            "sample_rate": self.sample_rate,
            "strides": list(self.strides),
            "widths": list(self.widths),
            "codebook_sizes": list(self.codebook_sizes),
            "codebook_dim": self.codebook_dim,
            "residual_blocks": self.residual_blocks,
            "init_log_sigma2": self.init_log_sigma2,
            "init_log_s2": self.init_log_s2,
            "relax_temperature": self.relax_temperature,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Sqvae2Config":
        d = dict(d)
        for key in ("strides", "widths", "codebook_sizes"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


class Codebook(Module):
    """K trainable d-dimensional entries plus a trainable temperature."""

    def __init__(self, rng, level: int, K: int, d: int, init_log_s2: float = 0.0):
        super().__init__()
        if K < 2:
            raise ContractError(f"codebook needs at least 2 entries, got {K}")
        self.level = level
        self.K = K
        self.d = d
        self.entries = self.param("entries", rng.normal(0.0, 1.0, size=(K, d)) / np.sqrt(d))
        self.log_s2 = self.param("log_s2", np.array(init_log_s2))

    def s2(self) -> Tensor:
        return nd.exp(self.log_s2)

    def sq_distances(self, z: Tensor) -> Tensor:
        """||z - b_k||^2 for every entry; z is (..., d), result (..., K)."""
        zz = nd.sum_(nd.mul(z, z), axis=-1, keepdims=True)
        bb = nd.sum_(nd.mul(self.entries, self.entries), axis=-1)
        cross = nd.matmul(z, nd.transpose(self.entries, (1, 0)))
        return nd.add(nd.sub(zz, nd.mul(cross, 2.0)), bb)

    def logits(self, z: Tensor) -> Tensor:
        d2 = self.sq_distances(z)
        return nd.div(d2, nd.mul(self.s2(), -2.0))

    def probabilities(self, z: Tensor) -> Tensor:
        return nd.softmax(self.logits(z), axis=-1)

    def nearest(self, z_value: np.ndarray) -> np.ndarray:
        """Argmin over squared distance; ties resolve to the lowest index."""
        b = self.entries.value
        d2 = (
            (z_value**2).sum(-1, keepdims=True)
            - 2.0 * z_value @ b.T
            + (b**2).sum(-1)
        )
        return d2.argmin(axis=-1)

    def lookup(self, tokens: np.ndarray) -> Tensor:
        return nd.embedding(self.entries, tokens)


def stochastic_quantize(z: np.ndarray, codebook: Codebook) -> np.ndarray:
    """Assignment probability row over the codebook for one vector."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1] != codebook.d:
        raise ContractError(f"vector dim {z.shape[-1]} != codebook dim {codebook.d}")
    return codebook.probabilities(Tensor(z)).value


def deterministic_quantize(z: np.ndarray, codebook: Codebook) -> int:
    """Nearest-entry index (lowest index wins ties)."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1] != codebook.d:
        raise ContractError(f"vector dim {z.shape[-1]} != codebook dim {codebook.d}")
    return int(codebook.nearest(z[None, :])[0])


def sample_rows(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF sample of one index per probability row."""
    cdf = probs.cumsum(axis=-1)
    u = rng.random(probs.shape[:-1] + (1,))
    return np.minimum((u > cdf).sum(axis=-1), probs.shape[-1] - 1)


def gumbel_noise(shape, rng: np.random.Generator) -> np.ndarray:
    u = np.clip(rng.random(shape), 1e-12, 1.0 - 1e-12)
    return -np.log(-np.log(u))


@dataclass
class LevelLatent:
    pre_quant: Tensor  # (B, t, d) continuous features before quantization
    sq_dist: Tensor  # (B, t, K) squared distances to every entry
    logits: Tensor  # (B, t, K) -sq_dist / (2 s^2)
    probs: Tensor  # (B, t, K) assignment probabilities
    tokens: np.ndarray  # (B, t) selected or sampled indices
    quantized: Tensor  # (B, t, d) codebook rows for the tokens


@dataclass
class HierLatent:
    levels: dict[int, LevelLatent] = field(default_factory=dict)
    gated: dict[int, Tensor] | None = None  # schedule-scaled quantized streams

    def tokens(self) -> dict[int, np.ndarray]:
        return {l: lv.tokens for l, lv in self.levels.items()}


class EncoderBlock(Module):
    def __init__(self, rng, n_in: int, n_out: int, stride: int, n_res: int):
        super().__init__()
        self.down = self.child("down", Conv1d(rng, n_in, n_out, kernel=stride, stride=stride))
        self.res = [self.child(f"res{i}", ResBlock(rng, n_out)) for i in range(n_res)]

    def __call__(self, x: Tensor) -> Tensor:
        h = nd.leaky_relu(self.down(x))
        for r in self.res:
            h = r(h)
        return h


class DecoderBlock(Module):
    def __init__(self, rng, n_in: int, n_out: int, stride: int, n_res: int):
        super().__init__()
        self.res = [self.child(f"res{i}", ResBlock(rng, n_in)) for i in range(n_res)]
        self.up = self.child("up", ConvTranspose1d(rng, n_in, n_out, kernel=stride, stride=stride))

    def __call__(self, x: Tensor) -> Tensor:
        for r in self.res:
            x = r(x)
        return self.up(x)


class MergeBlock(Module):
    """Concatenate two aligned streams, then mix with a 1x1 convolution."""

    def __init__(self, rng, n_a: int, n_b: int, n_out: int):
        super().__init__()
        self.mix = self.child("mix", Conv1d(rng, n_a + n_b, n_out, kernel=1))

    def __call__(self, a: Tensor, b: Tensor) -> Tensor:
        return self.mix(nd.concat([a, b], axis=-1))


class Sqvae2(Module):
    """Bottom-up encoders, top-down quantizing blocks, and mirrored decoder."""

    def __init__(self, cfg: Sqvae2Config, rng: np.random.Generator):
        super().__init__()
        self.cfg = cfg
        w1, w2, w3 = cfg.widths
        s_bot, s_mid, s_top = cfg.strides
        d = cfg.codebook_dim
        nres = cfg.residual_blocks

        self.enc_bottom = self.child("enc_bottom", EncoderBlock(rng, 1, w3, s_bot, nres))
        self.enc_middle = self.child("enc_middle", EncoderBlock(rng, w3, w2, s_mid, nres))
        self.enc_top = self.child("enc_top", EncoderBlock(rng, w2, w1, s_top, nres))

        self.codebooks = {
            l: self.child(
                f"codebook{l}",
                Codebook(rng, l, cfg.codebook_sizes[l - 1], d, cfg.init_log_s2),
            )
            for l in (1, 2, 3)
        }

        # top-down path: project features to codebook space, refine lower
        # levels with the upsampled quantized stream from above
        self.to_latent1 = self.child("to_latent1", Conv1d(rng, w1, d, kernel=1))
        self.up_12 = self.child("up_12", ConvTranspose1d(rng, d, d, kernel=s_top, stride=s_top))
        self.merge2 = self.child("merge2", MergeBlock(rng, w2, d, d))
        self.up_23 = self.child("up_23", ConvTranspose1d(rng, d, d, kernel=s_mid, stride=s_mid))
        self.merge3 = self.child("merge3", MergeBlock(rng, w3, d, d))

        self.dec_top = self.child("dec_top", DecoderBlock(rng, d, w2, s_top, nres))
        self.dec_merge2 = self.child("dec_merge2", MergeBlock(rng, w2, d, w2))
        self.dec_middle = self.child("dec_middle", DecoderBlock(rng, w2, w3, s_mid, nres))
        self.dec_merge3 = self.child("dec_merge3", MergeBlock(rng, w3, d, w3))
        self.dec_bottom = self.child("dec_bottom", DecoderBlock(rng, w3, 1, s_bot, nres))

        self.log_sigma2 = self.param("log_sigma2", np.array(cfg.init_log_sigma2))

    # -- inference ----------------------------------------------------------

    def encode_bottom_up(self, x: np.ndarray) -> tuple[Tensor, Tensor, Tensor]:
        """x: (B, T) with T divisible by the top rate. Returns (H1, H2, H3)."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        rate = self.cfg.rates[1]
        if x.shape[1] % rate:
            raise ContractError(
                f"input length {x.shape[1]} is not a multiple of {rate}; pad with zeros first"
            )
        h3 = self.enc_bottom(Tensor(x[:, :, None]))
        h2 = self.enc_middle(h3)
        h1 = self.enc_top(h2)
        return h1, h2, h3

    def _quantize_level(self, level: int, pre: Tensor, mode: str,
                        rng: np.random.Generator | None) -> LevelLatent:
        cb = self.codebooks[level]
        d2 = cb.sq_distances(pre)
        logits = nd.div(d2, nd.mul(cb.s2(), -2.0))
        probs = nd.softmax(logits, axis=-1)
        if mode == "deterministic":
            tokens = cb.nearest(pre.value)
            quantized = cb.lookup(tokens)
        elif mode == "stochastic":
            if rng is None:
                raise ContractError("stochastic quantization requires an rng")
            # Gumbel-argmax: an exact draw from the probability rows; the
            # decoder sees the relaxed assignment of the same realization
            noise = gumbel_noise(probs.shape, rng)
            perturbed = nd.add(logits, noise)
            tokens = perturbed.value.argmax(axis=-1)
            tau = self.cfg.relax_temperature
            relaxed = nd.softmax(perturbed if tau == 1.0 else nd.div(perturbed, tau), -1)
            quantized = nd.matmul(relaxed, cb.entries)
        else:
            raise ContractError(f"unknown quantization mode {mode!r}")
        return LevelLatent(pre, d2, logits, probs, tokens, quantized)

    def top_down(self, h1: Tensor, h2: Tensor, h3: Tensor, mode: str = "deterministic",
                 rng: np.random.Generator | None = None,
                 level_gates: tuple = (1.0, 1.0, 1.0)) -> HierLatent:
        """Quantize level by level; each level conditions on the one above.

        ``level_gates`` scale each level's quantized stream before it feeds
        the rest of the model; the progressive schedule ramps them so early
        training reconstructs from the coarse stream alone.
        """
        latent = HierLatent()
        z1 = self.to_latent1(h1)
        latent.levels[1] = self._quantize_level(1, z1, mode, rng)
        q1 = self._gated(latent.levels[1], level_gates[0])
        z2 = self.merge2(h2, self.up_12(q1))
        latent.levels[2] = self._quantize_level(2, z2, mode, rng)
        q2 = self._gated(latent.levels[2], level_gates[1])
        z3 = self.merge3(h3, self.up_23(q2))
        latent.levels[3] = self._quantize_level(3, z3, mode, rng)
        latent.gated = {
            1: q1, 2: q2, 3: self._gated(latent.levels[3], level_gates[2]),
        }
        return latent

    @staticmethod
    def _gated(level: LevelLatent, gate: float) -> Tensor:
        if gate == 1.0:
            return level.quantized
        return nd.mul(level.quantized, float(gate))

    def decode(self, latent: HierLatent) -> Tensor:
        """Reconstruct (B, T) from the three quantized streams."""
        streams = latent.gated or {l: latent.levels[l].quantized for l in (1, 2, 3)}
        h = self.dec_merge2(self.dec_top(streams[1]), streams[2])
        h = self.dec_merge3(self.dec_middle(h), streams[3])
        out = self.dec_bottom(h)
        return nd.reshape(out, out.shape[:2])

    def tokenize(self, x: np.ndarray) -> dict[int, np.ndarray]:
        h1, h2, h3 = self.encode_bottom_up(x)
        return self.top_down(h1, h2, h3, mode="deterministic").tokens()

    def decode_tokens(self, tokens: dict[int, np.ndarray]) -> np.ndarray:
        latent = HierLatent()
        for l in (1, 2, 3):
            tok = np.asarray(tokens[l])
            if tok.ndim == 1:
                tok = tok[None, :]
            q = self.codebooks[l].lookup(tok)
            latent.levels[l] = LevelLatent(q, None, None, None, tok, q)
        return self.decode(latent).value

    # -- training objective ---------------------------------------------------

    def elbo(self, x: np.ndarray, rng: np.random.Generator,
             weights: tuple = (1.0, 1.0, 1.0)):
        """Training loss and its named summands for a batch of clips.

        Returns (total, parts, extras, latent). ``parts`` sums exactly to
        ``total``. ``extras`` carries unweighted per-level entropies and the
        evaluation-mode quantities used for logging.
        """
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        B, T = x.shape
        h1, h2, h3 = self.encode_bottom_up(x)
        latent = self.top_down(h1, h2, h3, mode="stochastic", rng=rng,
                               level_gates=tuple(float(w) for w in weights))
        recon = self.decode(latent)

        sigma2 = nd.exp(self.log_sigma2)
        err = nd.sub(recon, x)
        sq = nd.div(nd.sum_(nd.mul(err, err)), float(B))
        parts = {
            "log_sigma2_term": nd.mul(self.log_sigma2, T / 2.0),
            "recon": nd.div(sq, nd.mul(sigma2, 2.0)),
        }
        entropies = {}
        for l in (1, 2, 3):
            lv = latent.levels[l]
            cb = self.codebooks[l]
            logp = nd.log_softmax(lv.logits, axis=-1)
            quant = nd.div(nd.sum_(nd.mul(lv.probs, lv.sq_dist)), float(B))
            quant = nd.div(quant, nd.mul(cb.s2(), 2.0))
            entropy = nd.div(nd.sum_(nd.mul(lv.probs, logp)), -float(B))
            w = float(weights[l - 1])
            parts[f"quant_l{l}"] = nd.mul(quant, w)
            parts[f"neg_entropy_l{l}"] = nd.mul(entropy, -w)
            entropies[l] = entropy
        total = None
        for p in parts.values():
            total = p if total is None else nd.add(total, p)
        extras = {
            "entropy": entropies,
            "sigma2": float(sigma2.value),
            "s2": {l: float(self.codebooks[l].s2().value) for l in (1, 2, 3)},
            "recon_mse": float(((recon.value - x) ** 2).sum() / (B * T)),
        }
        return total, parts, extras, latent

    def reconstruction_mse(self, x: np.ndarray) -> float:
        """Deterministic-mode round trip error per sample."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        h1, h2, h3 = self.encode_bottom_up(x)
        recon = self.decode(self.top_down(h1, h2, h3, mode="deterministic"))
        return float(((recon.value - x) ** 2).mean())


def codebook_stats(model: Sqvae2, clips) -> dict[int, dict]:
    """Usage histogram and perplexity per level over a dataset."""
    clips = list(clips)
    if not clips:
        raise ContractError("codebook_stats requires a non-empty dataset")
    counts = {l: np.zeros(model.codebooks[l].K) for l in (1, 2, 3)}
    for clip in clips:
        tokens = model.tokenize(clip)
        for l in (1, 2, 3):
            counts[l] += np.bincount(tokens[l].reshape(-1), minlength=model.codebooks[l].K)
    stats = {}
    for l in (1, 2, 3):
        total = counts[l].sum()
        p = counts[l] / total
        nz = p[p > 0]
        entropy = float(-(nz * np.log(nz)).sum())
        stats[l] = {
            "histogram": counts[l].astype(int).tolist(),
            "perplexity": float(np.exp(entropy)),
            "used": int((counts[l] > 0).sum()),
        }
    return stats
