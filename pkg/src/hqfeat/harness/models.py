"""Toy downstream task models used by the boost experiments.

Each model is intentionally small and information-limited, so whether an
injected feature stream helps is decided by the information it carries, not
by raw capacity.
"""

from __future__ import annotations

import numpy as np

from .. import ndgrad as nd
from ..adapters import AlignLinear, FiLMParams, FilmConditioner, FilmGenerator, film_apply
from ..ndgrad import ContractError, Tensor
from ..nn import Conv1d, ConvTranspose1d, Linear, Module, ResBlock
from . import dsp


class ToyTranscriber(Module):
    """Frame/onset piano-roll estimator from a coarse magnitude spectrogram.

    Optional feature streams are aligned with two linear maps (channels
    first, then time) and concatenated with the projected spectrogram before
    the output layer, mirroring a shallow probing back-end.
    """

    def __init__(self, rng, n_bins: int, n_pitches: int, n_frames: int,
                 feature_shapes: dict[int, tuple[int, int]] | None = None,
                 z_width: int = 32, spec_hidden: int = 32, band_radius: int | None = 4):
        super().__init__()
        self.n_pitches = n_pitches
        self.spec_in = self.child("spec_in", Linear(rng, n_bins, spec_hidden))
        self.spec_proj = self.child("spec_proj", Linear(rng, spec_hidden, z_width))
        self.aligners: dict[int, AlignLinear] = {}
        self.feat_mix: dict[int, Linear] = {}
        for level, (v, g) in (feature_shapes or {}).items():
            self.aligners[level] = self.child(
                f"align{level}",
                AlignLinear(rng, g, z_width, v, n_frames, band_radius=band_radius),
            )
            self.feat_mix[level] = self.child(f"featmix{level}", Linear(rng, z_width, z_width))
        n_streams = 1 + len(self.aligners)
        self.out = self.child("out", Linear(rng, n_streams * z_width, 2 * n_pitches))

    def forward(self, spec_mag: np.ndarray, features: dict[int, np.ndarray] | None = None):
        streams = [nd.tanh(self.spec_proj(nd.tanh(self.spec_in(spec_mag))))]
        for level, aligner in self.aligners.items():
            h = nd.tanh(aligner(Tensor(features[level])))
            streams.append(nd.tanh(self.feat_mix[level](h)))
        h = nd.concat(streams, axis=-1) if len(streams) > 1 else streams[0]
        logits = self.out(h)
        return logits[:, : self.n_pitches], logits[:, self.n_pitches :]

    def loss(self, spec_mag, frame_roll, onset_roll, features=None) -> Tensor:
        frame_logits, onset_logits = self.forward(spec_mag, features)
        frame_bce = nd.mean(nd.sub(nd.softplus(frame_logits),
                                   nd.mul(frame_logits, frame_roll)))
        onset_bce = nd.mean(nd.sub(nd.softplus(onset_logits),
                                   nd.mul(onset_logits, onset_roll)))
        return nd.mul(nd.add(frame_bce, onset_bce), 0.5)

    def predict(self, spec_mag, features=None) -> tuple[np.ndarray, np.ndarray]:
        frame_logits, onset_logits = self.forward(spec_mag, features)
        s = lambda z: 1.0 / (1.0 + np.exp(-z.value))
        return s(frame_logits), s(onset_logits)


class ToySeparator(Module):
    """Per-frame time-frequency mask estimator for one target stem.

    Injection points: "early" adds the (downsampled) feature stream at the
    encoder input, "late" at the decoder input.
    """

    def __init__(self, rng, n_bins: int, hidden: int = 24,
                 feature_width: int | None = None, injection: str | None = None):
        super().__init__()
        if injection not in (None, "early", "late"):
            raise ContractError(f"injection must be early|late|None, got {injection!r}")
        if injection is not None and feature_width is None:
            raise ContractError("feature injection requires feature_width")
        self.injection = injection
        self.enc = self.child("enc", Linear(rng, n_bins, hidden))
        self.dec = self.child("dec", Linear(rng, hidden, n_bins))
        if injection == "early":
            self.feat_in = self.child("feat_in", Linear(rng, feature_width, hidden))
        elif injection == "late":
            self.feat_out = self.child("feat_out", Linear(rng, feature_width, n_bins))

    def mask_logits(self, mix_mag: np.ndarray, feats: Tensor | None = None) -> Tensor:
        pre = self.enc(mix_mag)
        if self.injection == "early":
            pre = nd.add(pre, self.feat_in(feats))
        h = nd.tanh(pre)
        logits = self.dec(h)
        if self.injection == "late":
            logits = nd.add(logits, self.feat_out(feats))
        return logits

    def mask(self, mix_mag, feats=None) -> Tensor:
        return nd.sigmoid(self.mask_logits(mix_mag, feats))

    def loss(self, mix_mag, target_mag, feats=None) -> Tensor:
        est = nd.mul(self.mask(mix_mag, feats), mix_mag)
        err = nd.sub(est, target_mag)
        return nd.mean(nd.mul(err, err))

    def separate(self, mixture: np.ndarray, window: int, hop: int,
                 feats=None, window_kind: str = "hann") -> np.ndarray:
        """Apply the estimated mask to the mixture spectrogram and invert."""
        spec = dsp.stft(mixture, window, hop, window_kind)
        m = self.mask(np.abs(spec), feats).value
        return dsp.istft(spec * m, window, hop, length=len(mixture), window_kind=window_kind)


class ToyMixer(Module):
    """Stems to stereo mix, conditioned at the bottleneck and the synthesis
    stage through feature-wise modulation."""

    def __init__(self, rng, n_stems: int = 4, channels: int = 16, stride: int = 8,
                 cond_width: int = 512):
        super().__init__()
        self.stride = stride
        self.enc = self.child("enc", Conv1d(rng, n_stems, channels, kernel=stride, stride=stride))
        self.mid = self.child("mid", ResBlock(rng, channels))
        self.post = self.child("post", ResBlock(rng, channels))
        self.dec = self.child("dec", ConvTranspose1d(rng, channels, 2, kernel=stride, stride=stride))
        self.film_mid = self.child("film_mid", FilmGenerator(rng, cond_width, channels))
        self.film_post = self.child("film_post", FilmGenerator(rng, cond_width, channels))

    def forward(self, stems: np.ndarray, cond: Tensor | None = None) -> Tensor:
        """stems: (T, n_stems) -> stereo (T, 2). No cond means identity FiLM."""
        x = nd.leaky_relu(self.enc(stems[None, :, :]))
        x = self.mid(x)
        if cond is not None:
            x = film_apply(x, self.film_mid(cond))
        x = self.post(x)
        if cond is not None:
            x = film_apply(x, self.film_post(cond))
        out = self.dec(x)
        return nd.reshape(out, (out.shape[1], 2))

    def loss(self, stems, target: np.ndarray, cond=None) -> Tensor:
        err = nd.sub(self.forward(stems, cond), target)
        return nd.mean(nd.mul(err, err))


def toy_models(kind: str, rng, **kw) -> Module:
    """Factory over the three downstream model families."""
    if kind == "transcription":
        return ToyTranscriber(rng, **kw)
    if kind == "separation":
        return ToySeparator(rng, **kw)
    if kind == "mixing":
        return ToyMixer(rng, **kw)
    raise ContractError(f"no toy model for task kind {kind!r}")
