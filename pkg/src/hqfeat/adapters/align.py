"""Temporal alignment of feature sequences to a downstream model's frames.

Two mechanisms:

* ``AlignLinear``: a channel map (G -> Z) followed by a time map (V -> N),
  in that order, for concatenating features with a spectrogram.
* ``Downsampler``: window-based max pooling, average pooling, or unfolding,
  with windows and hops expressed in input samples. Unfolding first reduces
  each feature frame to ``reduced_width`` channels (linear + ReLU) and then
  concatenates the window's reduced frames, so it keeps per-frame detail
  that the pooling variants average away.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import ndgrad as nd
from ..ndgrad import ContractError, Tensor
from ..nn import Linear, Module


class AlignLinear(Module):
    """Channel map (G -> Z) followed by a time map (V -> N), in that order.

    The time map starts at the covering average so the stream is usable at
    step 0. ``band_radius`` (in input frames, around each output frame's
    natural coverage) restricts the time map to a local band; None keeps the
    full matrix.
    """

    def __init__(self, rng, in_width: int, out_width: int, in_frames: int, out_frames: int,
                 aligned_init: bool = True, band_radius: int | None = None):
        super().__init__()
        if in_frames < 1 or out_frames < 1:
            raise ContractError("frame counts must be positive")
        self.channel = self.child("channel", Linear(rng, in_width, out_width))
        self.time = self.child("time", Linear(rng, in_frames, out_frames))
        coverage = np.zeros((in_frames, out_frames), dtype=bool)
        for n in range(out_frames):
            lo = int(np.floor(n * in_frames / out_frames))
            hi = max(lo + 1, int(np.ceil((n + 1) * in_frames / out_frames)))
            coverage[lo:hi, n] = True
        if aligned_init:
            w = coverage / coverage.sum(axis=0, keepdims=True)
            self.time.w.value = w + rng.normal(0.0, 0.01, size=w.shape)
        if band_radius is None:
            self.band_mask = None
        else:
            mask = np.zeros_like(coverage)
            for n in range(out_frames):
                idx = np.flatnonzero(coverage[:, n])
                lo = max(0, idx[0] - band_radius)
                hi = min(in_frames, idx[-1] + 1 + band_radius)
                mask[lo:hi, n] = True
            self.band_mask = mask.astype(np.float64)
            self.time.w.value = self.time.w.value * self.band_mask
        self.in_frames = in_frames
        self.out_frames = out_frames

    def __call__(self, features) -> Tensor:
        h = self.channel(features)  # (V, Z)
        h = nd.transpose(h, (1, 0))  # (Z, V)
        if self.band_mask is None:
            h = self.time(h)  # (Z, N)
        else:
            w = nd.mul(self.time.w, self.band_mask)
            h = nd.add(nd.matmul(h, w), self.time.b)
        return nd.transpose(h, (1, 0))  # (N, Z)


DOWNSAMPLE_KINDS = ("maxpool", "avgpool", "unfold")


@dataclass
class DownsampleSpec:
    kind: str
    window: int  # in input samples
    hop: int  # in input samples
    feature_hop: int  # input samples per feature frame
    reduced_width: int | None = None  # unfold only

    def __post_init__(self):
        if self.kind not in DOWNSAMPLE_KINDS:
            raise ContractError(f"kind must be one of {DOWNSAMPLE_KINDS}, got {self.kind!r}")
        if self.window % self.feature_hop:
            raise ContractError(
                f"window {self.window} not divisible by feature hop {self.feature_hop}"
            )
        if self.kind == "unfold":
            if self.reduced_width is None:
                raise ContractError("unfold requires reduced_width")
            if self.hop % self.feature_hop:
                raise ContractError(
                    f"unfold hop {self.hop} not divisible by feature hop {self.feature_hop}"
                )

    @property
    def frames_per_window(self) -> int:
        return self.window // self.feature_hop

    def out_width(self, feature_width: int) -> int:
        if self.kind == "unfold":
            return self.frames_per_window * self.reduced_width
        return feature_width

    def n_windows(self, n_frames: int) -> int:
        total = n_frames * self.feature_hop
        if total < self.window:
            return 0
        return (total - self.window) // self.hop + 1


class Downsampler(Module):
    def __init__(self, rng, spec: DownsampleSpec, feature_width: int):
        super().__init__()
        self.spec = spec
        self.feature_width = feature_width
        if spec.kind == "unfold":
            self.reduce = self.child("reduce", Linear(rng, feature_width, spec.reduced_width))

    def __call__(self, features: np.ndarray) -> Tensor:
        """features: (frames, width) at native token rate -> (n_out, out_width)."""
        features = np.asarray(features, dtype=np.float64)
        spec = self.spec
        n_out = spec.n_windows(features.shape[0])
        if n_out == 0:
            raise ContractError(
                f"{features.shape[0]} frames shorter than one window of {spec.window} samples"
            )
        if spec.kind == "unfold":
            fw = spec.frames_per_window
            fh = spec.hop // spec.feature_hop
            idx = np.arange(n_out)[:, None] * fh + np.arange(fw)[None, :]
            stacked = features[idx]  # (n_out, fw, width)
            reduced = nd.relu(self.reduce(Tensor(stacked)))
            return nd.reshape(reduced, (n_out, fw * spec.reduced_width))
        rows = []
        for t in range(n_out):
            lo = (t * spec.hop) // spec.feature_hop
            hi = -(-(t * spec.hop + spec.window) // spec.feature_hop)
            chunk = features[lo:hi]
            rows.append(chunk.max(axis=0) if spec.kind == "maxpool" else chunk.mean(axis=0))
        return Tensor(np.stack(rows))
