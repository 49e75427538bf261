"""Conditioning-embedding provider.

The real system plugs in an external audio/text embedding model; this module
ships a deterministic stand-in that projects banded spectral energies of the
clip through a fixed random map, so identical audio always yields identical
embeddings and the rest of the pipeline can be exercised end to end.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..audio import AudioBuffer
from ..ndgrad import ContractError

EMBED_WIDTH = 512
_N_BANDS = 32
_PROJECTION_SEED = 0x51AB


@dataclass
class ConditioningEmbedding:
    vector: np.ndarray
    provenance: str = "stub"

    def __post_init__(self):
        self.vector = np.asarray(self.vector, dtype=np.float64)
        if not np.all(np.isfinite(self.vector)):
            raise ContractError("conditioning embedding contains non-finite values")


def _projection(width: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(np.random.PCG64(_PROJECTION_SEED))
    w = rng.normal(0.0, 1.0 / np.sqrt(_N_BANDS), size=(_N_BANDS, width))
    b = rng.normal(0.0, 0.1, size=width)
    return w, b


def stub_conditioning(audio: AudioBuffer, width: int = EMBED_WIDTH) -> ConditioningEmbedding:
    """Fixed random projection of banded spectral energies.

    Silence maps to the projection bias; the energies are not scale
    normalized, so changing the clip gain changes the embedding.
    """
    x = audio.mono()
    if x.size == 0:
        raise ContractError("cannot embed empty audio")
    spectrum = np.abs(np.fft.rfft(x)) ** 2 / x.size
    bands = np.array_split(spectrum, _N_BANDS)
    energies = np.log1p(np.array([b.sum() for b in bands]))
    w, b = _projection(width)
    return ConditioningEmbedding(energies @ w + b, provenance="stub")
