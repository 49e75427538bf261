"""Feature-wise linear modulation of downstream activations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import ndgrad as nd
from ..ndgrad import ContractError, Tensor
from ..nn import Linear, Module


@dataclass
class FiLMParams:
    gamma: Tensor  # (channels,)
    beta: Tensor  # (channels,)


def film_apply(activations, params: FiLMParams) -> Tensor:
    """Per-channel affine: gamma * act + beta."""
    act_width = activations.shape[-1]
    if params.gamma.shape[-1] != act_width or params.beta.shape[-1] != act_width:
        raise ContractError(
            f"FiLM channel mismatch: activations {act_width}, "
            f"gamma {params.gamma.shape[-1]}, beta {params.beta.shape[-1]}"
        )
    return nd.add(nd.mul(activations, params.gamma), params.beta)


class FilmGenerator(Module):
    """Map a conditioning vector to per-channel (gamma, beta).

    Zero-initialized so conditioning starts as the identity modulation.
    """

    def __init__(self, rng, cond_width: int, channels: int):
        super().__init__()
        self.channels = channels
        self.lin = self.child("lin", Linear(rng, cond_width, 2 * channels, zero_init=True))

    def __call__(self, cond) -> FiLMParams:
        gb = self.lin(cond)
        gamma = nd.add(gb[..., : self.channels], 1.0)
        beta = gb[..., self.channels :]
        return FiLMParams(gamma, beta)


class FilmConditioner(Module):
    """Clip features -> conditioning vector.

    Time average, non-trainable layer normalization, linear to ``out_width``,
    then dropout (training only).
    """

    def __init__(self, rng, feature_width: int, out_width: int = 512,
                 dropout: float = 0.25):
        super().__init__()
        self.dropout = dropout
        self.lin = self.child("lin", Linear(rng, feature_width, out_width))

    def __call__(self, features: np.ndarray, rng: np.random.Generator | None = None,
                 training: bool = False) -> Tensor:
        features = np.asarray(features, dtype=np.float64)
        pooled = nd.layer_norm(Tensor(features.mean(axis=0)))
        out = self.lin(pooled)
        if training and rng is not None:
            out = nd.dropout(out, self.dropout, rng, training=True)
        return out
