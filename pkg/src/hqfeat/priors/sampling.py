"""Ancestral sampling: top stream first, each lower stream conditioned above."""

from __future__ import annotations

import numpy as np

from ..ndgrad import ContractError
from ..tokens import HierTokens
from .model import PriorModel


def step_distribution(prior: PriorModel, prefix: np.ndarray, cond=None,
                      upper: list | None = None, cond_stream=None) -> np.ndarray:
    """Next-token probabilities after ``prefix`` (may be empty)."""
    prefix = np.asarray(prefix, dtype=np.int64).reshape(-1)
    padded = np.append(prefix, 0)  # the appended slot is dropped by the shift
    x = prior.build_input_sequence(padded[None, :], cond, upper, cond_stream=cond_stream)
    logits, _ = prior.forward_logits(x, want_tap=False)
    row = logits.value[0, len(prefix), :]
    e = np.exp(row - row.max())
    return e / e.sum()


def _pick(probs: np.ndarray, logits_row: np.ndarray, temperature: float,
          top_k: int | None, rng: np.random.Generator | None) -> int:
    if temperature == 0.0:
        return int(logits_row.argmax())
    scaled = logits_row / temperature
    if top_k is not None and 0 < top_k < scaled.size:
        cutoff = np.sort(scaled)[-top_k]
        scaled = np.where(scaled >= cutoff, scaled, -np.inf)
    e = np.exp(scaled - scaled.max())
    p = e / e.sum()
    cdf = p.cumsum()
    return int(min((rng.random() > cdf).sum(), p.size - 1))


def sample_stream(prior: PriorModel, length: int, cond=None, upper: list | None = None,
                  temperature: float = 1.0, top_k: int | None = None,
                  rng: np.random.Generator | None = None) -> np.ndarray:
    """Autoregressively draw one stream of ``length`` tokens."""
    if temperature < 0:
        raise ContractError("temperature must be >= 0")
    if length > prior.cfg.context_length:
        raise ContractError(
            f"cannot sample {length} tokens with context {prior.cfg.context_length}"
        )
    if temperature > 0 and rng is None:
        raise ContractError("stochastic sampling requires an rng")
    cond_stream = prior.upsampled_conditioning([np.asarray(u)[None, :] for u in upper]) \
        if upper else None
    tokens: list[int] = []
    for t in range(length):
        padded = np.append(np.asarray(tokens, dtype=np.int64), 0)
        x = prior.build_input_sequence(padded[None, :], cond, cond_stream=cond_stream)
        logits, _ = prior.forward_logits(x, want_tap=False)
        row = logits.value[0, t, :]
        tokens.append(_pick(None, row, temperature, top_k, rng))
    return np.asarray(tokens, dtype=np.int64)


def sample(priors: dict[int, PriorModel], cond=None, top_frames: int = 8,
           temperature: float = 1.0, top_k: int | None = None,
           rng: np.random.Generator | None = None,
           sample_rates: dict[int, int] | None = None) -> HierTokens:
    """Generate aligned streams in 1:4:16 length ratio from the three priors."""
    z1 = sample_stream(priors[1], top_frames, cond, None, temperature, top_k, rng)
    z2 = sample_stream(priors[2], top_frames * 4, cond, [z1], temperature, top_k, rng)
    z3 = sample_stream(priors[3], top_frames * 16, cond, [z1, z2], temperature, top_k, rng)
    rates = sample_rates or {1: 128, 2: 32, 3: 8}
    return HierTokens({1: z1, 2: z2, 3: z3}, rates)
