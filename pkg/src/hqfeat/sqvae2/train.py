"""Stage-1 training loop: seeded, deterministic, with progressive levels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..ndgrad import NumericalError
from ..nn import Adam
from .model import Sqvae2, Sqvae2Config, codebook_stats


@dataclass
class ProgressiveSchedule:
    """Per-level warm-up of the latent regularization terms.

    Level l's weight ramps linearly from 0 to 1 over ``ramp`` of the run,
    starting at ``starts[l-1]`` (fractions of total steps). The default
    enables top, then middle, then bottom, so early training balances
    information into the coarse stream first.
    """

    starts: tuple = (0.0, 0.1, 0.2)
    ramp: float = 0.1

    def weights(self, step: int, total_steps: int) -> tuple:
        frac = (step + 1) / max(1, total_steps)
        out = []
        for start in self.starts:
            if self.ramp <= 0:
                out.append(1.0 if frac >= start else 0.0)
            else:
                out.append(float(np.clip((frac - start) / self.ramp, 0.0, 1.0)))
        return tuple(out)

    def to_dict(self):
        return {"starts": list(self.starts), "ramp": self.ramp}


def train_step(model: Sqvae2, batch: np.ndarray, opt: Adam, rng: np.random.Generator,
               weights=(1.0, 1.0, 1.0), step_index: int = 0) -> dict:
    """One gradient step; returns the full loss record as plain floats."""
    opt.zero_grad()
    total, parts, extras, _ = model.elbo(batch, rng, weights)
    record = {name: float(t.value) for name, t in parts.items()}
    record["total"] = float(total.value)
    for name, val in record.items():
        if not np.isfinite(val):
            raise NumericalError(
                f"stage-1 training aborted at step {step_index}: part {name!r} is non-finite"
            )
    total.backward()
    opt.step()
    record["entropy"] = {l: float(e.value) for l, e in extras["entropy"].items()}
    record["sigma2"] = extras["sigma2"]
    record["s2"] = extras["s2"]
    record["recon_mse"] = extras["recon_mse"]
    record["weights"] = list(weights)
    return record


def train_stage1(
    model: Sqvae2,
    clips: np.ndarray,
    steps: int,
    batch_size: int = 8,
    lr: float = 1e-3,
    seed: int = 0,
    schedule: ProgressiveSchedule | None = None,
    log_every: int = 10,
) -> list[dict]:
    """Train on (N, T) clips; bitwise reproducible from (config, seed)."""
    schedule = schedule or ProgressiveSchedule()
    clips = np.asarray(clips, dtype=np.float64)
    opt = Adam(model.parameters(), lr=lr)
    batch_rng = np.random.default_rng(np.random.PCG64(seed))
    sample_rng = np.random.default_rng(np.random.PCG64(seed + 1))
    history = []
    for step in range(steps):
        idx = batch_rng.choice(len(clips), size=min(batch_size, len(clips)), replace=False)
        w = schedule.weights(step, steps)
        record = train_step(model, clips[idx], opt, sample_rng, w, step_index=step)
        if step % log_every == 0 or step == steps - 1:
            record["step"] = step
            history.append(record)
    return history


def final_stats(model: Sqvae2, clips: np.ndarray) -> dict:
    stats = codebook_stats(model, clips)
    return {
        "recon_mse": model.reconstruction_mse(clips),
        "codebooks": {str(l): s for l, s in stats.items()},
    }
