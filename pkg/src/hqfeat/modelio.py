"""Save and load the stage-1 model and priors through the checkpoint container."""

from __future__ import annotations

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .priors import PriorConfig, PriorModel
from .sqvae2 import Sqvae2, Sqvae2Config


def save_stage1(path, model: Sqvae2, step: int = 0, seed: int = 0, extra: dict | None = None):
    header = {"kind": "sqvae2", "config": model.cfg.to_dict(), "step": step, "seed": seed}
    if extra:
        header.update(extra)
    save_checkpoint(path, header, model.state_dict())


def load_stage1(path) -> tuple[Sqvae2, dict]:
    header, params = load_checkpoint(path)
    if header.get("kind") != "sqvae2":
        raise ValueError(f"{path}: not a stage-1 checkpoint")
    model = Sqvae2(Sqvae2Config.from_dict(header["config"]), np.random.default_rng(0))
    model.load_state_dict(params)
    return model, header


def save_prior(path, prior: PriorModel, step: int = 0, seed: int = 0, extra: dict | None = None):
    header = {"kind": "prior", "config": prior.cfg.to_dict(), "step": step, "seed": seed}
    if extra:
        header.update(extra)
    save_checkpoint(path, header, prior.state_dict())


def load_prior(path) -> tuple[PriorModel, dict]:
    header, params = load_checkpoint(path)
    if header.get("kind") != "prior":
        raise ValueError(f"{path}: not a prior checkpoint")
    prior = PriorModel(PriorConfig.from_dict(header["config"]), np.random.default_rng(0))
    prior.load_state_dict(params)
    return prior, header
