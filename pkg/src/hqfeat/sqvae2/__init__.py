from .model import (
    Codebook,
    HierLatent,
    LevelLatent,
    LEVEL_BY_NAME,
    LEVEL_NAMES,
    Sqvae2,
    Sqvae2Config,
    codebook_stats,
    deterministic_quantize,
    sample_rows,
    stochastic_quantize,
)
from .train import ProgressiveSchedule, final_stats, train_stage1, train_step

__all__ = [
    "Codebook", "HierLatent", "LevelLatent", "LEVEL_BY_NAME", "LEVEL_NAMES",
    "Sqvae2", "Sqvae2Config", "codebook_stats", "deterministic_quantize",
    "sample_rows", "stochastic_quantize", "ProgressiveSchedule", "final_stats",
    "train_stage1", "train_step",
]
