from .conditioning import EMBED_WIDTH, ConditioningEmbedding, stub_conditioning
from .model import CausalUpsampler, PriorConfig, PriorModel, default_prior_configs, shift_right
from .sampling import sample, sample_stream, step_distribution
from .train import RATIO_TO_UPPER, UPPER_LEVELS, crop_window, train_prior

__all__ = [
    "EMBED_WIDTH", "ConditioningEmbedding", "stub_conditioning",
    "CausalUpsampler", "PriorConfig", "PriorModel", "default_prior_configs",
    "shift_right", "sample", "sample_stream", "step_distribution",
    "RATIO_TO_UPPER", "UPPER_LEVELS", "crop_window", "train_prior",
]
