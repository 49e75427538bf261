from .aggregate import (
    AggregatorConfig,
    AttentionAggregator,
    AveragePoolAggregator,
    ProbeHead,
    TokenProjector,
    bce_multilabel,
    concat_with_class_token,
    cross_entropy_smoothed,
    mse_loss,
    pool_to_single_token,
    pooled_segment_tokens,
    token_out,
)
from .align import DOWNSAMPLE_KINDS, AlignLinear, Downsampler, DownsampleSpec
from .film import FiLMParams, FilmConditioner, FilmGenerator, film_apply

__all__ = [
    "AggregatorConfig", "AttentionAggregator", "AveragePoolAggregator",
    "ProbeHead", "TokenProjector", "bce_multilabel", "concat_with_class_token",
    "cross_entropy_smoothed", "mse_loss", "pool_to_single_token",
    "pooled_segment_tokens", "token_out", "DOWNSAMPLE_KINDS", "AlignLinear",
    "Downsampler", "DownsampleSpec", "FiLMParams", "FilmConditioner",
    "FilmGenerator", "film_apply",
]
