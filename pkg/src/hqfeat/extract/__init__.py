from .ftrfile import cache_path, read_features, write_features
from .pipeline import (
    ExtractionConfig,
    FeatureSequence,
    SegmentPlan,
    extract_features,
    frames_for,
    pad_to_multiple,
    resolution_of,
    segment_and_stitch,
    segment_plan,
    stitch_boundary_error,
    tokenize,
)

__all__ = [
    "cache_path", "read_features", "write_features", "ExtractionConfig",
    "FeatureSequence", "SegmentPlan", "extract_features", "frames_for",
    "pad_to_multiple", "resolution_of", "segment_and_stitch", "segment_plan",
    "stitch_boundary_error", "tokenize",
]
