"""Task-agnostic feature extraction.

Audio is tokenized with the frozen stage-1 encoder, the priors run once in
teacher-forced mode (no autoregressive iteration), and the residual-stream
output of the tap layer becomes the feature sequence, one row per token.

Long inputs are processed as overlapping segments. For overlapped frames the
kept version is the one computed with the longest left context (each output
frame comes from the earliest segment that contains it), which makes the
result independent of segment processing order and, when the overlap covers
the model's receptive field, independent of the segmentation itself.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..audio import AudioBuffer
from ..ndgrad import ContractError, Tensor
from ..priors import ConditioningEmbedding, PriorModel, stub_conditioning
from ..priors.train import RATIO_TO_UPPER, UPPER_LEVELS
from ..sqvae2 import LEVEL_BY_NAME, LEVEL_NAMES, Sqvae2
from ..tokens import HierTokens

CONDITIONING_MODES = ("unconditional", "conditional")


@dataclass
class FeatureSequence:
    level: int
    tap_layer: int
    frame_rate: tuple[int, int]  # tokens per sample, as (num, den)
    data: np.ndarray  # (frames, width) float64
    conditioning: str = "unconditional"

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.conditioning not in CONDITIONING_MODES:
            raise ContractError(f"conditioning must be one of {CONDITIONING_MODES}")

    @property
    def frames(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def level_name(self) -> str:
        return LEVEL_NAMES[self.level]


@dataclass
class ExtractionConfig:
    levels: tuple = ("top", "middle")
    overlap: float = 0.5  # fraction of the context window shared by neighbors
    conditional: bool = False

    def __post_init__(self):
        if not 0.0 <= self.overlap < 1.0:
            raise ContractError(f"overlap {self.overlap} outside [0, 1)")
        self.levels = tuple(self.levels)
        for name in self.levels:
            if name not in LEVEL_BY_NAME:
                raise ContractError(f"unknown level {name!r}")

    @property
    def level_ids(self) -> tuple:
        return tuple(LEVEL_BY_NAME[n] for n in self.levels)

    def to_dict(self) -> dict:
        return {"levels": list(self.levels), "overlap": self.overlap,
                "conditional": self.conditional}


def pad_to_multiple(x: np.ndarray, multiple: int) -> np.ndarray:
    rem = len(x) % multiple
    if rem == 0:
        return x
    return np.concatenate([x, np.zeros(multiple - rem)])


def tokenize(audio: AudioBuffer, stage1: Sqvae2) -> HierTokens:
    """Deterministic-mode token streams at the 1:4:16 rate hierarchy."""
    mono = audio.mono()
    if mono.size == 0:
        raise ContractError("cannot tokenize empty audio")
    rates = stage1.cfg.rates
    padded = pad_to_multiple(mono, rates[1])
    streams = stage1.tokenize(padded[None, :])
    return HierTokens(
        {l: s[0] for l, s in streams.items()}, dict(rates), original_length=mono.size
    )


def _conditioning_vector(audio: AudioBuffer, cfg: ExtractionConfig,
                         provider=stub_conditioning):
    return provider(audio) if cfg.conditional else None


def frames_for(original_length: int, rate: int) -> int:
    return -(-original_length // rate)  # ceil


def _teacher_forced_tap(prior: PriorModel, window: np.ndarray,
                        upper: list[np.ndarray] | None, cond) -> np.ndarray:
    x = prior.build_input_sequence(window[None, :], cond, upper)
    return prior.tap_activations(x).value[0]


def extract_features(audio: AudioBuffer, stage1: Sqvae2, priors: dict[int, PriorModel],
                     cfg: ExtractionConfig, tokens: HierTokens | None = None,
                     cond=None) -> dict[int, FeatureSequence]:
    """Single-window extraction; inputs must fit the priors' context."""
    tokens = tokens if tokens is not None else tokenize(audio, stage1)
    if cond is None:
        cond = _conditioning_vector(audio, cfg)
    out = {}
    for level in cfg.level_ids:
        prior = priors[level]
        stream = tokens.streams[level]
        if len(stream) > prior.cfg.context_length:
            raise ContractError(
                f"level {level}: {len(stream)} tokens exceed context "
                f"{prior.cfg.context_length}; use segment_and_stitch"
            )
        upper = [tokens.streams[u][None, :] for u in UPPER_LEVELS[level]] or None
        tap = _teacher_forced_tap(prior, stream, upper, cond)
        keep = frames_for(tokens.original_length or len(stream) * tokens.rates[level],
                          tokens.rates[level])
        out[level] = FeatureSequence(
            level, prior.cfg.tap_layer, (1, tokens.rates[level]), tap[:keep],
            "conditional" if cond is not None else "unconditional",
        )
    return out


@dataclass
class SegmentPlan:
    start: int
    end: int
    keep_start: int  # global frame indices this segment contributes
    keep_end: int


def segment_plan(n_frames: int, window: int, hop: int) -> list[SegmentPlan]:
    """Deepest-left-context keep rule: each frame comes from the earliest
    segment containing it, so segment i contributes (end_{i-1}, end_i]."""
    plans = []
    start = 0
    prev_end = 0
    while True:
        end = min(start + window, n_frames)
        plans.append(SegmentPlan(start, end, prev_end, end))
        prev_end = end
        if end >= n_frames:
            break
        start += hop
    covered = [(p.keep_start, p.keep_end) for p in plans]
    assert covered[0][0] == 0 and covered[-1][1] == n_frames
    assert all(a[1] == b[0] for a, b in zip(covered, covered[1:])), "gap or overlap in plan"
    return plans


def _aligned_hop(window: int, overlap: float, align: int) -> int:
    hop = max(1, int(round(window * (1.0 - overlap))))
    hop = (hop // align) * align
    return max(hop, align)


def segment_and_stitch(audio: AudioBuffer, stage1: Sqvae2, priors: dict[int, PriorModel],
                       cfg: ExtractionConfig, workers: int = 1,
                       tokens: HierTokens | None = None) -> dict[int, FeatureSequence]:
    """Overlapping-segment extraction for inputs of any length."""
    tokens = tokens if tokens is not None else tokenize(audio, stage1)
    cond = _conditioning_vector(audio, cfg)
    out = {}
    for level in cfg.level_ids:
        prior = priors[level]
        stream = tokens.streams[level]
        window = prior.cfg.context_length
        if len(stream) <= window:
            out[level] = extract_features(
                audio, stage1, priors,
                ExtractionConfig((LEVEL_NAMES[level],), cfg.overlap, cfg.conditional),
                tokens=tokens, cond=cond,
            )[level]
            continue
        uppers = UPPER_LEVELS[level]
        align = max([RATIO_TO_UPPER[level][u] for u in uppers], default=1)
        hop = _aligned_hop(window, cfg.overlap, align)
        plans = segment_plan(len(stream), window, hop)

        def run(plan: SegmentPlan, level=level, prior=prior, stream=stream):
            seg = stream[plan.start : plan.end]
            upper = [
                tokens.streams[u][None, plan.start // RATIO_TO_UPPER[level][u] :
                                  plan.end // RATIO_TO_UPPER[level][u]]
                for u in uppers
            ] or None
            tap = _teacher_forced_tap(prior, seg, upper, cond)
            return tap[plan.keep_start - plan.start : plan.keep_end - plan.start]

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                pieces = list(pool.map(run, plans))
        else:
            pieces = [run(p) for p in plans]
        data = np.concatenate(pieces, axis=0)
        assert data.shape[0] == len(stream), "stitched frame count mismatch"
        keep = frames_for(tokens.original_length or len(stream) * tokens.rates[level],
                          tokens.rates[level])
        out[level] = FeatureSequence(
            level, prior.cfg.tap_layer, (1, tokens.rates[level]), data[:keep],
            "conditional" if cond is not None else "unconditional",
        )
    return out


def stitch_boundary_error(audio: AudioBuffer, stage1: Sqvae2,
                          priors: dict[int, PriorModel], cfg: ExtractionConfig,
                          overlaps: tuple = (0.5, 0.75)) -> dict[int, float]:
    """Residual disagreement between two segmentations (validation mode)."""
    runs = [
        segment_and_stitch(audio, stage1, priors,
                           ExtractionConfig(cfg.levels, o, cfg.conditional))
        for o in overlaps
    ]
    return {
        level: float(np.abs(runs[0][level].data - runs[1][level].data).max())
        for level in runs[0]
    }


def resolution_of(level, stage1_cfg, context_length: int) -> tuple[int, float]:
    """(samples per token, seconds one context window spans)."""
    if isinstance(level, str):
        level = LEVEL_BY_NAME[level]
    rate = stage1_cfg.rates[level]
    return rate, context_length * rate / stage1_cfg.sample_rate
