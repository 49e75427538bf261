"""Seeded synthetic downstream tasks.

Every dataset is a pure function of its spec: prototype definitions and the
train/val/test clips come from independent child streams of one seed
sequence, so splits are disjoint by construction and a spec hash pins the
whole dataset.

Tasks:
  tagging       clips mix labeled spectral prototypes; labels are presence
                (multi-label) or the dominant prototype (single-label)
  transcription clips are sums of decaying sinusoid notes; targets are frame
                and onset piano rolls, onsets sharpened over J frames
  separation    clips are sums of four gated synthetic stems
  mixing        inputs are level-normalized stems, the target is a stereo
                mix with per-stem gain, pan, and one-pole tilt EQ
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..hashing import array_hash, config_hash
from ..ndgrad import ContractError

TASK_KINDS = ("tagging", "transcription", "separation", "mixing")
SPLITS = ("foundation", "train", "val", "test")

DEFAULT_PARAMS = {
    "tagging": {
        "n_protos": 6,
        "presence": 0.4,
        "noise": 0.02,
        "tones_per_proto": 3,
        "freq_lo": 60.0,
        "freq_hi": 900.0,
    },
    "transcription": {
        "n_base_freqs": 4,
        "frame_hop": 128,
        "onset_sharpness": 3,
        "min_events": 2,
        "max_events": 6,
        "decay": 0.5,  # seconds
        "min_dur_frames": 4,
        "max_dur_frames": 10,
        "freq_lo": 150.0,
        "freq_hi": 580.0,
        "gate_rate": 4.0,  # Hz; the slow tremolo that marks the gated classes
        "gate_duty": 0.5,
        "gated_event_fraction": 0.7,  # share of events drawn from gated classes
        "noise": 0.01,
    },
    "separation": {
        "n_stems": 4,
        "tones_per_stem": 2,
        "noise": 0.005,
    },
    "mixing": {
        "n_stems": 4,
        "gain_lo": 0.4,
        "gain_hi": 1.2,
        "pan_limit": 0.8,
    },
}


@dataclass
class SyntheticTaskSpec:
    kind: str
    seed: int = 0
    clip_samples: int = 2048
    sample_rate: int = 4410
    n_foundation: int = 96  # unlabeled corpus for the upstream models
    n_train: int = 32
    n_val: int = 8
    n_test: int = 12
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in TASK_KINDS:
            raise ContractError(f"unknown task kind {self.kind!r}")
        merged = dict(DEFAULT_PARAMS[self.kind])
        merged.update(self.params)
        self.params = merged

    def to_dict(self) -> dict:
        return {
            "kind": self.kind, "seed": self.seed, "clip_samples": self.clip_samples,
            "sample_rate": self.sample_rate, "n_foundation": self.n_foundation,
            "n_train": self.n_train, "n_val": self.n_val, "n_test": self.n_test,
            "params": self.params,
        }

    def hash(self) -> str:
        return config_hash(self.to_dict())


@dataclass
class TaskDataset:
    spec: SyntheticTaskSpec
    splits: dict  # split name -> dict of arrays
    meta: dict = field(default_factory=dict)

    def hash(self) -> str:
        arrays = []
        for split in SPLITS:
            for key in sorted(self.splits[split]):
                val = self.splits[split][key]
                if isinstance(val, np.ndarray):
                    arrays.append(val)
        return array_hash(*arrays)

    def clips(self, split: str) -> np.ndarray:
        return self.splits[split]["clips"]


def _child_rngs(spec: SyntheticTaskSpec, n: int) -> list[np.random.Generator]:
    ss = np.random.SeedSequence([spec.seed, TASK_KINDS.index(spec.kind)])
    return [np.random.default_rng(c) for c in ss.spawn(n)]


def _split_sizes(spec: SyntheticTaskSpec) -> dict[str, int]:
    return {"foundation": spec.n_foundation, "train": spec.n_train,
            "val": spec.n_val, "test": spec.n_test}


# -- tagging -------------------------------------------------------------------


def _tagging_prototypes(spec: SyntheticTaskSpec, rng) -> list[dict]:
    p = spec.params
    protos = []
    bands = np.geomspace(p["freq_lo"], p["freq_hi"], p["n_protos"] + 1)
    for i in range(p["n_protos"]):
        freqs = rng.uniform(bands[i], bands[i + 1], size=p["tones_per_proto"])
        protos.append({
            "freqs": freqs,
            "env_rate": rng.uniform(0.5, 6.0),  # Hz amplitude modulation
            "env_depth": rng.uniform(0.2, 0.9),
        })
    return protos


def _render_prototype(proto: dict, t: np.ndarray, phase_rng) -> np.ndarray:
    wave = np.zeros_like(t)
    for f in proto["freqs"]:
        wave += np.sin(2 * np.pi * f * t + phase_rng.uniform(0, 2 * np.pi))
    env = 1.0 - proto["env_depth"] * 0.5 * (
        1.0 + np.sin(2 * np.pi * proto["env_rate"] * t + phase_rng.uniform(0, 2 * np.pi))
    )
    return wave * env / len(proto["freqs"])


def _gen_tagging(spec: SyntheticTaskSpec) -> TaskDataset:
    proto_rng, *split_rngs = _child_rngs(spec, 5)
    protos = _tagging_prototypes(spec, proto_rng)
    p = spec.params
    t = np.arange(spec.clip_samples) / spec.sample_rate
    splits = {}
    for split, rng, count in zip(SPLITS, split_rngs, _split_sizes(spec).values()):
        clips = np.zeros((count, spec.clip_samples))
        labels = np.zeros((count, p["n_protos"]), dtype=np.int64)
        dominant = np.zeros(count, dtype=np.int64)
        for i in range(count):
            present = rng.random(p["n_protos"]) < p["presence"]
            if not present.any():
                present[rng.integers(p["n_protos"])] = True
            gains = np.where(present, rng.uniform(0.5, 1.0, p["n_protos"]), 0.0)
            wave = np.zeros(spec.clip_samples)
            for j in np.flatnonzero(present):
                wave += gains[j] * _render_prototype(protos[j], t, rng)
            wave += p["noise"] * rng.normal(size=spec.clip_samples)
            clips[i] = wave
            labels[i] = present.astype(np.int64)
            dominant[i] = int(np.argmax(gains))
        splits[split] = {"clips": clips, "labels": labels, "dominant": dominant}
    return TaskDataset(spec, splits, meta={"n_classes": p["n_protos"]})


# -- transcription ---------------------------------------------------------------


def _transcription_classes(spec: SyntheticTaskSpec) -> list[dict]:
    """Note classes: each base frequency in a steady and a slow-gated form.

    The gated variant occupies the same spectral bin as the steady one; only
    temporal context separates them, and only context reveals that a gated
    note is still sounding during its off phase.
    """
    p = spec.params
    freqs = np.linspace(p["freq_lo"], p["freq_hi"], p["n_base_freqs"])
    classes = []
    for f in freqs:
        classes.append({"freq": float(f), "gated": False})
        classes.append({"freq": float(f), "gated": True})
    return classes


def onset_target(events: list[tuple[int, int]], n_frames: int, n_pitches: int,
                 sharpness: int) -> np.ndarray:
    """Triangular ramps of width ``sharpness`` frames around each onset."""
    roll = np.zeros((n_frames, n_pitches))
    for pitch, frame in events:
        for dt in range(-(sharpness - 1), sharpness):
            f = frame + dt
            if 0 <= f < n_frames:
                roll[f, pitch] = max(roll[f, pitch], 1.0 - abs(dt) / sharpness)
    return roll


def _gen_transcription(spec: SyntheticTaskSpec) -> TaskDataset:
    _, *split_rngs = _child_rngs(spec, 5)
    p = spec.params
    classes = _transcription_classes(spec)
    hop = p["frame_hop"]
    n_frames = spec.clip_samples // hop
    tau = p["decay"] * spec.sample_rate
    sr = spec.sample_rate
    splits = {}
    for split, rng, count in zip(SPLITS, split_rngs, _split_sizes(spec).values()):
        clips = np.zeros((count, spec.clip_samples))
        frame_roll = np.zeros((count, n_frames, len(classes)))
        onset_roll = np.zeros((count, n_frames, len(classes)))
        events_all = []
        for i in range(count):
            n_ev = int(rng.integers(p["min_events"], p["max_events"] + 1))
            events = []
            wave = np.zeros(spec.clip_samples)
            for _ in range(n_ev):
                if rng.random() < p["gated_event_fraction"]:
                    cls = int(rng.integers(len(classes) // 2)) * 2 + 1  # gated ids are odd
                else:
                    cls = int(rng.integers(len(classes) // 2)) * 2
                dur_f = int(rng.integers(p["min_dur_frames"], p["max_dur_frames"] + 1))
                onset_f = int(rng.integers(0, max(1, n_frames - dur_f)))
                amp = rng.uniform(0.5, 1.0)
                start = onset_f * hop
                dur = dur_f * hop
                n = np.arange(dur)
                tone = amp * np.exp(-n / tau) * np.sin(
                    2 * np.pi * classes[cls]["freq"] * n / sr
                )
                if classes[cls]["gated"]:
                    phase = rng.uniform(0, 1)
                    gate = ((p["gate_rate"] * n / sr + phase) % 1.0) < p["gate_duty"]
                    tone = tone * np.convolve(gate.astype(float), hann_kernel(33), mode="same")
                wave[start : start + dur] += tone
                frame_roll[i, onset_f : onset_f + dur_f, cls] = 1.0
                events.append((cls, onset_f))
            wave += p["noise"] * rng.normal(size=spec.clip_samples)
            clips[i] = wave
            onset_roll[i] = onset_target(events, n_frames, len(classes), p["onset_sharpness"])
            events_all.append(events)
        splits[split] = {
            "clips": clips, "frame_roll": frame_roll, "onset_roll": onset_roll,
            "events": events_all,
        }
    return TaskDataset(spec, splits, meta={
        "classes": classes, "frame_hop": hop, "n_frames": n_frames,
        "pitches": [c["freq"] for c in classes],
    })


# -- separation ------------------------------------------------------------------


def hann_kernel(n: int) -> np.ndarray:
    k = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n) / (n - 1))
    return k / k.sum()


def _smoothed_gate(t: np.ndarray, rate: float, phase: float, duty: float,
                   invert: bool = False) -> np.ndarray:
    gate = ((rate * t + phase) % 1.0) < duty
    if invert:
        gate = ~gate
    # short cosine edges keep the gating from ringing across all bins
    return np.convolve(gate.astype(float), hann_kernel(33), mode="same")


def _tone_stack(freqs, t: np.ndarray, rng) -> np.ndarray:
    wave = np.zeros_like(t)
    for f in freqs:
        wave += np.sin(2 * np.pi * f * t + rng.uniform(0, 2 * np.pi))
    return wave / len(freqs)


def _gen_separation(spec: SyntheticTaskSpec) -> TaskDataset:
    """Stems 0 and 1 share one band with identical spectra and complementary
    gating (stem 0 owns the longer bursts), so a frame-local magnitude model
    cannot attribute the band's energy; stems 2 and 3 sit in their own bands.
    """
    profile_rng, *split_rngs = _child_rngs(spec, 5)
    p = spec.params
    block = p.get("block", 128)  # analysis frames the gating aligns to
    period = p.get("pair_period_blocks", 10)
    on_blocks = p.get("pair_on_blocks", 6)  # stem 0 owns the longer bursts
    shared_freqs = 300.0 * profile_rng.uniform(0.95, 1.05, size=p["tones_per_stem"])
    other = [
        {"freqs": 120.0 * profile_rng.uniform(0.92, 1.08, size=p["tones_per_stem"]),
         "gate_rate": 2.2, "duty": 0.5},
        {"freqs": 760.0 * profile_rng.uniform(0.92, 1.08, size=p["tones_per_stem"]),
         "gate_rate": 5.5, "duty": 0.6},
    ]
    t = np.arange(spec.clip_samples) / spec.sample_rate
    block_of = np.arange(spec.clip_samples) // block
    splits = {}
    for split, rng, count in zip(SPLITS, split_rngs, _split_sizes(spec).values()):
        stems = np.zeros((count, p["n_stems"], spec.clip_samples))
        for i in range(count):
            tone = _tone_stack(shared_freqs, t, rng)
            phase = int(rng.integers(period))
            gain = rng.uniform(0.6, 1.0)  # shared, so level cannot identify the stem
            on0 = ((block_of + phase) % period) < on_blocks
            stems[i, 0] = gain * tone * on0
            stems[i, 1] = gain * tone * (~on0)
            for s, profile in enumerate(other[: p["n_stems"] - 2], start=2):
                stems[i, s] = rng.uniform(0.5, 1.0) * _tone_stack(
                    profile["freqs"], t, rng
                ) * _smoothed_gate(t, profile["gate_rate"], rng.uniform(0, 1),
                                   profile["duty"])
            stems[i, 0] += p["noise"] * rng.normal(size=spec.clip_samples)
        clips = stems.sum(axis=1)
        splits[split] = {"clips": clips, "stems": stems}
    return TaskDataset(spec, splits, meta={
        "n_stems": p["n_stems"], "target_stem": 0, "block": block,
    })


# -- mixing ----------------------------------------------------------------------


def _one_pole_lowpass(x: np.ndarray, a: float) -> np.ndarray:
    """y[t] = a*y[t-1] + (1-a)*x[t], evaluated as an FIR of matched length."""
    # geometric kernel truncated where it falls below 1e-6
    n = min(len(x), int(np.ceil(np.log(1e-6) / np.log(a))) if a > 0 else 1)
    kernel = (1 - a) * a ** np.arange(n)
    return np.convolve(x, kernel)[: len(x)]


def _gen_mixing(spec: SyntheticTaskSpec) -> TaskDataset:
    sep_spec = SyntheticTaskSpec(
        "separation", spec.seed, spec.clip_samples, spec.sample_rate,
        spec.n_foundation, spec.n_train, spec.n_val, spec.n_test,
    )
    base = _gen_separation(sep_spec)
    p = spec.params
    _, *split_rngs = _child_rngs(spec, 5)
    splits = {}
    for split, rng in zip(SPLITS, split_rngs):
        stems = base.splits[split]["stems"]
        count, n_stems, T = stems.shape
        norm_stems = np.zeros_like(stems)
        targets = np.zeros((count, T, 2))
        mix_params = np.zeros((count, n_stems, 4))  # gain, pan, blend, pole
        for i in range(count):
            for s in range(n_stems):
                rms = np.sqrt((stems[i, s] ** 2).mean()) + 1e-8
                norm_stems[i, s] = stems[i, s] / rms
                gain = rng.uniform(p["gain_lo"], p["gain_hi"])
                pan = rng.uniform(-p["pan_limit"], p["pan_limit"])
                blend = rng.uniform(0.3, 1.0)
                pole = rng.uniform(0.5, 0.9)
                mix_params[i, s] = (gain, pan, blend, pole)
                shaped = blend * norm_stems[i, s] + (1 - blend) * _one_pole_lowpass(
                    norm_stems[i, s], pole
                )
                theta = (pan + 1) * np.pi / 4
                targets[i, :, 0] += gain * np.cos(theta) * shaped
                targets[i, :, 1] += gain * np.sin(theta) * shaped
        splits[split] = {
            "clips": norm_stems.sum(axis=1),  # monaural downmix of the inputs
            "stems": norm_stems,
            "target": targets,
            "mix_params": mix_params,
        }
    return TaskDataset(spec, splits, meta={"n_stems": p["n_stems"]})


GENERATORS = {
    "tagging": _gen_tagging,
    "transcription": _gen_transcription,
    "separation": _gen_separation,
    "mixing": _gen_mixing,
}


def gen_tasks(spec: SyntheticTaskSpec) -> TaskDataset:
    """Build the dataset for a spec; same spec always yields the same data."""
    return GENERATORS[spec.kind](spec)
