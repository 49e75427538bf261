"""Audio buffers and minimal RIFF/WAVE I/O (PCM16 and IEEE float32 only)."""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .ndgrad import ContractError


@dataclass
class AudioBuffer:
    """Mono (T,) or stereo (T, 2) float64 samples plus a sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim not in (1, 2):
            raise ContractError(f"audio must be (T,) or (T, ch), got {self.samples.shape}")
        if self.samples.size == 0:
            raise ContractError("audio buffer is empty")

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def channels(self) -> int:
        return 1 if self.samples.ndim == 1 else self.samples.shape[1]

    def mono(self) -> np.ndarray:
        """Monaural downmix by channel mean."""
        if self.samples.ndim == 1:
            return self.samples
        return self.samples.mean(axis=1)

    def duration(self) -> float:
        return self.n_samples / self.sample_rate


class WavFormatError(ValueError):
    pass


def read_wav(path) -> AudioBuffer:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise WavFormatError(f"{path}: not a RIFF/WAVE file")
    pos = 12
    fmt = None
    payload = None
    while pos + 8 <= len(data):
        cid = data[pos : pos + 4]
        (size,) = struct.unpack("<I", data[pos + 4 : pos + 8])
        body = data[pos + 8 : pos + 8 + size]
        if cid == b"fmt ":
            fmt = struct.unpack("<HHIIHH", body[:16])
        elif cid == b"data":
            payload = body
        pos += 8 + size + (size & 1)  # chunks are word-aligned
    if fmt is None or payload is None:
        raise WavFormatError(f"{path}: missing fmt or data chunk")
    audio_format, channels, rate, _, _, bits = fmt
    if audio_format == 1 and bits == 16:
        x = np.frombuffer(payload, dtype="<i2").astype(np.float64) / 32768.0
    elif audio_format == 3 and bits == 32:
        x = np.frombuffer(payload, dtype="<f4").astype(np.float64)
    else:
        raise WavFormatError(
            f"{path}: unsupported format (code {audio_format}, {bits}-bit); "
            "expected 16-bit PCM or 32-bit float"
        )
    if channels > 1:
        x = x.reshape(-1, channels)
    return AudioBuffer(x, rate)


def write_wav(path, audio: AudioBuffer, fmt: str = "float32"):
    x = audio.samples
    if x.ndim == 1:
        x = x[:, None]
    channels = x.shape[1]
    if fmt == "float32":
        payload = x.astype("<f4").tobytes()
        code, bits = 3, 32
    elif fmt == "pcm16":
        clipped = np.clip(x, -1.0, 1.0 - 1.0 / 32768.0)
        payload = (clipped * 32768.0).round().astype("<i2").tobytes()
        code, bits = 1, 16
    else:
        raise WavFormatError(f"unsupported write format {fmt!r}")
    block = channels * bits // 8
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(payload), b"WAVE", b"fmt ", 16,
        code, channels, audio.sample_rate, audio.sample_rate * block, block, bits,
        b"data", len(payload),
    )
    with open(path, "wb") as fh:
        fh.write(header + payload)
