"""Spectrogram helpers for the toy downstream models and metrics."""

from __future__ import annotations

import numpy as np


def hann(n: int) -> np.ndarray:
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def _window(n: int, kind: str) -> np.ndarray:
    if kind == "hann":
        return hann(n)
    if kind == "rect":
        return np.ones(n)
    raise ValueError(f"unknown window kind {kind!r}")


def stft(x: np.ndarray, window: int = 256, hop: int = 128,
         window_kind: str = "hann") -> np.ndarray:
    """Complex spectrogram (frames, bins); frames start at t*hop."""
    x = np.asarray(x, dtype=np.float64)
    n = (len(x) - window) // hop + 1
    win = _window(window, window_kind)
    idx = np.arange(n)[:, None] * hop + np.arange(window)[None, :]
    return np.fft.rfft(x[idx] * win, axis=1)


def istft(spec: np.ndarray, window: int = 256, hop: int = 128,
          length: int | None = None, window_kind: str = "hann") -> np.ndarray:
    """Weighted overlap-add inverse with squared-window normalization."""
    n, _ = spec.shape
    win = _window(window, window_kind)
    total = (n - 1) * hop + window
    out = np.zeros(total)
    norm = np.zeros(total)
    frames = np.fft.irfft(spec, n=window, axis=1)
    for t in range(n):
        out[t * hop : t * hop + window] += frames[t] * win
        norm[t * hop : t * hop + window] += win**2
    out = out / np.maximum(norm, 1e-8)
    if length is not None:
        out = out[:length] if len(out) >= length else np.pad(out, (0, length - len(out)))
    return out


def magnitude(spec: np.ndarray) -> np.ndarray:
    return np.abs(spec)
