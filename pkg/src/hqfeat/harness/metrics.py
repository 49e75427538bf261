"""Evaluation metrics with oracle-friendly definitions.

Degenerate inputs (single-class labels, empty reference sets) return None,
the "undefined" marker; callers decide how to aggregate, and NaN never
propagates out of this module.
"""

from __future__ import annotations

import numpy as np

from .dsp import hann

SDR_CAP_DB = 80.0
EPS = 1e-12


# -- ranking metrics -----------------------------------------------------------


def _average_ranks(scores: np.ndarray) -> np.ndarray:
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(len(scores))
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0  # 1-based mid-rank
        i = j + 1
    return ranks


def roc_auc(scores, labels) -> float | None:
    """Rank statistic; ties count half. None when labels are one class."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = _average_ranks(scores)
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def average_precision(scores, labels) -> float | None:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    n_pos = int(labels.sum())
    if n_pos == 0 or n_pos == len(labels):
        return None
    order = np.argsort(-scores, kind="stable")
    rel = labels[order]
    precision = np.cumsum(rel) / (np.arange(len(rel)) + 1)
    return float((precision * rel).sum() / n_pos)


def _mean_defined(values: list) -> float | None:
    vals = [v for v in values if v is not None]
    return float(np.mean(vals)) if vals else None


def multilabel_roc_auc(scores: np.ndarray, labels: np.ndarray) -> float | None:
    """Macro mean over classes, skipping degenerate columns."""
    return _mean_defined([roc_auc(scores[:, c], labels[:, c]) for c in range(scores.shape[1])])


def mean_average_precision(scores: np.ndarray, labels: np.ndarray) -> float | None:
    return _mean_defined(
        [average_precision(scores[:, c], labels[:, c]) for c in range(scores.shape[1])]
    )


# -- transcription metrics -------------------------------------------------------


def frame_f1(pred_probs: np.ndarray, targets: np.ndarray, threshold: float = 0.5) -> float | None:
    targets = np.asarray(targets).astype(bool)
    if targets.all() or not targets.any():
        return None
    pred = np.asarray(pred_probs) >= threshold
    tp = int((pred & targets).sum())
    fp = int((pred & ~targets).sum())
    fn = int((~pred & targets).sum())
    if 2 * tp + fp + fn == 0:
        return None
    return 2.0 * tp / (2 * tp + fp + fn)


def onset_peaks(pred_probs: np.ndarray, threshold: float = 0.5) -> list[tuple[int, int]]:
    """(pitch, frame) local maxima of the onset activation above threshold."""
    events = []
    n_frames, n_pitches = pred_probs.shape
    for p in range(n_pitches):
        col = pred_probs[:, p]
        for t in range(n_frames):
            if col[t] < threshold:
                continue
            left = col[t - 1] if t > 0 else -np.inf
            right = col[t + 1] if t + 1 < n_frames else -np.inf
            if col[t] >= left and col[t] > right:
                events.append((p, t))
    return events


def note_match_counts(pred_probs: np.ndarray, true_events: list[tuple[int, int]],
                      tolerance: int = 2, threshold: float = 0.5) -> tuple[int, int, int]:
    """Greedy onset matching within +-tolerance frames, same pitch.

    Returns (tp, fp, fn) so callers can accumulate across clips.
    """
    pred_events = onset_peaks(pred_probs, threshold)
    unmatched = sorted(true_events, key=lambda e: (e[0], e[1]))
    tp = 0
    for pitch, frame in sorted(pred_events, key=lambda e: (e[0], e[1])):
        best = None
        for i, (t_pitch, t_frame) in enumerate(unmatched):
            if t_pitch == pitch and abs(t_frame - frame) <= tolerance:
                if best is None or abs(t_frame - frame) < abs(unmatched[best][1] - frame):
                    best = i
        if best is not None:
            unmatched.pop(best)
            tp += 1
    return tp, len(pred_events) - tp, len(true_events) - tp


def f1_from_counts(tp: int, fp: int, fn: int) -> float | None:
    if 2 * tp + fp + fn == 0:
        return None
    return 2.0 * tp / (2 * tp + fp + fn)


def note_f1(pred_probs: np.ndarray, true_events: list[tuple[int, int]],
            tolerance: int = 2, threshold: float = 0.5) -> float | None:
    """Onset-grouped note matching within +-tolerance frames, same pitch."""
    if not true_events:
        return None
    return f1_from_counts(*note_match_counts(pred_probs, true_events, tolerance, threshold))


# -- separation ------------------------------------------------------------------


def sdr(target: np.ndarray, estimate: np.ndarray, cap_db: float = SDR_CAP_DB) -> float:
    """10*log10(||target||^2 / ||target-estimate||^2), capped at +cap_db."""
    target = np.asarray(target, dtype=np.float64)
    err = target - np.asarray(estimate, dtype=np.float64)
    num = float((target**2).sum())
    den = float((err**2).sum())
    if den <= num * 10.0 ** (-cap_db / 10.0):
        return cap_db
    return float(10.0 * np.log10(num / max(den, EPS)))


# -- mixing audio features ---------------------------------------------------------


def _windows(n: int, win: int, hop: int):
    t = 0
    while t + win <= n:
        yield t, t + win
        t += hop


def mixing_features(x: np.ndarray, sample_rate: int, win_seconds: float = 0.5) -> dict:
    """Low-level audio feature series over running windows.

    x is stereo (T, 2). Every feature is one value per window; loudness is
    an RMS-based proxy, not a gated broadcast-loudness measure.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = np.stack([x, x], axis=1)
    win = max(16, int(round(win_seconds * sample_rate)))
    hop = max(1, win // 2)
    mono = x.mean(axis=1)
    taper = hann(win)
    freqs = np.fft.rfftfreq(win, 1.0 / sample_rate)
    low = freqs <= sample_rate / 16.0
    mid = (freqs > sample_rate / 16.0) & (freqs <= sample_rate / 4.0)
    high = freqs > sample_rate / 4.0
    series: dict[str, list] = {k: [] for k in (
        "centroid", "bandwidth", "rolloff", "flatness",
        "panning_total", "panning_low", "panning_mid", "panning_high",
        "rms", "crest", "loudness",
    )}
    for lo, hi in _windows(len(mono), win, hop):
        seg = mono[lo:hi]
        mag = np.abs(np.fft.rfft(seg * taper))
        power = mag**2
        total = mag.sum() + EPS
        centroid = float((freqs * mag).sum() / total)
        series["centroid"].append(centroid)
        series["bandwidth"].append(float(np.sqrt(((freqs - centroid) ** 2 * mag).sum() / total)))
        cum = np.cumsum(power)
        series["rolloff"].append(float(freqs[int(np.searchsorted(cum, 0.85 * cum[-1]))]))
        series["flatness"].append(
            float(np.exp(np.mean(np.log(power + EPS))) / (power.mean() + EPS))
        )
        L = np.abs(np.fft.rfft(x[lo:hi, 0] * taper)) ** 2
        R = np.abs(np.fft.rfft(x[lo:hi, 1] * taper)) ** 2
        pan = (L - R) / (L + R + EPS)
        series["panning_total"].append(float(np.sqrt((pan**2).mean())))
        for name, band in (("panning_low", low), ("panning_mid", mid), ("panning_high", high)):
            series[name].append(float(np.sqrt((pan[band] ** 2).mean())) if band.any() else 0.0)
        rms = float(np.sqrt((seg**2).mean()))
        series["rms"].append(rms)
        series["crest"].append(float(np.abs(seg).max() / max(rms, EPS)))
        series["loudness"].append(float(10.0 * np.log10((x[lo:hi] ** 2).mean() + EPS)))
    return {k: np.asarray(v) for k, v in series.items()}


def mape(pred: np.ndarray, target: np.ndarray, eps: float = 1e-8) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    return float(np.mean(np.abs(pred - target) / np.maximum(np.abs(target), eps)))


MIX_FEATURE_GROUPS = {
    "spectral": ("centroid", "bandwidth", "rolloff", "flatness"),
    "panning": ("panning_total", "panning_low", "panning_mid", "panning_high"),
    "dynamic": ("rms", "crest"),
    "loudness": ("loudness",),
}


def mixing_feature_mape(pred: np.ndarray, target: np.ndarray, sample_rate: int) -> dict:
    """Per-group mean absolute percentage error between feature series."""
    fp = mixing_features(pred, sample_rate)
    ft = mixing_features(target, sample_rate)
    per_feature = {k: mape(fp[k], ft[k]) for k in fp}
    groups = {
        g: float(np.mean([per_feature[k] for k in keys]))
        for g, keys in MIX_FEATURE_GROUPS.items()
    }
    groups["per_feature"] = per_feature
    groups["average"] = float(np.mean([groups[g] for g in MIX_FEATURE_GROUPS]))
    return groups
