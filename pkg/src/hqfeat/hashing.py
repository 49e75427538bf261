"""Deterministic content hashes for configs, audio, and datasets."""

from __future__ import annotations

import hashlib
import json

import numpy as np


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()[:16]


def array_hash(*arrays: np.ndarray) -> str:
    h = hashlib.sha256()
    for a in arrays:
        a = np.ascontiguousarray(a)
        h.update(str(a.dtype).encode())
        h.update(str(a.shape).encode())
        h.update(a.tobytes())
    return h.hexdigest()[:16]


def audio_hash(samples: np.ndarray, sample_rate: int) -> str:
    h = hashlib.sha256()
    h.update(str(sample_rate).encode())
    h.update(np.ascontiguousarray(samples, dtype=np.float64).tobytes())
    return h.hexdigest()[:16]
