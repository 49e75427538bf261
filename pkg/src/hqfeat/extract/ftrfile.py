"""FTR1 feature-file container plus the extraction cache.

FTR1 layout (little-endian):

    magic   4s   b"FTR1"
    version u32  1
    level   u8
    tap     u16
    rate    u32/u32   tokens per sample as numerator/denominator
    frames  u64
    width   u32
    data    f32 * frames * width, row-major

A JSON sidecar (same path + ".json") records the audio hash, config hash,
and conditioning mode. File round trips are bit-exact (values are stored as
float32; reading and re-writing reproduces the bytes).
"""

from __future__ import annotations

import json
import os
import struct

import numpy as np

from ..hashing import canonical_json
from .pipeline import FeatureSequence

MAGIC = b"FTR1"
VERSION = 1


def write_features(path, seq: FeatureSequence, audio_hash: str = "",
                   config_hash: str = ""):
    data = seq.data.astype("<f4")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IBHIIQI", VERSION, seq.level, seq.tap_layer,
                             seq.frame_rate[0], seq.frame_rate[1],
                             data.shape[0], data.shape[1]))
        fh.write(data.tobytes())
    sidecar = {
        "audio_hash": audio_hash,
        "config_hash": config_hash,
        "conditioning": seq.conditioning,
        "level": seq.level,
    }
    with open(str(path) + ".json", "w") as fh:
        fh.write(canonical_json(sidecar))


def read_features(path) -> tuple[FeatureSequence, dict]:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != MAGIC:
        raise ValueError(f"{path}: not an FTR1 file")
    version, level, tap, num, den, frames, width = struct.unpack("<IBHIIQI", data[4:31])
    if version != VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    arr = np.frombuffer(data, dtype="<f4", count=frames * width, offset=31)
    sidecar = {}
    sidecar_path = str(path) + ".json"
    if os.path.exists(sidecar_path):
        with open(sidecar_path) as fh:
            sidecar = json.load(fh)
    seq = FeatureSequence(level, tap, (num, den),
                          arr.reshape(frames, width).astype(np.float64),
                          sidecar.get("conditioning", "unconditional"))
    return seq, sidecar


def cache_path(cache_dir, audio_hash: str, config_hash: str, level: int) -> str:
    return os.path.join(cache_dir, f"{audio_hash}-{config_hash}-l{level}.ftr")
