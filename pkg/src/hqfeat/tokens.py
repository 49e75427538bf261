"""Hierarchical token streams and the TOK1 container format.

TOK1 layout (all little-endian):

    magic   4s   b"TOK1"
    version u32  1
    levels  u8   number of streams
    per stream:
        rate_num u32, rate_den u32   frame rate as tokens per sample
        length   u64                 token count
        width    u8                  bytes per stored token (always 4)
        tokens   u32 * length

Round trips are bit-exact.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"TOK1"
VERSION = 1


@dataclass
class HierTokens:
    """Aligned integer token sequences; ``rates`` maps level -> samples/token."""

    streams: dict[int, np.ndarray]
    rates: dict[int, int]
    original_length: int | None = None

    def __post_init__(self):
        self.streams = {int(l): np.asarray(s, dtype=np.int64).reshape(-1)
                        for l, s in self.streams.items()}

    def levels(self) -> list[int]:
        return sorted(self.streams)


def write_tokens(path, tokens: HierTokens):
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IB", VERSION, len(tokens.streams)))
        for level in tokens.levels():
            stream = tokens.streams[level]
            rate = tokens.rates[level]
            fh.write(struct.pack("<IIQB", 1, rate, len(stream), 4))
            fh.write(stream.astype("<u4").tobytes())


def read_tokens(path) -> HierTokens:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != MAGIC:
        raise ValueError(f"{path}: not a TOK1 file")
    version, n_levels = struct.unpack("<IB", data[4:9])
    if version != VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    pos = 9
    streams, rates = {}, {}
    for level in range(1, n_levels + 1):
        num, den, length, width = struct.unpack("<IIQB", data[pos : pos + 17])
        pos += 17
        if width != 4:
            raise ValueError(f"{path}: unsupported token width {width}")
        arr = np.frombuffer(data, dtype="<u4", count=length, offset=pos)
        pos += 4 * length
        streams[level] = arr.astype(np.int64)
        rates[level] = den // max(num, 1)
    return HierTokens(streams, rates)
