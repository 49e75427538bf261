"""Single-file checkpoint container.

Layout:

    magic  b"HQCK"
    u32    header length in bytes
    bytes  header: canonical JSON with config, step, seed, and a manifest of
           {name, shape, offset} entries (offsets relative to the blob section)
    bytes  named float64 little-endian parameter blobs, in manifest order

Round trips are bit-exact: values are stored untouched at full precision and
the header is canonical JSON, so saving a loaded checkpoint reproduces the
file byte for byte.
"""

from __future__ import annotations

import struct

import numpy as np

from .hashing import canonical_json

MAGIC = b"HQCK"


def save_checkpoint(path, header: dict, params: dict[str, np.ndarray]):
    manifest = []
    offset = 0
    blobs = []
    for name in params:  # insertion order is the canonical order
        arr = np.ascontiguousarray(params[name], dtype="<f8")
        manifest.append({"name": name, "shape": list(arr.shape), "offset": offset})
        blobs.append(arr.tobytes())
        offset += arr.nbytes
    full = dict(header)
    full["manifest"] = manifest
    head = canonical_json(full).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(head)))
        fh.write(head)
        for b in blobs:
            fh.write(b)


def load_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    import json

    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    (hlen,) = struct.unpack("<I", data[4:8])
    header = json.loads(data[8 : 8 + hlen].decode())
    blob = data[8 + hlen :]
    params = {}
    for entry in header.pop("manifest"):
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=start)
        params[entry["name"]] = arr.reshape(shape).copy()
    return header, params
