"""HFT1 host-tensor container writer.

Layout (little-endian): magic "HFT1"; u16 version = 1; u64 N; u32 m, n, p, q;
N id records (u32 byte length + UTF-8 bytes); N event matrices (m*n float32,
row-major); N message matrices (p*q float32, row-major). This mirrors the
consumer pipeline's reader byte for byte.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"HFT1"


def write_hft1(path, sample_ids, event: np.ndarray, message: np.ndarray) -> None:
    count, m, n = event.shape
    _, p, q = message.shape
    if message.shape[0] != count or count != len(sample_ids):
        raise ValueError("sample counts disagree")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<H", 1))
        fh.write(struct.pack("<Q", count))
        fh.write(struct.pack("<4I", m, n, p, q))
        for sid in sample_ids:
            raw = sid.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
        fh.write(np.ascontiguousarray(event, dtype="<f4").tobytes())
        fh.write(np.ascontiguousarray(message, dtype="<f4").tobytes())
