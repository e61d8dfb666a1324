"""Little-endian binary container primitives shared by the file formats.

All on-disk containers (HFT1, ALD1, HFM1, PCA1, GBT1, CAS1) are built from
these helpers: fixed-width little-endian integers/reals, length-prefixed UTF-8
strings, and raw numpy arrays. Readers raise TruncatedFileError on short
reads; container code is responsible for magic and trailing-byte checks.
"""

from __future__ import annotations

import struct
from typing import BinaryIO

import numpy as np

from .errors import BadMagicError, DimMismatchError, TruncatedFileError


def read_exact(fh: BinaryIO, n: int) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise TruncatedFileError(f"expected {n} bytes, got {len(buf)}")
    return buf


def expect_magic(fh: BinaryIO, magic: bytes) -> None:
    head = fh.read(len(magic))
    if head != magic:
        raise BadMagicError(f"expected magic {magic!r}, found {head!r}")


def expect_eof(fh: BinaryIO) -> None:
    if fh.read(1) != b"":
        raise DimMismatchError("trailing bytes after declared payload")


def write_u8(fh: BinaryIO, v: int) -> None:
    fh.write(struct.pack("<B", v))


def read_u8(fh: BinaryIO) -> int:
    return struct.unpack("<B", read_exact(fh, 1))[0]


def write_u16(fh: BinaryIO, v: int) -> None:
    fh.write(struct.pack("<H", v))


def read_u16(fh: BinaryIO) -> int:
    return struct.unpack("<H", read_exact(fh, 2))[0]


def write_u32(fh: BinaryIO, v: int) -> None:
    fh.write(struct.pack("<I", v))


def read_u32(fh: BinaryIO) -> int:
    return struct.unpack("<I", read_exact(fh, 4))[0]


def write_u64(fh: BinaryIO, v: int) -> None:
    fh.write(struct.pack("<Q", v))


def read_u64(fh: BinaryIO) -> int:
    return struct.unpack("<Q", read_exact(fh, 8))[0]


def write_i64(fh: BinaryIO, v: int) -> None:
    fh.write(struct.pack("<q", v))


def read_i64(fh: BinaryIO) -> int:
    return struct.unpack("<q", read_exact(fh, 8))[0]


def write_f64(fh: BinaryIO, v: float) -> None:
    fh.write(struct.pack("<d", v))


def read_f64(fh: BinaryIO) -> float:
    return struct.unpack("<d", read_exact(fh, 8))[0]


def write_str(fh: BinaryIO, s: str) -> None:
    raw = s.encode("utf-8")
    write_u32(fh, len(raw))
    fh.write(raw)


def read_str(fh: BinaryIO) -> str:
    n = read_u32(fh)
    return read_exact(fh, n).decode("utf-8")


def write_array(fh: BinaryIO, arr: np.ndarray, dtype: str) -> None:
    """Write a numpy array's raw values in C order as little-endian dtype."""
    fh.write(np.ascontiguousarray(arr, dtype=np.dtype(dtype).newbyteorder("<")).tobytes())


def read_array(fh: BinaryIO, count: int, dtype: str) -> np.ndarray:
    dt = np.dtype(dtype).newbyteorder("<")
    raw = read_exact(fh, count * dt.itemsize)
    return np.frombuffer(raw, dtype=dt).astype(np.dtype(dtype), copy=True)
