"""FTNS binary tensor files.

Layout: magic ``FTNS``, u8 version (1), u8 dtype (0 = f32, 1 = f64),
u16 rank, ``rank`` u32 extents, then the little-endian row-major payload.
"""

from __future__ import annotations

import os
import struct

import numpy as np

MAGIC = b"FTNS"
VERSION = 1
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_CODES = {np.dtype("float32"): 0, np.dtype("float64"): 1}


class FormatError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


def encode(arr) -> bytes:
    arr = np.asarray(arr)
    if arr.dtype not in _CODES:
        if arr.dtype.kind in "iub":
            arr = arr.astype(np.float64)
        else:
            raise TypeError(f"FTNS stores float32/float64 only, got {arr.dtype}")
    code = _CODES[arr.dtype]
    header = MAGIC + struct.pack("<BBH", VERSION, code, arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    return header + np.ascontiguousarray(arr, dtype=_DTYPES[code]).tobytes()


def decode(buf: bytes, dtype=None, allow_narrowing: bool = False) -> np.ndarray:
    """Parse an FTNS buffer.

    ``dtype=np.float32`` on an f64 payload narrows with round-to-nearest,
    but only when ``allow_narrowing`` is set; otherwise it is an error.
    """
    if len(buf) < 8:
        raise FormatError("truncated header", len(buf))
    if buf[:4] != MAGIC:
        raise FormatError(f"bad magic {buf[:4]!r}", 0)
    version, code, rank = struct.unpack_from("<BBH", buf, 4)
    if version != VERSION:
        raise FormatError(f"unsupported version {version}", 4)
    if code not in _DTYPES:
        raise FormatError(f"unknown dtype code {code}", 5)
    end_shape = 8 + 4 * rank
    if len(buf) < end_shape:
        raise FormatError("truncated shape block", len(buf))
    shape = struct.unpack_from(f"<{rank}I", buf, 8)
    stored = _DTYPES[code]
    count = int(np.prod(shape, dtype=np.int64)) if rank else 1
    expected = end_shape + count * stored.itemsize
    if len(buf) != expected:
        raise FormatError(f"payload size {len(buf) - end_shape} != expected {count * stored.itemsize}", end_shape)
    arr = np.frombuffer(buf, dtype=stored, count=count, offset=end_shape).reshape(shape)
    arr = arr.astype(stored.newbyteorder("="), copy=True)
    if dtype is not None:
        want = np.dtype(dtype)
        if want.itemsize < arr.dtype.itemsize and not allow_narrowing:
            raise TypeError(f"reading {arr.dtype} as {want} narrows precision; pass allow_narrowing=True")
        arr = arr.astype(want)
    return arr


def write_tensor(path: str | os.PathLike, arr) -> None:
    with open(path, "wb") as f:
        f.write(encode(arr))


def read_tensor(path: str | os.PathLike, dtype=None, allow_narrowing: bool = False) -> np.ndarray:
    with open(path, "rb") as f:
        return decode(f.read(), dtype=dtype, allow_narrowing=allow_narrowing)
