"""Reader and writer for the IDX tensor format used by the MNIST distribution."""
from __future__ import annotations

import gzip
import os
import struct

import numpy as np

# type code -> (numpy dtype, big-endian)
_DTYPES = {
    0x08: np.dtype(">u1"),
    0x09: np.dtype(">i1"),
    0x0B: np.dtype(">i2"),
    0x0C: np.dtype(">i4"),
    0x0D: np.dtype(">f4"),
    0x0E: np.dtype(">f8"),
}
_CODES = {dt.newbyteorder("="): code for code, dt in _DTYPES.items()}


class IdxError(ValueError):
    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


def parse_idx(data: bytes) -> np.ndarray:
    if len(data) < 4:
        raise IdxError("truncated IDX header", len(data))
    zero, code, ndim = struct.unpack_from(">HBB", data, 0)
    if zero != 0 or code not in _DTYPES:
        raise IdxError(f"bad IDX magic 0x{data[:4].hex()}", 0)
    head = 4 + 4 * ndim
    if len(data) < head:
        raise IdxError("truncated IDX dimension table", len(data))
    shape = struct.unpack_from(f">{ndim}I", data, 4)
    dtype = _DTYPES[code]
    need = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
    if len(data) - head < need:
        raise IdxError(f"truncated IDX payload: expected {need} bytes", len(data))
    if len(data) - head > need:
        raise IdxError("trailing bytes after IDX payload", head + need)
    arr = np.frombuffer(data, dtype=dtype, count=need // dtype.itemsize, offset=head)
    return arr.reshape(shape).astype(dtype.newbyteorder("="))


def load_idx(path) -> np.ndarray:
    """Load an IDX file (optionally gzip-compressed) into a native-endian array."""
    path = os.fspath(path)
    opener = gzip.open if path.endswith(".gz") else open
    with opener(path, "rb") as f:
        return parse_idx(f.read())


def dump_idx(arr) -> bytes:
    arr = np.asarray(arr)
    code = _CODES.get(arr.dtype.newbyteorder("="))
    if code is None:
        raise TypeError(f"dtype {arr.dtype} has no IDX type code")
    if arr.ndim > 255:
        raise ValueError("too many dimensions for IDX")
    head = struct.pack(">HBB", 0, code, arr.ndim) + struct.pack(f">{arr.ndim}I", *arr.shape)
    return head + arr.astype(_DTYPES[code]).tobytes()


def write_idx(path, arr) -> None:
    path = os.fspath(path)
    opener = gzip.open if path.endswith(".gz") else open
    with opener(path, "wb") as f:
        f.write(dump_idx(arr))
