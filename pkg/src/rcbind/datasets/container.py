"""Binary container for labelled datasets (``.rcds``).

Layout, little-endian throughout::

    b"RCDS"  u16 version  u16 name_len  name (utf-8)
    u16 width  u16 height  u32 count
    per example:
        image bits, packed 1 bit/pixel (MSB first), ceil(N/8) bytes
        u8 object count
        object masks, each packed like the image
"""
from __future__ import annotations

import io
import os
import struct

import numpy as np

from .generators import LabeledExample

MAGIC = b"RCDS"
VERSION = 1


class DatasetFormatError(ValueError):
    pass


def _pack(bits: np.ndarray) -> bytes:
    bits = np.asarray(bits)
    if bits.size and (bits.min() < 0 or bits.max() > 1 or not np.all(bits == np.round(bits))):
        raise ValueError("only binary images can be stored")
    return np.packbits(bits.astype(np.uint8)).tobytes()


def dump_dataset(examples, name: str, width: int | None = None, height: int | None = None) -> bytes:
    examples = list(examples)
    if examples:
        width = examples[0].width if width is None else width
        height = examples[0].height if height is None else height
    if width is None or height is None:
        raise ValueError("geometry is required for an empty dataset")
    n = width * height
    raw = name.encode("utf-8")
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<HH", VERSION, len(raw)))
    buf.write(raw)
    buf.write(struct.pack("<HHI", width, height, len(examples)))
    for ex in examples:
        if (ex.width, ex.height) != (width, height) or ex.image.size != n:
            raise ValueError("all examples must share the dataset geometry")
        if ex.n_objects > 255:
            raise ValueError("at most 255 objects per example")
        buf.write(_pack(ex.image))
        buf.write(struct.pack("<B", ex.n_objects))
        for m in ex.masks:
            buf.write(_pack(m))
    return buf.getvalue()


def parse_dataset(data: bytes) -> tuple[str, int, int, list[LabeledExample]]:
    """Return ``(name, width, height, examples)``."""
    view = memoryview(data)
    pos = 0

    def take(k):
        nonlocal pos
        if pos + k > len(view):
            raise DatasetFormatError(f"truncated dataset file at byte {pos} (need {k} more bytes)")
        out = view[pos:pos + k]
        pos += k
        return out

    if bytes(take(4)) != MAGIC:
        raise DatasetFormatError("not a dataset file (bad magic)")
    version, name_len = struct.unpack("<HH", take(4))
    if version != VERSION:
        raise DatasetFormatError(f"unsupported dataset version {version} (expected {VERSION})")
    try:
        name = bytes(take(name_len)).decode("utf-8")
    except UnicodeDecodeError as e:
        raise DatasetFormatError("corrupt dataset name") from e
    width, height, count = struct.unpack("<HHI", take(8))
    n = width * height
    nbytes = (n + 7) // 8

    def unpack():
        return np.unpackbits(np.frombuffer(take(nbytes), dtype=np.uint8), count=n)

    examples = []
    for _ in range(count):
        image = unpack()
        (k,) = struct.unpack("<B", take(1))
        masks = np.stack([unpack() for _ in range(k)]) if k else np.zeros((0, n), np.uint8)
        examples.append(LabeledExample(image=image, masks=masks, width=width, height=height))
    if pos != len(view):
        raise DatasetFormatError(f"{len(view) - pos} trailing bytes after {count} examples")
    return name, width, height, examples


def save_dataset(examples, path, name: str, width=None, height=None) -> None:
    data = dump_dataset(examples, name, width, height)
    with open(os.fspath(path), "wb") as f:
        f.write(data)


def load_dataset(path) -> tuple[str, int, int, list[LabeledExample]]:
    with open(os.fspath(path), "rb") as f:
        return parse_dataset(f.read())
