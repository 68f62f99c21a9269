"""Binary PGM (P5) and PPM (P6) output for inputs and cluster assignments."""
from __future__ import annotations

import os

import numpy as np

BACKGROUND = (0, 0, 0)

# 12 well-separated colours; enough for one per bar candidate
DEFAULT_PALETTE = (
    (230, 25, 75),
    (60, 180, 75),
    (255, 225, 25),
    (0, 130, 200),
    (245, 130, 48),
    (145, 30, 180),
    (70, 240, 240),
    (240, 50, 230),
    (210, 245, 60),
    (250, 190, 212),
    (0, 128, 128),
    (170, 110, 40),
)


def check_palette(palette, background=BACKGROUND):
    colours = [tuple(int(v) for v in c) for c in palette]
    if len(set(colours)) != len(colours) or tuple(background) in colours:
        raise ValueError("palette colours must be pairwise distinct and differ from the background")
    return colours


def encode_pgm(pixels, width: int, height: int) -> bytes:
    """Grey image from values in [0, 1] (1 renders white)."""
    v = np.asarray(pixels, dtype=np.float64).reshape(height, width)
    data = np.round(np.clip(v, 0.0, 1.0) * 255).astype(np.uint8)
    return f"P5\n{width} {height}\n255\n".encode("ascii") + data.tobytes()


def encode_ppm(rgb) -> bytes:
    rgb = np.asarray(rgb, dtype=np.uint8)
    h, w, _ = rgb.shape
    return f"P6\n{w} {h}\n255\n".encode("ascii") + rgb.tobytes()


def assignment_rgb(gamma, width: int, height: int, palette=DEFAULT_PALETTE, background=BACKGROUND,
                   image=None) -> np.ndarray:
    """Colour each pixel by its argmax cluster, faded toward ``background`` by 1 - max_k gamma.

    If ``image`` is given, unlit pixels are drawn as plain background.
    """
    gamma = np.asarray(gamma, dtype=np.float64)
    K = gamma.shape[-1]
    colours = np.array(check_palette(palette, background), dtype=np.float64)
    if len(colours) < K:
        raise ValueError(f"palette has {len(colours)} colours, need {K}")
    bg = np.asarray(background, dtype=np.float64)
    k = np.argmax(gamma, axis=-1)
    conf = gamma.max(axis=-1)
    rgb = bg + (colours[k] - bg) * np.reshape(conf, (-1, 1))
    if image is not None:
        rgb[np.asarray(image).ravel() <= 0] = bg
    return np.round(rgb).astype(np.uint8).reshape(height, width, 3)


def labels_rgb(labels, width: int, height: int, palette=DEFAULT_PALETTE, background=BACKGROUND,
               overlap=(255, 255, 255)) -> np.ndarray:
    """Ground-truth rendering: label >= 0 coloured, -1 background, -2 overlap."""
    labels = np.asarray(labels).ravel()
    colours = np.array(check_palette(palette, background), dtype=np.uint8)
    out = np.empty((labels.size, 3), dtype=np.uint8)
    out[:] = background
    obj = labels >= 0
    out[obj] = colours[labels[obj] % len(colours)]
    out[labels == -2] = overlap
    return out.reshape(height, width, 3)


def render_assignment(gamma, width, height, path, palette=DEFAULT_PALETTE, background=BACKGROUND, image=None):
    _write(path, encode_ppm(assignment_rgb(gamma, width, height, palette, background, image)))


def render_image(pixels, width, height, path):
    _write(path, encode_pgm(pixels, width, height))


def render_labels(labels, width, height, path, palette=DEFAULT_PALETTE):
    _write(path, encode_ppm(labels_rgb(labels, width, height, palette)))


def _write(path, data: bytes):
    with open(os.fspath(path), "wb") as f:
        f.write(data)


def _tokens(data: bytes, count: int):
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    out, pos = [], 2
    while len(out) < count:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError("truncated PNM header")
        out.append(int(data[start:pos]))
    return out, pos + 1


def parse_pnm(data: bytes):
    """Decode P2/P5 (greyscale, HxW) or P6 (HxWx3); returns ``(array, maxval)``."""
    magic = data[:2]
    if magic not in (b"P2", b"P5", b"P6"):
        raise ValueError(f"unsupported PNM magic {magic!r}")
    (w, h, maxval), pos = _tokens(data, 3)
    if not 0 < maxval < 65536:
        raise ValueError(f"bad maxval {maxval}")
    channels = 3 if magic == b"P6" else 1
    count = w * h * channels
    if magic == b"P2":
        vals = np.array(data[pos - 1:].split(), dtype=np.int64)[:count]
        if vals.size != count:
            raise ValueError("truncated PNM data")
        arr = vals.astype(np.uint16 if maxval > 255 else np.uint8)
    else:
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
        if len(data) - pos < count * dtype.itemsize:
            raise ValueError("truncated PNM data")
        arr = np.frombuffer(data, dtype=dtype, count=count, offset=pos).astype(dtype.newbyteorder("="))
    return arr.reshape((h, w, 3) if channels == 3 else (h, w)), maxval


def read_pnm(path):
    with open(os.fspath(path), "rb") as f:
        return parse_pnm(f.read())


def read_binary_image(path, threshold: float = 0.5):
    """Load a greyscale PNM as a flat {0,1} vector; returns ``(pixels, width, height)``."""
    arr, maxval = read_pnm(path)
    if arr.ndim == 3:
        arr = arr.mean(axis=-1)
    h, w = arr.shape
    return (arr.astype(np.float64).ravel() / maxval > threshold).astype(np.uint8), w, h
