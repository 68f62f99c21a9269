"""Fixed binary glyphs used by the synthetic generators."""
from __future__ import annotations

from functools import lru_cache
from importlib import resources

import numpy as np

SHAPE_SIZE = 11
CORNER_SIZE = 5


def _outline(filled: np.ndarray) -> np.ndarray:
    """Pixels of ``filled`` that touch the outside (4-neighbourhood)."""
    padded = np.pad(filled, 1)
    interior = (
        padded[1:-1, 1:-1]
        & padded[:-2, 1:-1]
        & padded[2:, 1:-1]
        & padded[1:-1, :-2]
        & padded[1:-1, 2:]
    )
    return (filled & ~interior).astype(np.uint8)


@lru_cache(maxsize=None)
def _shape_stencils() -> tuple[np.ndarray, ...]:
    s = SHAPE_SIZE
    square = np.ones((s, s), dtype=bool)
    rows, cols = np.mgrid[0:s, 0:s]
    half = (s - 1) / 2
    # apex at row 0, base on the last row
    up = np.abs(cols - half) <= rows / 2 + 0.5
    down = up[::-1]
    out = tuple(_outline(m) for m in (square, up, down))
    for a in out:
        a.setflags(write=False)
    return out


def shape_stencil(kind: int) -> np.ndarray:
    """Outline of square (0), upward triangle (1) or downward triangle (2)."""
    return _shape_stencils()[kind]


N_SHAPES = 3


@lru_cache(maxsize=None)
def _corner_stencils() -> tuple[np.ndarray, ...]:
    c = CORNER_SIZE
    top_left = np.zeros((c, c), dtype=np.uint8)
    top_left[0, :] = 1
    top_left[:, 0] = 1
    # order: top-left, top-right, bottom-left, bottom-right
    out = (top_left, top_left[:, ::-1].copy(), top_left[::-1, :].copy(), top_left[::-1, ::-1].copy())
    for a in out:
        a.setflags(write=False)
    return out


def corner_stencil(orientation: int) -> np.ndarray:
    """5x5 L-glyph whose elbow sits at the given corner of its box (0=TL, 1=TR, 2=BL, 3=BR)."""
    return _corner_stencils()[orientation]


def parse_patterns(text: str) -> np.ndarray:
    """Parse '#'/'.' pattern blocks separated by blank lines into a (P, H, W) array."""
    blocks, cur = [], []
    for line in text.splitlines():
        line = line.strip()
        if line.startswith("#") and set(line) - {"#", "."}:
            continue  # comment
        if not line:
            if cur:
                blocks.append(cur)
                cur = []
            continue
        if set(line) - {"#", "."}:
            raise ValueError(f"bad pattern row {line!r}")
        cur.append([ch == "#" for ch in line])
    if cur:
        blocks.append(cur)
    if not blocks:
        raise ValueError("no patterns found")
    arr = np.array(blocks, dtype=np.uint8)
    if arr.ndim != 3:
        raise ValueError("patterns must all share one size")
    return arr


@lru_cache(maxsize=None)
def default_pattern_bank() -> np.ndarray:
    text = resources.files("rcbind.datasets").joinpath("data/superposition_patterns.txt").read_text()
    bank = parse_patterns(text)
    bank.setflags(write=False)
    return bank
