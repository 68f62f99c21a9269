"""Generators for the six multi-object binary-image benchmarks.

Every generator is a pure function of its :class:`DatasetSpec`: example ``i``
draws from its own stream ``Rng(seed).child(name, split, i)``.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from ..numerics import Rng
from .idx import load_idx
from .stencils import (
    CORNER_SIZE,
    N_SHAPES,
    corner_stencil,
    default_pattern_bank,
    shape_stencil,
)

DATASETS = ("simple_superposition", "shapes", "bars", "corners", "mnist_shape", "multi_mnist")
SPLITS = ("train_single", "train_multi", "validation", "test_multi")

GEOMETRY = {
    "simple_superposition": (10, 10),
    "shapes": (28, 28),
    "bars": (20, 20),
    "corners": (28, 28),
    "mnist_shape": (28, 28),
    "multi_mnist": (48, 48),
}

# number of objects in a multi-object image (bars varies per image)
TRUE_OBJECTS = {
    "simple_superposition": 2,
    "shapes": 3,
    "bars": 12,
    "corners": 5,
    "mnist_shape": 2,
    "multi_mnist": 3,
}

MNIST_FILES = {
    "train": "train-images-idx3-ubyte",
    "test": "t10k-images-idx3-ubyte",
}
MNIST_TRAIN_SIZE = 50_000


@dataclass
class LabeledExample:
    """A binary image with one mask per ground-truth object.

    ``image`` and every row of ``masks`` are flat uint8 vectors of length
    ``width * height`` (row-major).
    """

    image: np.ndarray
    masks: np.ndarray
    width: int
    height: int

    @property
    def n_objects(self) -> int:
        return self.masks.shape[0]

    @property
    def eval_mask(self) -> np.ndarray:
        """Pixels owned by exactly one object."""
        return self.masks.sum(axis=0) == 1

    def labels(self) -> np.ndarray:
        """Ground-truth object index per pixel; -1 for background, -2 for overlap."""
        owners = self.masks.sum(axis=0)
        lab = np.argmax(self.masks, axis=0).astype(np.int64)
        lab[owners == 0] = -1
        lab[owners > 1] = -2
        return lab


@dataclass
class DatasetSpec:
    name: str
    split: str
    count: int
    seed: int = 0
    # generator knobs for rules the benchmark descriptions leave open
    bars_p: float = 0.25
    corners_square_p: float = 0.5
    threshold: float = 0.5
    mnist_dir: str | None = None
    pattern_bank: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.name not in DATASETS:
            raise ValueError(f"unknown dataset {self.name!r}; expected one of {DATASETS}")
        if self.split not in SPLITS:
            raise ValueError(f"unknown split {self.split!r}; expected one of {SPLITS}")
        if self.count < 0:
            raise ValueError("count must be non-negative")

    @property
    def geometry(self) -> tuple[int, int]:
        return GEOMETRY[self.name]

    @property
    def multi(self) -> bool:
        return self.split in ("train_multi", "test_multi")


def _place(canvas_hw, stencil, top, left) -> np.ndarray:
    m = np.zeros(canvas_hw, dtype=np.uint8)
    h, w = stencil.shape
    m[top:top + h, left:left + w] = stencil
    return m


def _random_place(rng: Rng, canvas_hw, stencil) -> np.ndarray:
    H, W = canvas_hw
    h, w = stencil.shape
    top = int(rng.integers(0, H - h + 1))
    left = int(rng.integers(0, W - w + 1))
    return _place(canvas_hw, stencil, top, left)


def _shape_object(rng: Rng, hw, kind=None) -> np.ndarray:
    if kind is None:
        kind = int(rng.integers(N_SHAPES))
    return _random_place(rng, hw, shape_stencil(kind))


def _gen_shapes(rng, spec, hw):
    if spec.multi:
        return [_shape_object(rng, hw, k) for k in range(N_SHAPES)]
    return [_shape_object(rng, hw)]


def bar_masks(hw=(20, 20)) -> np.ndarray:
    """The 12 candidate bars: 6 rows then 6 columns at evenly spaced indices."""
    H, W = hw
    rows = np.round(np.linspace(1, H - 2, 6)).astype(int)
    cols = np.round(np.linspace(1, W - 2, 6)).astype(int)
    out = []
    for r in rows:
        m = np.zeros(hw, dtype=np.uint8)
        m[r, :] = 1
        out.append(m)
    for c in cols:
        m = np.zeros(hw, dtype=np.uint8)
        m[:, c] = 1
        out.append(m)
    return np.stack(out)


def _gen_bars(rng, spec, hw):
    cands = bar_masks(hw)
    if not spec.multi:
        return [cands[int(rng.integers(len(cands)))]]
    while True:
        lit = rng.random(len(cands)) < spec.bars_p
        if lit.any():
            return list(cands[lit])


def _square_of_corners(rng, hw) -> np.ndarray:
    H, W = hw
    c = CORNER_SIZE
    side = int(rng.integers(12, 17))
    top = int(rng.integers(0, H - side + 1))
    left = int(rng.integers(0, W - side + 1))
    m = np.zeros(hw, dtype=np.uint8)
    far_r, far_c = top + side - c, left + side - c
    for o, (r, cc) in enumerate(((top, left), (top, far_c), (far_r, left), (far_r, far_c))):
        m |= _place(hw, corner_stencil(o), r, cc)
    return m


def _free_corner(rng, hw) -> np.ndarray:
    return _random_place(rng, hw, corner_stencil(int(rng.integers(4))))


def _gen_corners(rng, spec, hw):
    if spec.multi:
        return [_square_of_corners(rng, hw)] + [_free_corner(rng, hw) for _ in range(4)]
    if rng.random() < spec.corners_square_p:
        return [_square_of_corners(rng, hw)]
    return [_free_corner(rng, hw)]


def _gen_superposition(rng, spec, hw):
    bank = spec.pattern_bank if spec.pattern_bank is not None else default_pattern_bank()
    if bank.shape[1:] != hw:
        raise ValueError(f"pattern bank has shape {bank.shape[1:]}, expected {hw}")
    if spec.multi:
        i, j = rng.gen.choice(len(bank), size=2, replace=False)
        return [bank[int(i)].astype(np.uint8), bank[int(j)].astype(np.uint8)]
    return [bank[int(rng.integers(len(bank)))].astype(np.uint8)]


def binarize(gray, threshold: float = 0.5) -> np.ndarray:
    """1 where ``gray / 255 > threshold``."""
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    return (np.asarray(gray, dtype=np.float64) / 255.0 > threshold).astype(np.uint8)


def mnist_dir(spec: DatasetSpec) -> Path:
    d = spec.mnist_dir or os.environ.get("RCBIND_MNIST_DIR")
    if not d:
        raise FileNotFoundError(
            f"dataset {spec.name!r} needs MNIST: pass mnist_dir or set RCBIND_MNIST_DIR "
            f"(missing {MNIST_FILES['train']})"
        )
    return Path(d)


@lru_cache(maxsize=4)
def _load_mnist_digits(path: str, threshold: float) -> np.ndarray:
    return binarize(load_idx(path), threshold)


def _mnist_pool(spec: DatasetSpec) -> np.ndarray:
    d = mnist_dir(spec)
    which = "test" if spec.split == "test_multi" else "train"
    for suffix in ("", ".gz"):
        p = d / (MNIST_FILES[which] + suffix)
        if p.exists():
            break
    else:
        raise FileNotFoundError(f"missing MNIST file {d / MNIST_FILES[which]}")
    digits = _load_mnist_digits(str(p), spec.threshold)
    if which == "train":
        digits = digits[MNIST_TRAIN_SIZE:] if spec.split == "validation" else digits[:MNIST_TRAIN_SIZE]
    # blank digits would give empty object masks
    keep = digits.reshape(len(digits), -1).any(axis=1)
    return digits[keep]


def _draw_digit(rng, pool) -> np.ndarray:
    return pool[int(rng.integers(len(pool)))]


def _gen_mnist_shape(rng, spec, hw, pool):
    digit = _draw_digit(rng, pool)
    if digit.shape != hw:
        raise ValueError(f"MNIST digits are {digit.shape}, expected {hw}")
    if spec.multi:
        return [digit.astype(np.uint8), _shape_object(rng, hw)]
    if rng.random() < 0.5:
        return [digit.astype(np.uint8)]
    return [_shape_object(rng, hw)]


def _gen_multi_mnist(rng, spec, hw, pool):
    n = 3 if spec.multi else 1
    return [_random_place(rng, hw, _draw_digit(rng, pool)) for _ in range(n)]


_GENERATORS = {
    "simple_superposition": _gen_superposition,
    "shapes": _gen_shapes,
    "bars": _gen_bars,
    "corners": _gen_corners,
}


def make_example(masks, hw) -> LabeledExample:
    masks = np.stack([np.asarray(m, dtype=np.uint8).reshape(-1) for m in masks])
    image = masks.max(axis=0)
    return LabeledExample(image=image, masks=masks, width=hw[1], height=hw[0])


def generate(spec: DatasetSpec) -> list[LabeledExample]:
    """Generate ``spec.count`` labelled examples; deterministic in ``spec``."""
    W, H = spec.geometry
    hw = (H, W)
    root = Rng(spec.seed).child(spec.name, spec.split)
    if spec.name in ("mnist_shape", "multi_mnist"):
        pool = _mnist_pool(spec)
        gen = _gen_mnist_shape if spec.name == "mnist_shape" else _gen_multi_mnist
        make = lambda rng: gen(rng, spec, hw, pool)  # noqa: E731
    else:
        gen = _GENERATORS[spec.name]
        make = lambda rng: gen(rng, spec, hw)  # noqa: E731
    return [make_example(make(root.child(i)), hw) for i in range(spec.count)]


def stack_images(examples) -> np.ndarray:
    """(count, N) float64 matrix of the examples' images."""
    if not examples:
        raise ValueError("no examples")
    return np.stack([e.image for e in examples]).astype(np.float64)
