"""Single-hidden-layer denoising autoencoder trained with plain minibatch SGD.

All arrays are float64. Inputs are batched row-wise: ``x`` has shape
``(batch, N)`` or ``(N,)``.
"""
from __future__ import annotations

import logging
import math
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .numerics import Rng

log = logging.getLogger(__name__)

EPS = 1e-6
ACTIVATIONS = ("relu", "sigmoid", "tanh")
_ACT_TAG = {"relu": 0, "sigmoid": 1, "tanh": 2}
MODEL_MAGIC = b"RCM1"


def sigmoid(z):
    # split by sign so exp never overflows
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _act(name, z):
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "sigmoid":
        return sigmoid(z)
    return np.tanh(z)


def _act_grad(name, z, a):
    """Derivative of the activation given pre-activation ``z`` and output ``a``."""
    if name == "relu":
        return (z > 0).astype(np.float64)
    if name == "sigmoid":
        return a * (1.0 - a)
    return 1.0 - a * a


@dataclass
class DaeModel:
    W1: np.ndarray  # (H, N)
    b1: np.ndarray  # (H,)
    W2: np.ndarray  # (N, H)
    b2: np.ndarray  # (N,)
    activation: str = "relu"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        H, N = self.W1.shape
        if self.b1.shape != (H,) or self.W2.shape != (N, H) or self.b2.shape != (N,):
            raise ValueError(
                f"inconsistent parameter shapes W1{self.W1.shape} b1{self.b1.shape} "
                f"W2{self.W2.shape} b2{self.b2.shape}"
            )

    @classmethod
    def init(cls, n_input: int, n_hidden: int, activation: str = "relu", rng: Rng | None = None):
        """Glorot-uniform weights, zero biases."""
        rng = rng or Rng(0)
        lim = math.sqrt(6.0 / (n_input + n_hidden))
        W1 = (rng.random((n_hidden, n_input)) * 2 - 1) * lim
        W2 = (rng.random((n_input, n_hidden)) * 2 - 1) * lim
        return cls(W1, np.zeros(n_hidden), W2, np.zeros(n_input), activation)

    @property
    def n_input(self) -> int:
        return self.W1.shape[1]

    @property
    def n_hidden(self) -> int:
        return self.W1.shape[0]

    def params(self):
        return {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": self.b2}

    def copy(self) -> "DaeModel":
        return DaeModel(self.W1.copy(), self.b1.copy(), self.W2.copy(), self.b2.copy(), self.activation)

    def reconstruct(self, x):
        return decode(self, encode(self, x))


def _check_len(x, n, what):
    if x.shape[-1] != n:
        raise ValueError(f"{what} has length {x.shape[-1]}, model expects {n}")


def encode(model: DaeModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    _check_len(x, model.n_input, "input")
    return _act(model.activation, x @ model.W1.T + model.b1)


def decode(model: DaeModel, theta) -> np.ndarray:
    """Sigmoid reconstruction, clipped to [EPS, 1 - EPS]."""
    theta = np.asarray(theta, dtype=np.float64)
    _check_len(theta, model.n_hidden, "hidden vector")
    return np.clip(sigmoid(theta @ model.W2.T + model.b2), EPS, 1.0 - EPS)


def bce_loss(mu, x) -> np.ndarray:
    """Binomial cross-entropy summed over pixels (last axis)."""
    mu = np.clip(np.asarray(mu, dtype=np.float64), EPS, 1.0 - EPS)
    x = np.asarray(x, dtype=np.float64)
    if mu.shape != x.shape:
        raise ValueError(f"shape mismatch {mu.shape} vs {x.shape}")
    return -np.sum(x * np.log(mu) + (1.0 - x) * np.log1p(-mu), axis=-1)


def salt_pepper(x, p: float, rng: Rng) -> np.ndarray:
    """Replace each pixel, with probability ``p``, by a fair coin flip."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"noise probability must lie in [0, 1], got {p}")
    x = np.asarray(x, dtype=np.float64)
    hit = rng.random(x.shape) < p
    coin = (rng.random(x.shape) < 0.5).astype(np.float64)
    return np.where(hit, coin, x)


def forward_loss(model: DaeModel, x_in, target) -> float:
    """Mean over the batch of the summed per-image cross-entropy."""
    x_in = np.atleast_2d(x_in)
    return float(np.mean(bce_loss(model.reconstruct(x_in), np.atleast_2d(target))))


def backward(model: DaeModel, x_in, target):
    """Loss and gradients of :func:`forward_loss` with respect to every parameter.

    Uses the logit form of the output gradient (``sigmoid(z) - x``), which is
    exact wherever the reconstruction is not clipped.
    """
    x_in = np.atleast_2d(np.asarray(x_in, dtype=np.float64))
    target = np.atleast_2d(np.asarray(target, dtype=np.float64))
    _check_len(x_in, model.n_input, "input")
    B = x_in.shape[0]
    z1 = x_in @ model.W1.T + model.b1
    h = _act(model.activation, z1)
    z2 = h @ model.W2.T + model.b2
    mu = sigmoid(z2)
    loss = float(np.mean(bce_loss(mu, target)))

    d2 = (mu - target) / B
    gW2 = d2.T @ h
    gb2 = d2.sum(axis=0)
    d1 = (d2 @ model.W2) * _act_grad(model.activation, z1, h)
    gW1 = d1.T @ x_in
    gb1 = d1.sum(axis=0)
    return loss, {"W1": gW1, "b1": gb1, "W2": gW2, "b2": gb2}


@dataclass
class TrainConfig:
    learning_rate: float = 0.1
    noise_p: float = 0.0
    batch_size: int = 100
    patience: int = 10
    max_epochs: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0 or not math.isfinite(self.learning_rate):
            raise ValueError("learning_rate must be finite and non-negative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0.0 <= self.noise_p <= 1.0:
            raise ValueError("noise_p must lie in [0, 1]")
        if self.patience < 0 or self.max_epochs < 1:
            raise ValueError("patience must be >= 0 and max_epochs >= 1")


@dataclass
class TrainReport:
    model: DaeModel
    epochs_run: int
    train_losses: list = field(default_factory=list)
    val_losses: list = field(default_factory=list)
    best_epoch: int = 0

    @property
    def best_val_loss(self) -> float:
        return self.val_losses[self.best_epoch]

    def summary(self) -> dict:
        return {
            "epochs_run": self.epochs_run,
            "best_epoch": self.best_epoch + 1,
            "best_val_loss": self.best_val_loss,
            "final_train_loss": self.train_losses[-1],
        }


class TrainingDiverged(FloatingPointError):
    pass


def train(model: DaeModel, train_x, val_x, cfg: TrainConfig, verbose: bool = False) -> TrainReport:
    """Denoising SGD with early stopping on corrupted-validation cross-entropy.

    ``model`` is updated in place; the report carries a copy of the
    best-validation parameters, which is what callers should keep.
    """
    train_x = np.asarray(train_x, dtype=np.float64)
    val_x = np.asarray(val_x, dtype=np.float64)
    if len(train_x) == 0 or len(val_x) == 0:
        raise ValueError("training and validation sets must be non-empty")
    _check_len(train_x, model.n_input, "training images")
    _check_len(val_x, model.n_input, "validation images")

    root = Rng(cfg.seed).child("train")
    # same validation corruption every epoch
    val_in = salt_pepper(val_x, cfg.noise_p, root.child("val_noise"))
    n = len(train_x)
    best = math.inf
    report = TrainReport(model=model.copy(), epochs_run=0)
    stale = 0
    for epoch in range(cfg.max_epochs):
        order = root.child("shuffle", epoch).permutation(n)
        noise = root.child("noise", epoch)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            clean = train_x[idx]
            with np.errstate(over="ignore", invalid="ignore"):
                loss, grads = backward(model, salt_pepper(clean, cfg.noise_p, noise), clean)
            if not math.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite training loss in epoch {epoch + 1}; learning rate {cfg.learning_rate} too high?"
                )
            total += loss * len(idx)
            if cfg.learning_rate:
                with np.errstate(over="ignore", invalid="ignore"):
                    for k, p in model.params().items():
                        p -= cfg.learning_rate * grads[k]
        with np.errstate(over="ignore", invalid="ignore"):
            val = forward_loss(model, val_in, val_x)
        if not math.isfinite(val) or not np.all(np.isfinite(model.W1)) or not np.all(np.isfinite(model.W2)):
            raise TrainingDiverged(
                f"non-finite parameters or validation loss in epoch {epoch + 1}; "
                f"learning rate {cfg.learning_rate} too high?"
            )
        report.train_losses.append(total / n)
        report.val_losses.append(val)
        report.epochs_run = epoch + 1
        if verbose:
            log.info("epoch %d train %.4f val %.4f", epoch + 1, total / n, val)
        if val < best:
            best = val
            stale = 0
            report.best_epoch = epoch
            report.model = model.copy()
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    return report


def dump_model(model: DaeModel) -> bytes:
    head = MODEL_MAGIC + struct.pack("<IIB", model.n_input, model.n_hidden, _ACT_TAG[model.activation])
    body = b"".join(np.ascontiguousarray(p, dtype="<f8").tobytes() for p in model.params().values())
    return head + body


def parse_model(data: bytes, expect_input: int | None = None) -> DaeModel:
    if len(data) < 13 or data[:4] != MODEL_MAGIC:
        raise ValueError("not a model file (bad magic or truncated header)")
    N, H, tag = struct.unpack_from("<IIB", data, 4)
    acts = {v: k for k, v in _ACT_TAG.items()}
    if tag not in acts:
        raise ValueError(f"unknown activation tag {tag}")
    if expect_input is not None and N != expect_input:
        raise ValueError(f"model input size {N} does not match expected {expect_input}")
    sizes = [H * N, H, N * H, N]
    need = 13 + 8 * sum(sizes)
    if len(data) != need:
        raise ValueError(f"model file has {len(data)} bytes, expected {need} for N={N}, H={H}")
    flat = np.frombuffer(data, dtype="<f8", offset=13).astype(np.float64)
    parts, pos = [], 0
    for s in sizes:
        parts.append(flat[pos:pos + s])
        pos += s
    return DaeModel(
        parts[0].reshape(H, N).copy(), parts[1].copy(), parts[2].reshape(N, H).copy(), parts[3].copy(), acts[tag]
    )


def save_model(model: DaeModel, path) -> None:
    with open(os.fspath(path), "wb") as f:
        f.write(dump_model(model))


def load_model(path, expect_input: int | None = None) -> DaeModel:
    with open(os.fspath(path), "rb") as f:
        return parse_model(f.read(), expect_input)
