"""Reconstruction Clustering.

Pixels of an image are softly (or hard) assigned to ``K`` clusters. Each
iteration feeds every cluster's masked copy of the image through the DAE
(R-step) and then re-assigns pixels by how well each cluster's reconstruction
explains them (E-step).

Responsibilities are stored pixel-major: ``gamma[..., i, k]``. The batched
functions accept a leading batch axis; the single-image entry point is
:func:`run_rc`.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .dae import EPS, DaeModel, decode, encode
from .numerics import Rng

__all__ = [
    "RcConfig", "RcTrace", "ClusterState", "init_assignment", "r_step", "e_step_soft",
    "e_step_hard", "complete_log_likelihood", "data_log_likelihood", "update_pi", "uniform_pi", "run_rc", "run_rc_batch",
]


@dataclass
class RcConfig:
    K: int = 3
    max_iters: int = 15
    ll_tolerance: float = 1e-3
    assignment_mode: str = "soft"
    pi_mode: str = "fixed_uniform"
    seed: int = 0

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.assignment_mode not in ("soft", "hard"):
            raise ValueError(f"assignment_mode must be 'soft' or 'hard', got {self.assignment_mode!r}")
        if self.pi_mode not in ("fixed_uniform", "estimated"):
            raise ValueError(f"pi_mode must be 'fixed_uniform' or 'estimated', got {self.pi_mode!r}")


@dataclass
class ClusterState:
    theta: np.ndarray  # (..., K, H)
    mu: np.ndarray  # (..., N, K), clipped to [EPS, 1 - EPS]


@dataclass
class RcTrace:
    gammas: list = field(default_factory=list)
    mus: list = field(default_factory=list)
    log_likelihoods: list = field(default_factory=list)
    data_log_likelihoods: list = field(default_factory=list)
    converged: bool = False

    @property
    def n_iters(self) -> int:
        return len(self.log_likelihoods)

    @property
    def final_iteration(self) -> int:
        return self.n_iters - 1

    @property
    def gamma(self) -> np.ndarray:
        return self.gammas[-1]

    @property
    def final_ll(self) -> float:
        return self.log_likelihoods[-1]

    def records(self):
        full = len(self.gammas) == self.n_iters
        for it, ll in enumerate(self.log_likelihoods):
            g = self.gammas[it] if full else (self.gammas[-1] if it == self.final_iteration else None)
            digest = None
            if g is not None:
                digest = hashlib.sha256(np.ascontiguousarray(g, dtype="<f8").tobytes()).hexdigest()[:16]
            yield {"iter": it, "log_likelihood": ll, "gamma_digest": digest}

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r) + "\n" for r in self.records())


def uniform_pi(K: int) -> np.ndarray:
    return np.full(K, 1.0 / K)


def init_assignment(N: int, K: int, rng: Rng) -> np.ndarray:
    """Rows of i.i.d. U(0, 1) entries normalised onto the simplex."""
    if N < 1 or K < 1:
        raise ValueError("N and K must be >= 1")
    if K == 1:
        return np.ones((N, 1))
    g = rng.random((N, K))
    return g / g.sum(axis=1, keepdims=True)


def r_step(model: DaeModel, x, gamma) -> ClusterState:
    """Encode each cluster's masked image ``gamma[:, k] * x`` and decode it."""
    x = np.asarray(x, dtype=np.float64)
    gamma = np.asarray(gamma, dtype=np.float64)
    if gamma.shape[:-1] != x.shape:
        raise ValueError(f"gamma shape {gamma.shape} does not match image shape {x.shape}")
    masked = np.swapaxes(gamma * x[..., None], -1, -2)  # (..., K, N)
    theta = encode(model, masked)
    mu = decode(model, theta)
    return ClusterState(theta=theta, mu=np.swapaxes(mu, -1, -2))


def _log_pixel_lik(x, mu):
    """log P(x_i | mu_ik) for binary (or soft) x; shape of ``mu``."""
    mu = np.clip(mu, EPS, 1.0 - EPS)
    x = np.asarray(x, dtype=np.float64)[..., None]
    return x * np.log(mu) + (1.0 - x) * np.log1p(-mu)


def _log_pi(pi):
    with np.errstate(divide="ignore"):
        return np.log(np.asarray(pi, dtype=np.float64))


def e_step_soft(x, state: ClusterState, pi) -> np.ndarray:
    logits = _log_pixel_lik(x, state.mu) + _log_pi(pi)[..., None, :]
    logits = logits - logits.max(axis=-1, keepdims=True)
    w = np.exp(logits)
    return w / w.sum(axis=-1, keepdims=True)


def e_step_hard(x, state: ClusterState, pi) -> np.ndarray:
    """One-hot at the most responsible cluster; ties go to the lowest index."""
    return _one_hot(e_step_soft(x, state, pi))


def _one_hot(gamma):
    K = gamma.shape[-1]
    return np.eye(K)[np.argmax(gamma, axis=-1)]


def _weighted_sum(gamma, terms):
    gamma = np.asarray(gamma, dtype=np.float64)
    safe = np.where(gamma > 0, terms, 0.0)  # -inf log pi only ever meets gamma = 0
    return (gamma * safe).sum(axis=(-2, -1))


def complete_log_likelihood(x, gamma, state: ClusterState, pi) -> np.ndarray:
    """sum_i sum_k gamma_ik [log P(x_i | mu_ik) + log pi_k]; zero-weight terms are dropped."""
    return _weighted_sum(gamma, _log_pixel_lik(x, state.mu) + _log_pi(pi)[..., None, :])


def data_log_likelihood(x, gamma, state: ClusterState) -> np.ndarray:
    """The pixel term of :func:`complete_log_likelihood` alone, without log pi."""
    return _weighted_sum(gamma, _log_pixel_lik(x, state.mu))


def update_pi(gamma) -> np.ndarray:
    """Column means of ``gamma`` (mixing weights maximising the expected log-likelihood)."""
    return np.asarray(gamma, dtype=np.float64).mean(axis=-2)


def run_rc_batch(model: DaeModel, X, cfg: RcConfig, rngs=None, keep_snapshots: bool = True) -> list[RcTrace]:
    """Run RC independently on each row of ``X``.

    ``rngs[b]`` seeds image ``b``'s initial assignment; by default image ``b``
    uses ``Rng(cfg.seed).child("rc_init", b)``. An image stops updating once it
    converges, so each result matches the single-image run up to rounding in
    the batched matrix products.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    B, N = X.shape
    if N != model.n_input:
        raise ValueError(f"image has {N} pixels, model expects {model.n_input}")
    K = cfg.K
    if rngs is None:
        root = Rng(cfg.seed).child("rc_init")
        rngs = [root.child(b) for b in range(B)]
    gamma = np.stack([init_assignment(N, K, r) for r in rngs])
    pi = np.tile(uniform_pi(K), (B, 1))
    step = e_step_hard if cfg.assignment_mode == "hard" else e_step_soft
    traces = [RcTrace() for _ in range(B)]
    active = np.arange(B)
    prev = np.full(B, np.nan)
    for it in range(cfg.max_iters):
        x = X[active]
        g = gamma[active]
        state = r_step(model, x, g)
        if cfg.pi_mode == "estimated":
            pi[active] = update_pi(g)
        g = step(x, state, pi[active])
        ll = complete_log_likelihood(x, g, state, pi[active])
        dll = data_log_likelihood(x, g, state)
        gamma[active] = g
        still = []
        for j, b in enumerate(active):
            tr = traces[b]
            if keep_snapshots or it == 0:
                tr.gammas.append(g[j].copy())
                tr.mus.append(state.mu[j].copy())
            else:
                tr.gammas[-1] = g[j].copy()
                tr.mus[-1] = state.mu[j].copy()
            tr.log_likelihoods.append(float(ll[j]))
            tr.data_log_likelihoods.append(float(dll[j]))
            if it > 0 and abs(ll[j] - prev[b]) < cfg.ll_tolerance:
                tr.converged = True
            else:
                still.append(j)
            prev[b] = ll[j]
        active = active[still]
        if len(active) == 0:
            break
    return traces


def run_rc(model: DaeModel, x, cfg: RcConfig, rng: Rng | None = None) -> RcTrace:
    """RC on a single flat image; see :func:`run_rc_batch`."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("run_rc expects a flat image vector")
    rngs = None if rng is None else [rng]
    return run_rc_batch(model, x[None, :], cfg, rngs=rngs)[0]
