"""Adjusted mutual information scoring of RC groupings against ground truth."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import gammaln

from .numerics import Rng
from .rc import RcConfig, run_rc_batch


def hard_labels(gamma) -> np.ndarray:
    """Argmax cluster per pixel; ties resolve to the lowest index."""
    return np.argmax(np.asarray(gamma), axis=-1)


def contingency(a, b) -> np.ndarray:
    """Counts table with one row per distinct label of ``a`` and one column per label of ``b``."""
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    table = np.zeros((ia.max() + 1, ib.max() + 1), dtype=np.int64)
    np.add.at(table, (ia.ravel(), ib.ravel()), 1)
    return table


def _entropy(counts, n) -> float:
    p = counts[counts > 0] / n
    return float(-np.sum(p * np.log(p)))


def mutual_info(table) -> float:
    table = np.asarray(table, dtype=np.float64)
    n = table.sum()
    a = table.sum(axis=1, keepdims=True)
    b = table.sum(axis=0, keepdims=True)
    nz = table > 0
    return float(np.sum(table[nz] / n * np.log(n * table[nz] / (a @ b)[nz])))


def expected_mutual_info(a, b) -> float:
    """E[MI] under the permutation model with row marginals ``a`` and column marginals ``b``."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    n = int(a.sum())
    if n != int(b.sum()):
        raise ValueError("marginals must share a total")
    lg = lambda k: gammaln(np.asarray(k, dtype=np.float64) + 1)  # noqa: E731  log k!
    total = 0.0
    for ai in a:
        for bj in b:
            lo, hi = max(1, ai + bj - n), min(ai, bj)
            if lo > hi:
                continue
            nij = np.arange(lo, hi + 1, dtype=np.float64)
            log_p = (
                lg(ai) + lg(bj) + lg(n - ai) + lg(n - bj)
                - lg(n) - lg(nij) - lg(ai - nij) - lg(bj - nij) - lg(n - ai - bj + nij)
            )
            total += float(np.sum(nij / n * np.log(n * nij / (ai * bj)) * np.exp(log_p)))
    return total


def ami(pred_labels, true_labels, eval_mask=None) -> float:
    """Adjusted mutual information with the max-entropy normaliser.

    Only pixels where ``eval_mask`` is true are compared. If both partitions
    put every evaluated pixel into one group the score is 1; if exactly one
    does it is 0.
    """
    pred = np.asarray(pred_labels).ravel()
    true = np.asarray(true_labels).ravel()
    if pred.shape != true.shape:
        raise ValueError(f"label vectors differ in length: {pred.size} vs {true.size}")
    if eval_mask is not None:
        m = np.asarray(eval_mask, dtype=bool).ravel()
        if m.shape != pred.shape:
            raise ValueError("eval_mask length does not match labels")
        pred, true = pred[m], true[m]
    if pred.size == 0:
        raise ValueError("no pixels to evaluate (empty mask)")
    table = contingency(pred, true)
    R, C = table.shape
    if R == 1 and C == 1:
        return 1.0
    if R == 1 or C == 1:
        return 0.0
    n = pred.size
    a, b = table.sum(axis=1), table.sum(axis=0)
    mi = mutual_info(table)
    emi = expected_mutual_info(a, b)
    denom = max(_entropy(a, n), _entropy(b, n)) - emi
    if abs(denom) < 1e-15:
        # both partitions are all-singletons; MI equals its expectation
        return 1.0 if R == C == n else 0.0
    return float((mi - emi) / denom)


def confidence(gamma, eval_mask=None) -> float:
    """Mean of max_k gamma_ik over evaluated pixels."""
    top = np.asarray(gamma).max(axis=-1)
    if eval_mask is not None:
        top = top[np.asarray(eval_mask, dtype=bool)]
    if top.size == 0:
        raise ValueError("no pixels to evaluate (empty mask)")
    return float(top.mean())


@dataclass
class Score:
    index: int
    ami: float = math.nan
    confidence: float = math.nan
    evaluated_pixel_count: int = 0
    iterations: int = 0
    final_ll: float = math.nan
    converged: bool = False
    error: str | None = None


@dataclass
class ScoreReport:
    scores: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def _ok(self):
        return [s for s in self.scores if s.error is None]

    def _values(self, attr):
        return np.array([getattr(s, attr) for s in self._ok()], dtype=np.float64)

    @property
    def n_failed(self) -> int:
        return len(self.scores) - len(self._ok())

    @property
    def mean_ami(self) -> float:
        v = self._values("ami")
        return float(v.mean()) if v.size else math.nan

    @property
    def std_ami(self) -> float:
        v = self._values("ami")
        return float(v.std()) if v.size else math.nan

    @property
    def mean_final_ll(self) -> float:
        v = self._values("final_ll")
        return float(v.mean()) if v.size else math.nan

    @property
    def mean_confidence(self) -> float:
        v = self._values("confidence")
        return float(v.mean()) if v.size else math.nan

    def summary(self) -> dict:
        ok = self._ok()
        return {
            "n_examples": len(self.scores),
            "n_failed": self.n_failed,
            "mean_ami": self.mean_ami,
            "std_ami": self.std_ami,
            "mean_confidence": self.mean_confidence,
            "mean_final_ll": self.mean_final_ll,
            "converged_fraction": (sum(s.converged for s in ok) / len(ok)) if ok else math.nan,
            "config": self.config,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "ami", "confidence", "iterations", "final_ll", "error"])
        for s in self.scores:
            w.writerow([s.index, repr(s.ami), repr(s.confidence), s.iterations, repr(s.final_ll), s.error or ""])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True)


def _score_one(i, ex, trace) -> Score:
    s = Score(index=i, iterations=trace.n_iters, final_ll=trace.final_ll, converged=trace.converged)
    mask = ex.eval_mask
    s.evaluated_pixel_count = int(mask.sum())
    s.ami = ami(hard_labels(trace.gamma), ex.labels(), mask)
    s.confidence = confidence(trace.gamma, mask)
    return s


def score_dataset(model, examples, cfg: RcConfig, chunk: int = 250) -> ScoreReport:
    """Run RC on every example and score it; per-example failures are recorded, not raised.

    Example ``i`` initialises from ``Rng(cfg.seed).child("rc_init", i)``, so a
    score does not depend on chunking.
    """
    examples = list(examples)
    if not examples:
        raise ValueError("no examples to score")
    root = Rng(cfg.seed).child("rc_init")
    report = ScoreReport(config=asdict(cfg))
    for start in range(0, len(examples), chunk):
        part = examples[start:start + chunk]
        X = np.stack([e.image for e in part]).astype(np.float64)
        rngs = [root.child(start + j) for j in range(len(part))]
        traces = run_rc_batch(model, X, cfg, rngs=rngs, keep_snapshots=False)
        for j, (ex, tr) in enumerate(zip(part, traces)):
            try:
                report.scores.append(_score_one(start + j, ex, tr))
            except ValueError as e:
                report.scores.append(Score(index=start + j, iterations=tr.n_iters, final_ll=tr.final_ll, error=str(e)))
    return report
