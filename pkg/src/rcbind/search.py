"""Random hyperparameter search for the DAE, scored by downstream RC performance."""
from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from . import datasets as D
from .dae import ACTIVATIONS, DaeModel, TrainConfig, TrainingDiverged, train
from .metrics import score_dataset
from .numerics import Rng, uniform
from .rc import RcConfig

log = logging.getLogger(__name__)


@dataclass
class SearchSpace:
    lr_range: tuple = (1e-3, 1.0)
    noise_levels: tuple = tuple(round(0.1 * i, 1) for i in range(10))
    hidden_sizes: tuple = (100, 250, 500, 1000)
    activations: tuple = ACTIVATIONS

    def __post_init__(self):
        lo, hi = self.lr_range
        if not 0 < lo <= hi:
            raise ValueError(f"invalid learning-rate range {self.lr_range}")
        for name in ("noise_levels", "hidden_sizes", "activations"):
            if not getattr(self, name):
                raise ValueError(f"{name} must be non-empty")
        if set(self.activations) - set(ACTIVATIONS):
            raise ValueError(f"unknown activations in {self.activations}")


@dataclass
class TrialConfig:
    learning_rate: float
    noise_p: float
    hidden_size: int
    activation: str


def sample_config(space: SearchSpace, rng: Rng) -> TrialConfig:
    lo, hi = space.lr_range
    lr = lo if lo == hi else uniform(rng, lo, hi, log_scale=True)
    return TrialConfig(
        learning_rate=lr,
        noise_p=float(rng.choice(space.noise_levels)),
        hidden_size=int(rng.choice(space.hidden_sizes)),
        activation=str(rng.choice(space.activations)),
    )


@dataclass
class Trial:
    index: int
    config: TrialConfig
    status: str = "pending"
    epochs_run: int = 0
    best_val_loss: float = math.nan
    score: float = math.nan
    score_std: float = math.nan
    error: str | None = None
    model: DaeModel | None = field(default=None, repr=False)

    def record(self) -> dict:
        return {
            "index": self.index,
            "config": asdict(self.config),
            "status": self.status,
            "epochs_run": self.epochs_run,
            "best_val_loss": self.best_val_loss,
            "score": self.score,
            "score_std": self.score_std,
            "error": self.error,
        }


@dataclass
class SearchData:
    """Images for training/validation plus labelled multi-object scoring examples."""

    train_x: np.ndarray
    val_x: np.ndarray
    test: list


def prepare_data(dataset: str, training_mode: str = "single_object", n_train: int = 10_000,
                 n_val: int = 1_000, n_test: int = 200, seed: int = 0, **knobs) -> SearchData:
    """Generate the splits a search or study needs.

    ``single_object`` trains on ``train_single`` and validates on
    ``validation``; ``multi_object`` carves both from ``train_multi``.
    """
    if training_mode == "single_object":
        train_x = D.stack_images(D.generate(D.DatasetSpec(dataset, "train_single", n_train, seed, **knobs)))
        val_x = D.stack_images(D.generate(D.DatasetSpec(dataset, "validation", n_val, seed, **knobs)))
    elif training_mode == "multi_object":
        both = D.stack_images(D.generate(D.DatasetSpec(dataset, "train_multi", n_train + n_val, seed, **knobs)))
        train_x, val_x = both[:n_train], both[n_train:]
    else:
        raise ValueError(f"unknown training_mode {training_mode!r}")
    test = D.generate(D.DatasetSpec(dataset, "test_multi", n_test, seed, **knobs))
    return SearchData(train_x, val_x, test)


def trial_rng(seed: int, index: int) -> Rng:
    return Rng(seed).child("trial", index)


def run_trial(index, config: TrialConfig, data: SearchData, rc_cfg: RcConfig, rng: Rng,
              batch_size: int = 100, patience: int = 10, max_epochs: int = 100) -> Trial:
    """Train one configuration and score it; divergence marks the trial failed."""
    trial = Trial(index=index, config=config)
    model = DaeModel.init(data.train_x.shape[1], config.hidden_size, config.activation, rng.child("init"))
    tcfg = TrainConfig(
        learning_rate=config.learning_rate,
        noise_p=config.noise_p,
        batch_size=batch_size,
        patience=patience,
        max_epochs=max_epochs,
        seed=int(rng.child("train_seed").integers(2**63)),
    )
    try:
        report = train(model, data.train_x, data.val_x, tcfg)
    except TrainingDiverged as e:
        trial.status, trial.error = "failed", str(e)
        return trial
    trial.epochs_run = report.epochs_run
    trial.best_val_loss = report.best_val_loss
    scores = score_dataset(report.model, data.test, rc_cfg)
    trial.score, trial.score_std = scores.mean_ami, scores.std_ami
    trial.model = report.model
    trial.status = "ok" if math.isfinite(trial.score) else "failed"
    return trial


@dataclass
class SearchResult:
    trials: list
    best: Trial

    def to_jsonl(self) -> str:
        return "".join(json.dumps(t.record()) + "\n" for t in self.trials)


def run_search(dataset: str, space: SearchSpace | None = None, n_trials: int = 20,
               training_mode: str = "single_object", rc_mode: str | None = None, K: int | None = None,
               seed: int = 0, data: SearchData | None = None, log_path=None,
               max_epochs: int = 100, patience: int = 10, **data_kw) -> SearchResult:
    """Random search over DAE configurations.

    Each trial ``i`` draws from its own stream ``Rng(seed).child("trial", i)``,
    so results do not depend on which other trials ran. ``rc_mode`` defaults
    to soft assignments for single-object training and hard for multi-object.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    space = space or SearchSpace()
    rc_mode = rc_mode or ("soft" if training_mode == "single_object" else "hard")
    K = K or D.TRUE_OBJECTS[dataset]
    if data is None:
        data = prepare_data(dataset, training_mode, seed=seed, **data_kw)
    rc_cfg = RcConfig(K=K, assignment_mode=rc_mode, seed=seed)
    trials = []
    for i in range(n_trials):
        rng = trial_rng(seed, i)
        cfg = sample_config(space, rng.child("config"))
        trial = run_trial(i, cfg, data, rc_cfg, rng, patience=patience, max_epochs=max_epochs)
        log.info("trial %d %s -> %s score=%.4f", i, asdict(cfg), trial.status, trial.score)
        trials.append(trial)
        if log_path is not None:
            with open(os.fspath(log_path), "a") as f:
                f.write(json.dumps(trial.record()) + "\n")
    ok = [t for t in trials if t.status == "ok"]
    if not ok:
        raise RuntimeError(f"all {n_trials} trials failed")
    best = max(ok, key=lambda t: t.score)
    return SearchResult(trials, best)


def best_config_text(trial: Trial, **extra) -> str:
    """Flat ``key = value`` config for the ``train`` command."""
    c = trial.config
    items = {
        "learning_rate": c.learning_rate,
        "noise_p": c.noise_p,
        "hidden_size": c.hidden_size,
        "activation": c.activation,
        **extra,
    }
    return "".join(f"{k} = {v}\n" for k, v in items.items())


@dataclass
class StudyRow:
    index: int
    learning_rate: float
    status: str
    val_loss: float = math.nan
    score: float = math.nan


def loss_vs_score_study(dataset: str, n_models: int = 30, hidden_size: int = 250,
                        activation: str = "relu", noise_p: float = 0.1, K: int | None = None,
                        seed: int = 0, data: SearchData | None = None, lr_range=(1e-3, 1.0),
                        max_epochs: int = 100, patience: int = 10, **data_kw) -> list[StudyRow]:
    """Train ``n_models`` DAEs differing only in learning rate and initialisation.

    Returns one row per model; failed models keep ``status="failed"`` and NaN
    values, use :func:`successful_rows` for plotting.
    """
    if n_models < 2:
        raise ValueError("n_models must be >= 2")
    if data is None:
        data = prepare_data(dataset, "single_object", seed=seed, **data_kw)
    space = SearchSpace(lr_range=tuple(lr_range), noise_levels=(noise_p,), hidden_sizes=(hidden_size,),
                        activations=(activation,))
    rc_cfg = RcConfig(K=K or D.TRUE_OBJECTS[dataset], seed=seed)
    rows = []
    for i in range(n_models):
        rng = Rng(seed).child("study", i)
        cfg = sample_config(space, rng.child("config"))
        t = run_trial(i, cfg, data, rc_cfg, rng, patience=patience, max_epochs=max_epochs)
        rows.append(StudyRow(i, cfg.learning_rate, t.status, t.best_val_loss, t.score))
    return rows


def successful_rows(rows):
    return [r for r in rows if r.status == "ok"]


def pearson(xs, ys) -> float:
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    x, y = x - x.mean(), y - y.mean()
    return float((x @ y) / math.sqrt((x @ x) * (y @ y)))
