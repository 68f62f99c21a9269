"""Acceptance gate.

One test per criterion; each prints a PASS/FAIL line, collected again in the
terminal summary. Networks are trained at desk scale (a few thousand training
images, capped epochs) and scored on 1000 held-out multi-object images drawn
with a seed no training or search run sees.
"""
import functools
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from rcbind import datasets as D
from rcbind.dae import DaeModel, TrainConfig, train
from rcbind.metrics import score_dataset
from rcbind.numerics import Rng
from rcbind.rc import RcConfig
from rcbind.search import (
    SearchSpace,
    TrialConfig,
    loss_vs_score_study,
    pearson,
    prepare_data,
    run_search,
    run_trial,
    successful_rows,
)

pytestmark = pytest.mark.slow

ROOT = Path(__file__).resolve().parent.parent
KS = (2, 3, 5, 12)
TEST_SEED = 1  # held out: training and search use seed 0
N_TEST = 1000

TARGETS = {"bars": 0.95, "shapes": 0.93, "corners": 0.85, "simple_superposition": 0.89}

# best single-object configs from the reference search: (lr, hidden, activation, noise)
TABLE_CONFIGS = {
    "shapes": (0.083147, 500, "tanh", 0.4),
    "simple_superposition": (0.366627, 100, "relu", 0.1),
}
# the reference learning rates for these two do not train under this loss scaling,
# so they get a 20-trial random search instead
SEARCHED = ("bars", "corners")


@functools.cache
def single_object_model(name):
    if name in SEARCHED:
        res = run_search(name, SearchSpace(), n_trials=20, seed=0, n_train=3000, n_val=500, n_test=100,
                         max_epochs=30)
        return res.best.model
    lr, hidden, act, noise = TABLE_CONFIGS[name]
    tr = D.stack_images(D.generate(D.DatasetSpec(name, "train_single", 10_000, 0)))
    va = D.stack_images(D.generate(D.DatasetSpec(name, "validation", 1000, 0)))
    cfg = TrainConfig(lr, noise, patience=10, max_epochs=40, seed=0)
    return train(DaeModel.init(tr.shape[1], hidden, act, Rng(0).child("init")), tr, va, cfg).model


@functools.cache
def held_out(name):
    return D.generate(D.DatasetSpec(name, "test_multi", N_TEST, TEST_SEED))


@functools.cache
def score_table(name):
    model = single_object_model(name)
    return {K: score_dataset(model, held_out(name), RcConfig(K=K)) for K in KS}


# 1. score reproduction


@pytest.mark.parametrize("name", list(TARGETS))
def test_c1_score_reproduction(name, gate):
    K = D.TRUE_OBJECTS[name]
    score = score_table(name)[K].mean_ami
    ok = abs(score - TARGETS[name]) <= 0.10
    detail = f"{name} K={K} mean AMI {score:.4f} (target {TARGETS[name]} +- 0.10, {N_TEST} images)"
    assert gate(f"C1 score reproduction [{name}]", ok, detail), detail


# 2. MNIST datasets, optional


MNIST_TARGETS = {"multi_mnist": 0.50, "mnist_shape": 0.40}
MNIST_CONFIGS = {"multi_mnist": (0.011362, 1000, "relu", 0.6), "mnist_shape": (0.031685, 250, "sigmoid", 0.6)}


def _mnist_available():
    d = os.environ.get("RCBIND_MNIST_DIR")
    return bool(d) and all((Path(d) / f).exists() or (Path(d) / (f + ".gz")).exists()
                           for f in D.MNIST_FILES.values())


@pytest.mark.parametrize("name", list(MNIST_TARGETS))
def test_c2_mnist_reproduction(name, gate):
    if not _mnist_available():
        gate(f"C2 MNIST reproduction [{name}]", True, "MNIST files not found (set RCBIND_MNIST_DIR)", status="SKIP")
        pytest.skip("MNIST files not available")
    lr, hidden, act, noise = MNIST_CONFIGS[name]
    tr = D.stack_images(D.generate(D.DatasetSpec(name, "train_single", 10_000, 0)))
    va = D.stack_images(D.generate(D.DatasetSpec(name, "validation", 1000, 0)))
    model = train(DaeModel.init(tr.shape[1], hidden, act, Rng(0).child("init")), tr, va,
                  TrainConfig(lr, noise, max_epochs=40)).model
    K = D.TRUE_OBJECTS[name]
    score = score_dataset(model, held_out(name), RcConfig(K=K)).mean_ami
    ok = score >= MNIST_TARGETS[name]
    detail = f"{name} K={K} mean AMI {score:.4f} (need >= {MNIST_TARGETS[name]})"
    assert gate(f"C2 MNIST reproduction [{name}]", ok, detail), detail


# 3. optimal K


def test_c3_shapes_likelihood_peaks_at_true_k(gate):
    table = score_table("shapes")
    ll = {K: table[K].mean_final_ll for K in (2, 3, 12)}
    ok = ll[3] > ll[2] and ll[3] > ll[12]
    detail = "mean final ll " + ", ".join(f"K={K}: {v:.2f}" for K, v in ll.items()) + f" over {N_TEST} images"
    assert gate("C3 shapes ll(K=3) > ll(K=2), ll(K=12)", ok, detail), detail


@pytest.mark.parametrize("name", list(TARGETS))
def test_c3_ami_argmax_is_true_k(name, gate):
    table = score_table(name)
    means = {K: table[K].mean_ami for K in KS}
    best = max(means, key=means.get)
    ok = best == D.TRUE_OBJECTS[name]
    detail = f"{name} argmax K={best} (true {D.TRUE_OBJECTS[name]}); " + ", ".join(
        f"K={K}: {v:.3f}" for K, v in means.items())
    assert gate(f"C3 AMI argmax over K [{name}]", ok, detail), detail


# 4. convergence


def test_c4_shapes_convergence(gate):
    report = score_table("shapes")[3]
    frac = np.mean([s.converged for s in report.scores])
    detail = f"{frac:.1%} of {len(report.scores)} shapes runs reach |dll| < 1e-3 within 15 iterations (need >= 95%)"
    assert gate("C4 convergence", frac >= 0.95, detail), detail


# 5. multi-object training


def test_c5_multi_object_bars(gate):
    data = prepare_data("bars", "multi_object", n_train=5000, n_val=500, n_test=100, seed=0)
    # best multi-object bars config from the reference search
    trial = run_trial(0, TrialConfig(0.012192, 0.8, 100, "sigmoid"), data,
                      RcConfig(K=12, assignment_mode="hard"), Rng(0), max_epochs=100)
    test = held_out("bars")
    hard = score_dataset(trial.model, test, RcConfig(K=12, assignment_mode="hard")).mean_ami
    soft = score_dataset(trial.model, test, RcConfig(K=12, assignment_mode="soft")).mean_ami
    ok = hard >= 0.70 and soft < hard
    detail = f"hard RC {hard:.4f} (need >= 0.70), soft RC {soft:.4f} (need < hard)"
    assert gate("C5 multi-object training", ok, detail), detail


# 6. loss vs score


def test_c6_loss_score_correlation(gate):
    rows = loss_vs_score_study("bars", n_models=30, hidden_size=250, seed=0, n_train=3000, n_val=500,
                               n_test=100, max_epochs=30)
    ok_rows = successful_rows(rows)
    r = pearson([-row.val_loss for row in ok_rows], [row.score for row in ok_rows])
    detail = f"pearson(-val loss, AMI) = {r:.4f} over {len(ok_rows)}/{len(rows)} trained models (need > 0.3)"
    assert gate("C6 loss-score correlation", r > 0.3, detail), detail


# 7. property suites, run as their own pytest processes

PROPERTY_SUITES = {
    "gradient check": ["tests/test_dae.py::test_gradient_check"],
    "E-step brute force": ["tests/test_rc.py::test_e_step_matches_brute_force"],
    "gamma invariants": [
        "tests/test_rc.py::test_init_rows_on_simplex",
        "tests/test_rc.py::test_e_step_simplex_invariants",
        "tests/test_rc.py::test_run_invariants_every_iteration",
    ],
    "log-likelihood oracle": ["tests/test_rc.py::test_ll_matches_double_loop"],
    "AMI suite": [
        "tests/test_metrics.py::test_ami_identity_and_relabeling",
        "tests/test_metrics.py::test_ami_symmetric_and_permutation_invariant",
        "tests/test_metrics.py::test_random_labelings_average_zero",
        "tests/test_metrics.py::test_emi_exhaustive_small_tables",
        "tests/test_metrics.py::test_emi_against_permutation_brute_force",
    ],
    "salt and pepper": [
        "tests/test_dae.py::test_salt_pepper_zero_is_identity",
        "tests/test_dae.py::test_salt_pepper_full_noise_is_fair",
    ],
    "determinism": [
        "tests/test_datasets.py::test_generation_is_deterministic",
        "tests/test_dae.py::test_training_is_deterministic",
        "tests/test_cli.py::test_generate_is_bit_identical",
        "tests/test_cli.py::test_train_same_seed_same_bytes",
        "tests/test_cli.py::test_bind_traces_and_frames",
    ],
}


@pytest.mark.parametrize("suite", list(PROPERTY_SUITES))
def test_c7_property_suites(suite, gate):
    env = {**os.environ, "PYTHONHASHSEED": "0"}
    r = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", *PROPERTY_SUITES[suite]],
                       cwd=ROOT, capture_output=True, text=True, env=env)
    last = r.stdout.strip().splitlines()[-1] if r.stdout.strip() else r.stderr.strip()[-200:]
    assert gate(f"C7 property suite [{suite}]", r.returncode == 0, last), r.stdout[-2000:]
