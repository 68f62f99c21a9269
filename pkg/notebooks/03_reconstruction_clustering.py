# Binding the bars of one image with reconstruction clustering

import numpy as np
from pathlib import Path

from rcbind import datasets as D
from rcbind.dae import DaeModel, TrainConfig, train
from rcbind.metrics import ami, confidence, hard_labels
from rcbind.numerics import Rng
from rcbind.rc import RcConfig, run_rc
from rcbind.render import render_assignment, render_image, render_labels

train_x = D.stack_images(D.generate(D.DatasetSpec("bars", "train_single", 5000, seed=1)))
val_x = D.stack_images(D.generate(D.DatasetSpec("bars", "validation", 500, seed=1)))
model = train(DaeModel.init(400, 100, "relu", Rng(0)), train_x, val_x,
              TrainConfig(learning_rate=0.1, max_epochs=30)).model

ex = D.generate(D.DatasetSpec("bars", "test_multi", 10, seed=3))[4]
print("objects in the image:", ex.n_objects)

trace = run_rc(model, ex.image, RcConfig(K=12), rng=Rng(0))
print("iterations:", trace.n_iters, "converged:", trace.converged)
for rec in trace.records():
    print(f"  iter {rec['iter']:2d}  log-likelihood {rec['log_likelihood']:10.3f}")

labels = hard_labels(trace.gamma)
print("AMI", round(ami(labels, ex.labels(), ex.eval_mask), 4),
      "confidence", round(confidence(trace.gamma, ex.eval_mask), 4))

# one frame per iteration, colours fade where assignments are uncertain
out = Path("out/bind")
out.mkdir(parents=True, exist_ok=True)
render_image(ex.image, 20, 20, out / "input.pgm")
render_labels(ex.labels(), 20, 20, out / "truth.ppm")
for i, g in enumerate(trace.gammas):
    render_assignment(g, 20, 20, out / f"iter_{i:02d}.ppm", image=ex.image)

# hard assignments on the same image
hard = run_rc(model, ex.image, RcConfig(K=12, assignment_mode="hard"), rng=Rng(0))
print("hard RC AMI", round(ami(hard_labels(hard.gamma), ex.labels(), ex.eval_mask), 4))
