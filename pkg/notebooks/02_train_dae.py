# Training a denoising autoencoder on single-object bars

import numpy as np

from rcbind import datasets as D
from rcbind.dae import DaeModel, TrainConfig, bce_loss, salt_pepper, train
from rcbind.numerics import Rng

train_x = D.stack_images(D.generate(D.DatasetSpec("bars", "train_single", 5000, seed=1)))
val_x = D.stack_images(D.generate(D.DatasetSpec("bars", "validation", 500, seed=1)))
print("train", train_x.shape, "val", val_x.shape)

model = DaeModel.init(400, 100, "relu", Rng(0))
report = train(model, train_x, val_x, TrainConfig(learning_rate=0.1, noise_p=0.1, max_epochs=30))
print(report.summary())
for e in range(0, report.epochs_run, 5):
    print(f"  epoch {e + 1:3d}  train {report.train_losses[e]:8.3f}  val {report.val_losses[e]:8.3f}")

# how much of the corruption does it undo?
best = report.model
noisy = salt_pepper(val_x, 0.1, Rng(7))
print("cross-entropy of the noisy input itself:", bce_loss(np.clip(noisy, 1e-6, 1 - 1e-6), val_x).mean())
print("cross-entropy of the reconstruction:   ", bce_loss(best.reconstruct(noisy), val_x).mean())

# a bar the model has never seen together with another one
two = np.clip(train_x[0] + train_x[1], 0, 1)
rec = best.reconstruct(two)
print("two-bar image: lit pixels", int(two.sum()), " reconstruction mass", round(float(rec.sum()), 1))
