# Binding shapes the DAE never saw: two letters drawn by hand

import numpy as np
from pathlib import Path

from rcbind import datasets as D
from rcbind.dae import DaeModel, TrainConfig, train
from rcbind.numerics import Rng
from rcbind.rc import RcConfig, run_rc
from rcbind.render import encode_pgm, read_binary_image, render_assignment

# a shapes DAE stands in for the MNIST one when MNIST is not available
tr = D.stack_images(D.generate(D.DatasetSpec("shapes", "train_single", 5000, seed=1)))
va = D.stack_images(D.generate(D.DatasetSpec("shapes", "validation", 500, seed=1)))
model = train(DaeModel.init(784, 250, "tanh", Rng(0)), tr, va, TrainConfig(0.08, 0.3, max_epochs=20)).model

img = np.zeros((28, 28))
img[4:24, 3:6] = img[21:24, 3:13] = 1  # L
img[4:24, 16:19] = img[4:7, 16:26] = img[13:16, 16:23] = 1  # F
out = Path("out/generalize")
out.mkdir(parents=True, exist_ok=True)
(out / "LF.pgm").write_bytes(encode_pgm(img.ravel(), 28, 28))

pixels, w, h = read_binary_image(out / "LF.pgm")
trace = run_rc(model, pixels, RcConfig(K=2, seed=1))
render_assignment(trace.gamma, w, h, out / "LF_bound.ppm", image=pixels)
labels = trace.gamma.argmax(1).reshape(h, w)
left, right = labels[:, :14][img[:, :14] > 0], labels[:, 14:][img[:, 14:] > 0]
print("left letter clusters", np.bincount(left, minlength=2), " right letter clusters", np.bincount(right, minlength=2))
