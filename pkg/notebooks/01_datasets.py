# Benchmark datasets: generate, inspect, save, render
#
# Every example is a binary image plus one mask per object. The image is the
# OR of the masks; pixels covered by more than one object are left out of
# scoring.

import numpy as np
from pathlib import Path

from rcbind import datasets as D
from rcbind.render import render_image, render_labels

out = Path("out/datasets")
out.mkdir(parents=True, exist_ok=True)

for name in ("simple_superposition", "shapes", "bars", "corners"):
    exs = D.generate(D.DatasetSpec(name, "test_multi", 200, seed=0))
    w, h = D.GEOMETRY[name]
    counts = np.bincount([e.n_objects for e in exs])
    overlap = np.mean([(e.masks.sum(0) > 1).sum() / max(e.image.sum(), 1) for e in exs])
    print(f"{name:22s} {w}x{h}  objects/image {dict(enumerate(counts.tolist()))}  overlap {overlap:.1%}")
    render_image(exs[0].image, w, h, out / f"{name}_input.pgm")
    render_labels(exs[0].labels(), w, h, out / f"{name}_truth.ppm")

# single-object splits feed DAE training
single = D.generate(D.DatasetSpec("corners", "train_single", 1000, seed=0))
print("corners train_single, square fraction:", np.mean([e.masks[0].sum() == 36 for e in single]))

# the container format round-trips bit for bit
exs = D.generate(D.DatasetSpec("bars", "test_multi", 50, seed=1))
D.save_dataset(exs, out / "bars.rcds", "bars", *D.GEOMETRY["bars"])
name, w, h, back = D.load_dataset(out / "bars.rcds")
assert D.dump_dataset(back, name) == (out / "bars.rcds").read_bytes()
print("bars.rcds:", (out / "bars.rcds").stat().st_size, "bytes for", len(back), "examples")

# bars inclusion probability is a knob
for p in (0.1, 0.25, 0.5):
    exs = D.generate(D.DatasetSpec("bars", "test_multi", 500, seed=2, bars_p=p))
    print(f"bars_p={p}: mean bars per image {np.mean([e.n_objects for e in exs]):.2f}")
