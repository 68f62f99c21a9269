# Mean AMI over the number of clusters, bars and simple_superposition

from rcbind import datasets as D
from rcbind.dae import DaeModel, TrainConfig, train
from rcbind.metrics import score_dataset
from rcbind.numerics import Rng
from rcbind.rc import RcConfig

setups = {
    "bars": dict(lr=0.1, hidden=100, act="relu", noise=0.0),
    "simple_superposition": dict(lr=0.366627, hidden=100, act="relu", noise=0.1),
}

for name, s in setups.items():
    tr = D.stack_images(D.generate(D.DatasetSpec(name, "train_single", 5000, seed=1)))
    va = D.stack_images(D.generate(D.DatasetSpec(name, "validation", 500, seed=1)))
    model = train(DaeModel.init(tr.shape[1], s["hidden"], s["act"], Rng(0)), tr, va,
                  TrainConfig(s["lr"], s["noise"], max_epochs=40)).model
    test = D.generate(D.DatasetSpec(name, "test_multi", 300, seed=1))
    print(name, "(true objects:", D.TRUE_OBJECTS[name], ")")
    for K in (2, 3, 5, 12):
        rep = score_dataset(model, test, RcConfig(K=K))
        print(f"  K={K:2d}  AMI {rep.mean_ami:.3f} +- {rep.std_ami:.3f}   final ll {rep.mean_final_ll:9.2f}")

# The final log-likelihood includes sum_k gamma_ik ln(1/K) for every pixel,
# so with a uniform prior it always falls with K; the data term alone does not.
