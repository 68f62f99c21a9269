# Random search over DAE settings, then the validation-loss vs score study

import logging

from rcbind.search import SearchSpace, loss_vs_score_study, pearson, prepare_data, run_search, successful_rows

logging.basicConfig(level=logging.INFO, format="%(message)s")

data = prepare_data("bars", n_train=2000, n_val=300, n_test=100, seed=0)

space = SearchSpace(hidden_sizes=(100, 250))
result = run_search("bars", space, n_trials=6, data=data, max_epochs=15)
for t in result.trials:
    c = t.config
    print(f"trial {t.index}: lr {c.learning_rate:.4f} noise {c.noise_p} {c.hidden_size} {c.activation:7s}"
          f" -> {t.status:6s} val {t.best_val_loss:8.3f} AMI {t.score:.3f}")
print("best:", result.best.index, result.best.config)

rows = loss_vs_score_study("bars", n_models=10, data=data, max_epochs=15)
ok = successful_rows(rows)
print(f"{len(ok)} of {len(rows)} models trained")
print("pearson(-val loss, AMI) =", round(pearson([-r.val_loss for r in ok], [r.score for r in ok]), 3))
