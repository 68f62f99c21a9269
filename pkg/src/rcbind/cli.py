"""Command-line entry point: ``rcbind <command> [options]``.

Every option may also come from a flat ``key = value`` file passed with
``--config``; flags given on the command line win. The resolved configuration
of each invocation is appended to ``<out>/runlog.jsonl`` before work starts.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path


from . import datasets as D
from .dae import ACTIVATIONS, DaeModel, TrainConfig, TrainingDiverged, load_model, save_model, train
from .metrics import ami, confidence, hard_labels, score_dataset
from .numerics import Rng
from .rc import RcConfig, run_rc
from .render import render_assignment, render_image, render_labels, read_binary_image
from .search import SearchSpace, best_config_text, loss_vs_score_study, run_search

log = logging.getLogger("rcbind")


class UsageError(Exception):
    pass


RC_DEFAULTS = {
    "K": 3,
    "max_iters": 15,
    "ll_tolerance": 1e-3,
    "assignment_mode": "soft",
    "pi_mode": "fixed_uniform",
}

DEFAULTS = {
    "generate": {
        "dataset": None, "split": "test_multi", "count": 1000, "file": None,
        "bars_p": 0.25, "corners_square_p": 0.5, "mnist_dir": None,
    },
    "train": {
        "train": None, "val": None, "learning_rate": 0.1, "noise_p": 0.0, "hidden_size": 100,
        "activation": "relu", "batch_size": 100, "patience": 10, "max_epochs": 500,
    },
    "search": {
        "dataset": None, "n_trials": 20, "training_mode": "single_object", "rc_mode": "",
        "K": 0, "n_train": 10000, "n_val": 1000, "n_test": 200, "max_epochs": 100, "patience": 10,
    },
    "bind": {"model": None, "dataset": None, "limit": 0, "render": False, **RC_DEFAULTS},
    "eval": {"model": None, "dataset": None, "ks": "", "limit": 0, **RC_DEFAULTS},
    "study": {
        "dataset": None, "n_models": 30, "hidden_size": 250, "activation": "relu", "noise_p": 0.1,
        "K": 0, "n_train": 10000, "n_val": 1000, "n_test": 200, "max_epochs": 100, "patience": 10,
    },
    "generalize": {"model": None, "images": None, **RC_DEFAULTS},
    "render": {"dataset": None, "index": 0, "model": None, **RC_DEFAULTS},
}
REQUIRED = {
    "generate": ("dataset",),
    "train": ("train", "val"),
    "search": ("dataset",),
    "bind": ("model", "dataset"),
    "eval": ("model", "dataset"),
    "study": ("dataset",),
    "generalize": ("model", "images"),
    "render": ("dataset",),
}
CHOICES = {
    "dataset_name": D.DATASETS,
    "split": D.SPLITS,
    "activation": ACTIVATIONS,
    "assignment_mode": ("soft", "hard"),
    "pi_mode": ("fixed_uniform", "estimated"),
    "training_mode": ("single_object", "multi_object"),
    "rc_mode": ("", "soft", "hard"),
}


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path) as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected 'key = value'")
            k, v = (s.strip() for s in line.split("=", 1))
            out[k.replace("-", "_")] = v
    return out


def _coerce(key, value, default):
    if value is None or isinstance(value, (bool, int, float)) and not isinstance(value, str):
        return value
    if isinstance(default, bool):
        return str(value).lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float):
        return float(value)
    if key == "images" and isinstance(value, str):
        return value.split()
    return value


def resolve(command: str, args: argparse.Namespace) -> dict:
    """Defaults, then config file, then explicit flags."""
    defaults = DEFAULTS[command]
    cfg = {**defaults, "seed": 0, "out": "."}
    if args.config:
        filecfg = read_config_file(args.config)
        unknown = set(filecfg) - set(cfg)
        if unknown:
            raise UsageError(f"unknown config keys for {command}: {sorted(unknown)}")
        cfg.update(filecfg)
    for k in cfg:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    cfg = {k: _coerce(k, v, defaults.get(k, 0 if k == "seed" else "")) for k, v in cfg.items()}
    missing = [k for k in REQUIRED[command] if cfg.get(k) in (None, "", [])]
    if missing:
        raise UsageError(f"{command}: missing required option(s) {', '.join('--' + m.replace('_', '-') for m in missing)}")
    for k, allowed in CHOICES.items():
        key = "dataset" if k == "dataset_name" else k
        if command in ("generate", "search", "study") or k != "dataset_name":
            if key in cfg and cfg[key] is not None and cfg[key] not in allowed:
                raise UsageError(f"invalid {key} {cfg[key]!r}; choose from {list(allowed)}")
    return cfg


def _runlog(cfg, command, **metrics):
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    rec = {"timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"), "command": command, "config": cfg}
    if metrics:
        rec["metrics"] = metrics
    with open(out / "runlog.jsonl", "a") as f:
        f.write(json.dumps(rec, default=str) + "\n")


def _rc_config(cfg, K=None) -> RcConfig:
    return RcConfig(
        K=K or cfg["K"],
        max_iters=cfg["max_iters"],
        ll_tolerance=cfg["ll_tolerance"],
        assignment_mode=cfg["assignment_mode"],
        pi_mode=cfg["pi_mode"],
        seed=cfg["seed"],
    )


def _load_examples(path, limit=0):
    name, w, h, examples = D.load_dataset(path)
    if limit:
        examples = examples[:limit]
    return name, w, h, examples


def _load_model_for(path, n):
    model = load_model(path)
    if model.n_input != n:
        raise ValueError(f"model {path} expects {model.n_input} pixels but the data has {n}")
    return model


def cmd_generate(cfg):
    spec = D.DatasetSpec(
        cfg["dataset"], cfg["split"], cfg["count"], cfg["seed"],
        bars_p=cfg["bars_p"], corners_square_p=cfg["corners_square_p"], mnist_dir=cfg["mnist_dir"],
    )
    examples = D.generate(spec)
    out = Path(cfg["out"])
    path = Path(cfg["file"]) if cfg["file"] else out / f"{spec.name}_{spec.split}.rcds"
    path.parent.mkdir(parents=True, exist_ok=True)
    w, h = spec.geometry
    D.save_dataset(examples, path, spec.name, w, h)
    print(f"wrote {len(examples)} examples ({w}x{h}) to {path}")
    return {"path": str(path), "count": len(examples)}


def cmd_train(cfg):
    _, w, h, tr = _load_examples(cfg["train"])
    _, w2, h2, va = _load_examples(cfg["val"])
    if (w, h) != (w2, h2):
        raise ValueError("training and validation sets differ in geometry")
    tcfg = TrainConfig(cfg["learning_rate"], cfg["noise_p"], cfg["batch_size"], cfg["patience"],
                       cfg["max_epochs"], cfg["seed"])
    model = DaeModel.init(w * h, cfg["hidden_size"], cfg["activation"], Rng(cfg["seed"]).child("init"))
    report = train(model, D.stack_images(tr), D.stack_images(va), tcfg)
    out = Path(cfg["out"])
    save_model(report.model, out / "model.rcm")
    summary = report.summary()
    (out / "train_report.json").write_text(json.dumps(
        {**summary, "train_losses": report.train_losses, "val_losses": report.val_losses}, indent=2))
    print(f"trained {report.epochs_run} epochs, best validation loss {report.best_val_loss:.4f} "
          f"(epoch {report.best_epoch + 1}); wrote {out / 'model.rcm'}")
    return summary


def cmd_search(cfg):
    out = Path(cfg["out"])
    log_path = out / "trials.jsonl"
    result = run_search(
        cfg["dataset"], SearchSpace(), cfg["n_trials"], cfg["training_mode"], cfg["rc_mode"] or None,
        cfg["K"] or None, cfg["seed"], log_path=log_path, max_epochs=cfg["max_epochs"],
        patience=cfg["patience"], n_train=cfg["n_train"], n_val=cfg["n_val"], n_test=cfg["n_test"],
    )
    (out / "best_config.txt").write_text(best_config_text(result.best, seed=cfg["seed"]))
    save_model(result.best.model, out / "best_model.rcm")
    b = result.best
    print(f"best trial {b.index}: score {b.score:.4f} with {b.config}")
    return {"best_index": b.index, "best_score": b.score}


def cmd_bind(cfg):
    _, w, h, examples = _load_examples(cfg["dataset"], cfg["limit"])
    model = _load_model_for(cfg["model"], w * h)
    rc_cfg = _rc_config(cfg)
    out = Path(cfg["out"])
    root = Rng(rc_cfg.seed).child("rc_init")
    with open(out / "traces.jsonl", "w") as f:
        for i, ex in enumerate(examples):
            trace = run_rc(model, ex.image, rc_cfg, rng=root.child(i))
            for rec in trace.records():
                f.write(json.dumps({"example": i, **rec}) + "\n")
            if cfg["render"]:
                d = out / "frames" / f"{i:04d}"
                d.mkdir(parents=True, exist_ok=True)
                render_image(ex.image, w, h, d / "input.pgm")
                render_labels(ex.labels(), w, h, d / "truth.ppm")
                for it, g in enumerate(trace.gammas):
                    render_assignment(g, w, h, d / f"iter_{it:02d}.ppm", image=ex.image)
    print(f"bound {len(examples)} examples; traces in {out / 'traces.jsonl'}")
    return {"examples": len(examples)}


def cmd_eval(cfg):
    _, w, h, examples = _load_examples(cfg["dataset"], cfg["limit"])
    model = _load_model_for(cfg["model"], w * h)
    ks = [int(k) for k in str(cfg["ks"]).replace(",", " ").split()] or [cfg["K"]]
    out = Path(cfg["out"])
    rows, failed = [], 0
    for K in ks:
        report = score_dataset(model, examples, _rc_config(cfg, K))
        (out / f"scores_K{K}.csv").write_text(report.to_csv())
        s = report.summary()
        failed = max(failed, report.n_failed)
        rows.append({"K": K, "mean_ami": s["mean_ami"], "std_ami": s["std_ami"],
                     "mean_confidence": s["mean_confidence"], "mean_final_ll": s["mean_final_ll"],
                     "n_failed": report.n_failed})
        print(f"K={K:3d}  AMI {s['mean_ami']:.4f} +- {s['std_ami']:.4f}  failed {report.n_failed}")
    with open(out / "eval.csv", "w") as f:
        f.write("K,mean_ami,std_ami,mean_confidence,mean_final_ll,n_failed\n")
        for r in rows:
            f.write(f"{r['K']},{r['mean_ami']!r},{r['std_ami']!r},{r['mean_confidence']!r},"
                    f"{r['mean_final_ll']!r},{r['n_failed']}\n")
    (out / "eval.json").write_text(json.dumps({"rows": rows, "config": cfg}, indent=2, default=str))
    if failed > 0.01 * len(examples):
        raise RuntimeError(f"{failed} of {len(examples)} examples failed to score")
    return {"rows": rows}


def cmd_study(cfg):
    rows = loss_vs_score_study(
        cfg["dataset"], cfg["n_models"], cfg["hidden_size"], cfg["activation"], cfg["noise_p"],
        cfg["K"] or None, cfg["seed"], max_epochs=cfg["max_epochs"], patience=cfg["patience"],
        n_train=cfg["n_train"], n_val=cfg["n_val"], n_test=cfg["n_test"],
    )
    out = Path(cfg["out"])
    with open(out / "study.csv", "w") as f:
        f.write("index,learning_rate,status,val_loss,score\n")
        for r in rows:
            f.write(f"{r.index},{r.learning_rate!r},{r.status},{r.val_loss!r},{r.score!r}\n")
    ok = sum(r.status == "ok" for r in rows)
    print(f"trained {len(rows)} models ({ok} ok); wrote {out / 'study.csv'}")
    return {"models": len(rows), "ok": ok}


def cmd_generalize(cfg):
    model = load_model(cfg["model"])
    rc_cfg = _rc_config(cfg)
    out = Path(cfg["out"])
    lls = {}
    for path in cfg["images"]:
        pixels, w, h = read_binary_image(path)
        if pixels.size != model.n_input:
            raise ValueError(f"{path} has {w}x{h} pixels; model expects {model.n_input}")
        trace = run_rc(model, pixels, rc_cfg)
        stem = Path(path).stem
        render_image(pixels, w, h, out / f"{stem}_input.pgm")
        render_assignment(trace.gamma, w, h, out / f"{stem}_bound.ppm", image=pixels)
        lls[stem] = trace.final_ll
        print(f"{path}: {trace.n_iters} iterations, final log-likelihood {trace.final_ll:.3f}")
    return {"final_ll": lls}


def cmd_render(cfg):
    _, w, h, examples = _load_examples(cfg["dataset"])
    if not 0 <= cfg["index"] < len(examples):
        raise ValueError(f"index {cfg['index']} out of range for {len(examples)} examples")
    ex = examples[cfg["index"]]
    out = Path(cfg["out"])
    stem = f"example_{cfg['index']:04d}"
    render_image(ex.image, w, h, out / f"{stem}_input.pgm")
    render_labels(ex.labels(), w, h, out / f"{stem}_truth.ppm")
    metrics = {}
    if cfg["model"]:
        model = _load_model_for(cfg["model"], w * h)
        trace = run_rc(model, ex.image, _rc_config(cfg), rng=Rng(cfg["seed"]).child("rc_init", cfg["index"]))
        render_assignment(trace.gamma, w, h, out / f"{stem}_bound.ppm", image=ex.image)
        metrics = {"ami": ami(hard_labels(trace.gamma), ex.labels(), ex.eval_mask),
                   "confidence": confidence(trace.gamma, ex.eval_mask)}
    print(f"rendered example {cfg['index']} to {out}")
    return metrics


COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "search": cmd_search,
    "bind": cmd_bind,
    "eval": cmd_eval,
    "study": cmd_study,
    "generalize": cmd_generalize,
    "render": cmd_render,
}


def _add_options(p, command):
    p.add_argument("--seed", type=int)
    p.add_argument("--config", help="flat key = value file; flags override it")
    p.add_argument("--out", help="output directory (default: current directory)")
    for key, default in DEFAULTS[command].items():
        flag = "--" + key.replace("_", "-")
        if key == "images":
            p.add_argument("images", nargs="*", default=None)
        elif isinstance(default, bool):
            p.add_argument(flag, dest=key, action="store_const", const=True)
        elif isinstance(default, int):
            p.add_argument(flag, dest=key, type=int)
        elif isinstance(default, float):
            p.add_argument(flag, dest=key, type=float)
        else:
            p.add_argument(flag, dest=key)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rcbind", description="Reconstruction Clustering toolkit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "generate": "generate a benchmark dataset file",
        "train": "train a denoising autoencoder",
        "search": "random hyperparameter search",
        "bind": "run RC on a dataset and log per-iteration traces",
        "eval": "score RC over one or more cluster counts",
        "study": "loss-vs-score study over learning rates",
        "generalize": "run RC on arbitrary PGM images",
        "render": "render one dataset example (and optionally its binding)",
    }
    for name in COMMANDS:
        _add_options(sub.add_parser(name, help=helps[name]), name)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.command == "generalize" and not args.images:
        args.images = None
    try:
        cfg = resolve(args.command, args)
    except UsageError as e:
        parser.error(str(e))
    try:
        Path(cfg["out"]).mkdir(parents=True, exist_ok=True)
        _runlog(cfg, args.command)
        metrics = COMMANDS[args.command](cfg) or {}
        _runlog(cfg, args.command + ":done", **metrics)
    except (OSError, ValueError, RuntimeError, TrainingDiverged) as e:
        print(f"rcbind {args.command}: error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
