"""Command-line pipeline: generate, train, eval, predict, verify.

Configuration comes from an optional INI file (sections [physics],
[dataset], [model], [train], [paths]) with command-line flags taking
precedence; the resolved configuration is hashed (sha256) and the hash plus
seed are embedded in every artifact.  The NOISESPEC_SEED environment
variable is the seed fallback when neither flag nor file provide one.

Exit codes: 0 success, 2 usage/validation error, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, dataset, metrics, svg
from .ml import forest, nn, svr

TASK_ALIASES = {
    "s-class": ("s_class", "class"),
    "s_class": ("s_class", "class"),
    "eta": ("eta", "eta"),
    "alpha": ("alpha", "alpha"),
    "log-alpha": ("alpha", "log_alpha"),
    "log_alpha": ("alpha", "log_alpha"),
    "sigma-alpha": ("alpha", "sigma_alpha"),
    "sigma_alpha": ("alpha", "sigma_alpha"),
}

MODEL_KINDS = ("forest", "svr", "ffnn")


class UsageError(ValueError):
    """Invalid arguments or configuration (exit code 2)."""


def config_hash(resolved: dict) -> str:
    text = json.dumps(resolved, sort_keys=True, default=str)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _load_ini(path):
    if path is None:
        return {}
    if not Path(path).exists():
        raise UsageError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    parser.read(path)
    out = {}
    for section in parser.sections():
        out[section] = dict(parser[section])
    return out


def _resolve_seed(args, ini):
    if getattr(args, "seed", None) is not None:
        return args.seed
    if "dataset" in ini and "seed" in ini["dataset"]:
        return int(ini["dataset"]["seed"])
    env = os.environ.get("NOISESPEC_SEED")
    if env is not None:
        return int(env)
    return 0


def _write(path, text):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(text)


def _r(x):
    """Shortest round-trip decimal for CSV cells (plain float repr)."""
    return repr(float(x))


def _validated(cls, **kwargs):
    try:
        return cls(**kwargs)
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from exc


def _resolve_out(args, ini, key="out"):
    if args.out is not None:
        return args.out
    paths = ini.get("paths", {})
    if key in paths:
        return paths[key]
    raise UsageError("--out not given and no [paths] entry in the config file")


# ---------------------------------------------------------------------------

def cmd_generate(args) -> int:
    ini = _load_ini(args.config)
    if args.task not in TASK_ALIASES:
        raise UsageError(f"unknown task {args.task!r}")
    task, default_target = TASK_ALIASES[args.task]
    if args.n < 1:
        raise UsageError("--n must be >= 1")
    seed = _resolve_seed(args, ini)

    physics = {}
    phys_ini = ini.get("physics", {})
    for key in ("omega_c", "eta", "gamma"):
        if getattr(args, key if key != "omega_c" else "omega_c", None) is not None:
            physics[key] = getattr(args, key)
        elif key in phys_ini:
            physics[key] = float(phys_ini[key])
    dset_ini = ini.get("dataset", {})
    if args.interval is not None:
        physics["interval"] = tuple(args.interval)
    elif "interval_lo" in dset_ini and "interval_hi" in dset_ini:
        physics["interval"] = (float(dset_ini["interval_lo"]),
                               float(dset_ini["interval_hi"]))

    resolved = {"command": "generate", "task": task,
                "requested_task": args.task, "mode": args.mode, "n": args.n,
                "seed": seed, "physics": physics, "version": __version__}
    digest = config_hash(resolved)

    out_dir = _resolve_out(args, ini)
    ds = dataset.generate(task, args.mode, args.n, seed,
                          workers=args.workers, physics=physics or None)
    ds = dataset.split(ds, seed)
    ds.meta["requested_task"] = TASK_ALIASES[args.task][1] if task == "alpha" else task
    ds.meta["default_target"] = default_target
    ds.meta["config_hash"] = digest
    dataset.save_dataset(ds, out_dir)

    counts = {name: int(len(ds.rows(name))) for name in ("train", "val", "test")}
    print(f"dataset written to {out_dir}")
    print(f"  task={task} mode={args.mode} n={ds.n_rows} seed={seed} "
          f"config_hash={digest}")
    print(f"  split sizes: {counts}")
    if "class" in ds.targets:
        binc = np.bincount(ds.targets["class"], minlength=3)
        print(f"  class counts: {binc.tolist()}")
    return 0


def _target_for(ds, args_target):
    if args_target is not None:
        name = args_target.replace("-", "_")
        if name == "class":
            return "class"
        if name not in ds.targets:
            raise UsageError(
                f"dataset has no target {name!r}; available: {list(ds.targets)}")
        return name
    return ds.meta.get("default_target", ds.task if ds.task != "s_class" else "class")


def cmd_train(args) -> int:
    ini = _load_ini(args.config)
    ds = dataset.load_dataset(args.dataset)
    target = _target_for(ds, args.target)
    is_classification = target == "class"
    if args.model == "ffnn":
        task_kind = "classification" if is_classification else "regression"
    elif is_classification:
        raise UsageError(
            f"model {args.model!r} is regression-only; the classification "
            f"task needs --model ffnn")
    seed = _resolve_seed(args, ini)
    model_ini = ini.get("model", {})
    train_ini = ini.get("train", {})

    def opt(flag, section, key, cast):
        val = getattr(args, flag, None)
        if val is not None:
            return val
        if key in section:
            return cast(section[key])
        return None

    y = ds.target_column("s_class" if is_classification else target)
    X = ds.features
    train_idx = ds.rows("train")
    val_idx = ds.rows("val")
    if train_idx.size == 0:
        raise UsageError("dataset has no train split; regenerate or re-split")

    resolved = {"command": "train", "model": args.model, "target": target,
                "seed": seed, "dataset_hash": ds.meta.get("hashes"),
                "version": __version__}
    loss_csv_rows = None
    summary_lines = []

    if args.model == "forest":
        cfg = _validated(forest.ForestConfig,
            n_estimators=opt("n_estimators", model_ini, "n_estimators", int) or 100,
            min_samples_split=opt("min_samples_split", model_ini,
                                  "min_samples_split", int) or 2,
            max_depth=opt("max_depth", model_ini, "max_depth", int),
            max_features=opt("max_features", model_ini, "max_features", int),
            seed=seed)
        resolved["config"] = cfg.__dict__
        model = forest.fit_forest(X[train_idx], y[train_idx], cfg)
        inner = forest.forest_to_json(model)
        pred_tr = forest.predict_forest(model, X[train_idx])
        summary_lines.append(
            f"train mse = {_r(np.mean((pred_tr - y[train_idx]) ** 2))}")
    elif args.model == "svr":
        cfg = _validated(svr.SvrConfig,
            kernel=opt("kernel", model_ini, "kernel", str) or "rbf",
            C=opt("C", model_ini, "c", float) or 1.0,
            epsilon=opt("epsilon", model_ini, "epsilon", float) or 0.01,
            gamma_k=opt("gamma_k", model_ini, "gamma_k", float),
            degree=opt("degree", model_ini, "degree", int) or 3,
            coef0=opt("coef0", model_ini, "coef0", float) or 1.0,
            tol=opt("tol", model_ini, "tol", float) or 1e-3,
            max_passes=opt("max_passes", model_ini, "max_passes", int) or 200)
        resolved["config"] = cfg.__dict__
        model = svr.fit_svr(X[train_idx], y[train_idx], cfg)
        inner = svr.svr_to_json(model)
        summary_lines.append(f"converged = {model.converged}")
        summary_lines.append(f"n_support_vectors = {len(model.coef)}")
        summary_lines.append(
            f"dual objective: first = {_r(model.objective_curve[0])}, "
            f"last = {_r(model.objective_curve[-1])}")
    else:
        cfg = _validated(nn.NetConfig,
            task=task_kind,
            learning_rate=opt("learning_rate", train_ini, "learning_rate",
                              float) or 1e-5,
            batch_size=opt("batch_size", train_ini, "batch_size", int) or 64,
            epochs=opt("epochs", train_ini, "epochs", int) or 500,
            seed=seed)
        resolved["config"] = {"task": cfg.task, "learning_rate": cfg.learning_rate,
                              "batch_size": cfg.batch_size, "epochs": cfg.epochs,
                              "seed": cfg.seed}
        result = nn.train(X, y, cfg,
                          splits={"train": train_idx, "val": val_idx})
        model = result.model
        inner = nn.net_to_json(model)
        loss_csv_rows = [(e, _r(result.loss_curve[e]), _r(result.val_curve[e]))
                         for e in range(cfg.epochs)]
        summary_lines.append(f"final epoch loss = {_r(result.loss_curve[-1])}")

    digest = config_hash(resolved)
    out_file = _resolve_out(args, ini)
    artifact = {
        "model_kind": args.model,
        "target": target,
        "dataset_task": ds.task,
        "seed": seed,
        "config_hash": digest,
        "version": __version__,
        "model": json.loads(inner),
    }
    _write(out_file, json.dumps(artifact) + "\n")
    out_base = Path(out_file)
    log_path = out_base.with_suffix(".log.txt")
    lines = [f"model = {args.model}", f"target = {target}",
             f"dataset = {args.dataset}", f"seed = {seed}",
             f"config_hash = {digest}"] + summary_lines
    _write(log_path, "\n".join(lines) + "\n")
    if loss_csv_rows is not None:
        loss_path = out_base.with_suffix(".loss.csv")
        with open(loss_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "train_loss", "val_metric"])
            writer.writerows(loss_csv_rows)
        if args.svg:
            losses = [float(r[1]) for r in loss_csv_rows]
            _write(out_base.with_suffix(".loss.svg"),
                   svg.line_chart(np.arange(len(losses)), losses,
                                  "training cost per epoch", "epoch", "cost",
                                  log_y=True))
    print(f"model written to {out_file} (config_hash={digest})")
    return 0


def _load_model_artifact(path):
    with open(path) as fh:
        artifact = json.load(fh)
    kind = artifact.get("model_kind")
    inner = json.dumps(artifact["model"])
    if kind == "forest":
        model = forest.forest_from_json(inner)
    elif kind == "svr":
        model = svr.svr_from_json(inner)
    elif kind == "ffnn":
        model = nn.net_from_json(inner)
    else:
        raise UsageError(f"unrecognized model file {path}")
    return artifact, model


def _model_predict(artifact, model, X):
    kind = artifact["model_kind"]
    if kind == "forest":
        return forest.predict_forest(model, X)
    if kind == "svr":
        return svr.predict_svr(model, X)
    return nn.predict(model, X)


def cmd_eval(args) -> int:
    ini = _load_ini(args.config)
    artifact, model = _load_model_artifact(args.model)
    ds = dataset.load_dataset(args.dataset)
    target = artifact["target"]
    is_classification = target == "class"
    if is_classification and "class" not in ds.targets:
        raise UsageError(
            "task mismatch: classification model but the dataset has no "
            f"class labels (targets: {list(ds.targets)})")
    if not is_classification and target not in ds.targets:
        raise UsageError(
            f"task mismatch: model predicts {target!r} but the dataset has "
            f"targets {list(ds.targets)}")
    idx = ds.rows(args.split)
    if idx.size == 0:
        raise UsageError(f"dataset has no rows in split {args.split!r}")
    X = ds.features[idx]
    y = ds.target_column("s_class" if is_classification else target)[idx]
    pred = _model_predict(artifact, model, X)

    out = Path(_resolve_out(args, ini))
    out.mkdir(parents=True, exist_ok=True)
    digest = artifact.get("config_hash", "")
    header = [f"model = {args.model}", f"dataset = {args.dataset}",
              f"split = {args.split}", f"target = {target}",
              f"seed = {artifact.get('seed')}", f"config_hash = {digest}"]

    with open(out / "predicted_vs_true.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        if is_classification:
            proba = nn.predict_proba(model, X)
            writer.writerow(["row_id", "true", "predicted", "p0", "p1", "p2"])
            for r, (t, p, pr) in enumerate(zip(y, pred, proba)):
                writer.writerow([int(idx[r]), int(t), int(p),
                                 _r(pr[0]), _r(pr[1]), _r(pr[2])])
        else:
            writer.writerow(["row_id", "true", "predicted"])
            for r, (t, p) in enumerate(zip(y, pred)):
                writer.writerow([int(idx[r]), repr(float(t)), repr(float(p))])

    if is_classification:
        rep = metrics.classification_metrics(y, pred)
        table = [["Class", "Precision", "Recall", "F1-Score"]]
        for c in range(3):
            table.append([str(c), _r(rep.precision[c]), _r(rep.recall[c]),
                          _r(rep.f1[c])])
        table.append(["Average", _r(rep.macro_precision),
                      _r(rep.macro_recall), _r(rep.macro_f1)])
        with open(out / "report.csv", "w", newline="") as fh:
            csv.writer(fh).writerows(table)
        np.savetxt(out / "confusion.csv", rep.confusion, fmt="%d", delimiter=",")
        with open(out / "confusion_normalized.csv", "w", newline="") as fh:
            csv.writer(fh).writerows(
                [[_r(v) for v in row] for row in rep.confusion_normalized])
        if args.svg:
            _write(out / "confusion.svg",
                   svg.heatmap(rep.confusion_normalized,
                               "normalized confusion matrix"))
        body = [f"accuracy = {_r(rep.accuracy)}"]
        for row in table:
            body.append("  ".join(str(x) for x in row))
        print(f"accuracy = {rep.accuracy:.4f}  macro F1 = {rep.macro_f1:.4f}")
    else:
        rep = metrics.regression_metrics(y, pred)
        rows = rep.rows()
        with open(out / "report.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["metric", "value"])
            writer.writerows(rows)
        body = [f"{k} = {v}" for k, v in rows]
        r2s = "undefined" if rep.r2 is None else f"{rep.r2:.6f}"
        print(f"mse = {rep.mse:.6g}  mae = {rep.mae:.6g}  r2 = {r2s}")
    _write(out / "report.txt", "\n".join(header + body) + "\n")
    return 0


def cmd_predict(args) -> int:
    ini = _load_ini(args.config)
    artifact, model = _load_model_artifact(args.model)
    with open(args.features, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            header = None
        rows = [[float(x) for x in row] for row in reader]
    if header is not None and len(header) != dataset.N_FEATURES:
        raise UsageError(
            f"feature file has width {len(header)}, expected {dataset.N_FEATURES}")
    out_path = Path(_resolve_out(args, ini))
    is_classification = artifact["target"] == "class"
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if is_classification:
            writer.writerow(["row_id", "predicted", "p0", "p1", "p2"])
        else:
            writer.writerow(["row_id", "predicted"])
        if rows:
            X = np.asarray(rows)
            pred = _model_predict(artifact, model, X)
            if is_classification:
                proba = nn.predict_proba(model, X)
                for i, (p, pr) in enumerate(zip(pred, proba)):
                    writer.writerow([i, int(p), _r(pr[0]), _r(pr[1]),
                                     _r(pr[2])])
            else:
                for i, p in enumerate(pred):
                    writer.writerow([i, _r(p)])
    print(f"predictions written to {out_path}")
    return 0


def cmd_verify(args) -> int:
    ok = dataset.verify_dataset(args.dataset)
    if ok:
        print("dataset hashes match")
        return 0
    print("dataset hash MISMATCH", file=sys.stderr)
    return 1


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="noisespec",
        description="Dissipative-TLS trajectory generation and ML noise "
                    "spectroscopy")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI configuration file")
    common.add_argument("--seed", type=int, default=None,
                        help="seed (fallback: config file, then NOISESPEC_SEED)")

    g = sub.add_parser("generate", parents=[common],
                       help="generate a labeled trajectory dataset")
    g.add_argument("--task", required=True,
                   choices=sorted(TASK_ALIASES))
    g.add_argument("--mode", default="continuous",
                   choices=["separated", "continuous"])
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--out", default=None)
    g.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    g.add_argument("--omega-c", dest="omega_c", type=float, default=None)
    g.add_argument("--eta", type=float, default=None,
                   help="fixed eta for the classification task")
    g.add_argument("--gamma", type=float, default=None)
    g.add_argument("--interval", type=float, nargs=2, default=None,
                   metavar=("LO", "HI"))
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", parents=[common], help="fit a model")
    t.add_argument("--dataset", required=True)
    t.add_argument("--model", required=True, choices=MODEL_KINDS)
    t.add_argument("--out", default=None)
    t.add_argument("--target", default=None,
                   help="target column (default: the dataset's task)")
    t.add_argument("--n-estimators", dest="n_estimators", type=int)
    t.add_argument("--min-samples-split", dest="min_samples_split", type=int)
    t.add_argument("--max-depth", dest="max_depth", type=int)
    t.add_argument("--max-features", dest="max_features", type=int)
    t.add_argument("--kernel", choices=["linear", "rbf", "poly"])
    t.add_argument("--C", dest="C", type=float)
    t.add_argument("--epsilon", type=float)
    t.add_argument("--gamma-k", dest="gamma_k", type=float)
    t.add_argument("--degree", type=int)
    t.add_argument("--coef0", type=float)
    t.add_argument("--tol", type=float)
    t.add_argument("--max-passes", dest="max_passes", type=int)
    t.add_argument("--learning-rate", dest="learning_rate", type=float)
    t.add_argument("--batch-size", dest="batch_size", type=int)
    t.add_argument("--epochs", type=int)
    t.add_argument("--svg", action="store_true",
                   help="also render the loss curve as SVG (ffnn)")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", parents=[common], help="evaluate a model")
    e.add_argument("--model", required=True)
    e.add_argument("--dataset", required=True)
    e.add_argument("--split", default="test", choices=["train", "val", "test"])
    e.add_argument("--out", default=None)
    e.add_argument("--svg", action="store_true",
                   help="also render the confusion matrix as SVG")
    e.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", parents=[common],
                       help="predict from a feature CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_predict)

    v = sub.add_parser("verify", parents=[common],
                       help="recompute and compare dataset hashes")
    v.add_argument("--dataset", required=True)
    v.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, TypeError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
