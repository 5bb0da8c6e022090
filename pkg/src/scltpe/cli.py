"""Command-line experiment harness.

Every command is a pure function of its configuration and seed: re-running
it writes identical CSV and JSON files apart from the wall-clock fields
(``elapsed_s`` in history CSVs, ``wall_s`` in ``best.json``).

Exit codes: 0 success, 2 invalid configuration or input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields
from pathlib import Path

import numpy as np

from .checkpoint import load_model, save_model
from .classifier import write_proba_csv
from .config import ExperimentConfig, build_config, read_config_file, write_config
from .data import Dataset, load_dataset, resolve_path
from .exceptions import ConfigError, DimensionError, NumericalError, SclTpeError
from .hpo import (
    TpeConfig, best_summary, fixed_search, ga_search, grid_search, random_search,
    tpe_optimize, write_history_csv,
)
from .metrics import report
from .pipeline import Model, make_objective, make_splits, train_model
from .resample import SamplerConfig, knn_predict, resample
from .scl import encode, write_loss_trace

log = logging.getLogger("scltpe")

OUTPUT_ENV = "SCLTPE_OUTPUT_DIR"
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
COMPARE_OPTIMIZERS = ("tpe", "random", "grid", "ga")


# ----------------------------------------------------------------------
# helpers


def _dump_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2) + "\n")


def _load_checked(cfg: ExperimentConfig) -> Dataset:
    """Load the configured dataset and validate the config against it."""
    cfg.validate()
    try:
        ds = load_dataset(cfg.dataset_path(), cfg.format)
    except FileNotFoundError as exc:
        raise ConfigError(f"dataset: {exc}") from None
    cfg.validate(ds)
    return ds


def run_hpo(kind: str, cfg: ExperimentConfig, objective, seed: int):
    """Dispatch to one optimizer; returns ``(best_trial, history)``."""
    if kind == "tpe":
        tcfg = TpeConfig(cfg.bounds, cfg.gamma, cfg.n_startup, cfg.n_candidates, cfg.log_scale)
        return tpe_optimize(objective, tcfg, cfg.T, seed)
    if kind == "random":
        return random_search(objective, cfg.bounds, cfg.T, seed, cfg.log_scale)
    if kind == "grid":
        return grid_search(objective, cfg.grid_bounds, cfg.grid_step, seed)
    if kind == "ga":
        return ga_search(objective, cfg.bounds, cfg.ga_population, cfg.ga_generations, seed)
    if kind == "fixed":
        return fixed_search(objective, cfg.tau, seed)
    raise ConfigError(f"hpo: unknown optimizer {kind!r}")


def _write_model_outputs(model: Model, splits, out: Path, extra: dict) -> dict:
    save_model(model, out / "model.json", extra)
    write_loss_trace(model.encoder.loss_trace, out / "loss_trace.csv")
    test_proba = model.proba_normalized(splits.test.X)
    write_proba_csv(test_proba, splits.test.y, out / "test_proba.csv", model.class_names)
    test_rep = report(test_proba, splits.test.y, positive_class=model._pos())
    train_rep = model.evaluate(splits.train)
    _dump_json(test_rep.to_dict(), out / "report.json")
    _dump_json(train_rep.to_dict(), out / "train_report.json")
    return {"test": test_rep.to_dict(), "train": train_rep.to_dict()}


# ----------------------------------------------------------------------
# commands


def cmd_tune(cfg: ExperimentConfig, out: Path) -> dict:
    """Search tau, keep the history, then rebuild and save the best model."""
    ds = _load_checked(cfg)
    t0 = time.perf_counter()
    splits = make_splits(ds, cfg.test_fraction, cfg.seed, cfg.tune_split)
    pcfg = cfg.pipeline()
    best, history = run_hpo(cfg.hpo, cfg, make_objective(pcfg, splits), cfg.seed)
    write_history_csv(history, out / "history.csv")
    # trials are deterministic in (tau, seed), so retraining reproduces the best one
    model = train_model(best.tau, splits, pcfg, best.seed)
    reports = _write_model_outputs(model, splits, out, {"trial_seed": best.seed})
    summary = {
        **best_summary(history, time.perf_counter() - t0), "trial_seed": best.seed,
        "optimizer": cfg.hpo, "tune_split": cfg.tune_split,
        "test_auc": reports["test"]["auc_or_mauc"],
    }
    _dump_json(summary, out / "best.json")
    return summary


def cmd_train(cfg: ExperimentConfig, out: Path, tau: float | None = None) -> dict:
    """One contrastive + classifier run at a fixed tau."""
    ds = _load_checked(cfg)
    tau = cfg.tau if tau is None else tau
    splits = make_splits(ds, cfg.test_fraction, cfg.seed, cfg.tune_split)
    model = train_model(tau, splits, cfg.pipeline(), cfg.seed)
    reports = _write_model_outputs(model, splits, out, {"trial_seed": cfg.seed})
    return {"tau": tau, **reports}


def _load_eval_inputs(checkpoint, dataset, fmt=None):
    model = load_model(checkpoint)
    ds = load_dataset(resolve_path(dataset), fmt, class_names=model.class_names)
    d_expected = model.stats.mean.shape[0]
    if ds.d != d_expected:
        raise DimensionError(f"checkpoint expects {d_expected} features, {dataset} has {ds.d}")
    return model, ds


def cmd_eval(checkpoint, dataset, out: Path, fmt=None) -> dict:
    model, ds = _load_eval_inputs(checkpoint, dataset, fmt)
    proba = model.proba(ds.X)
    rep = report(proba, ds.y, positive_class=model._pos()).to_dict()
    _dump_json(rep, out / "eval_report.json")
    return rep


def cmd_export_embeddings(checkpoint, dataset, out: Path, fmt=None) -> Path:
    model, ds = _load_eval_inputs(checkpoint, dataset, fmt)
    Z = encode(model.encoder, model.normalize(ds.X))
    path = out / "embeddings.csv"
    write_embeddings_csv(Z, ds.y, model.class_names, path)
    return path


def write_embeddings_csv(Z, y, class_names, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id"] + [f"e{j}" for j in range(Z.shape[1])] + ["label"])
        for i, (row, label) in enumerate(zip(Z, y)):
            w.writerow([i] + [repr(float(v)) for v in row] + [class_names[label]])


def read_embeddings_csv(path):
    """Inverse of :func:`write_embeddings_csv`: ``(ids, Z, labels)``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    ids = np.array([int(r[0]) for r in rows], dtype=np.int64)
    Z = np.array([[float(v) for v in r[1:-1]] for r in rows], dtype=np.float64)
    return ids, Z.reshape(len(rows), -1), [r[-1] for r in rows]


def _compare_one(cfg: ExperimentConfig, ds: Dataset, seed: int, optimizers) -> list[dict]:
    splits = make_splits(ds, cfg.test_fraction, seed, cfg.tune_split)
    objective = make_objective(cfg.pipeline(), splits)
    rows = []
    for opt in optimizers:
        best, history = run_hpo(opt, cfg, objective, seed)
        rows.append({"seed": seed, "optimizer": opt, "best_tau": best.tau, "best_auc": best.auc,
                     "evaluations": len(history), "history": history})
    return rows


def _quantiles(values):
    v = np.asarray(values, dtype=np.float64)
    q = np.quantile(v, [0.0, 0.25, 0.5, 0.75, 1.0])
    return dict(zip(("min", "q1", "median", "q3", "max"), (float(x) for x in q)))


def summarize_compare(rows) -> dict:
    """Per-optimizer quartiles of the best AUC; recomputable from the CSV."""
    out = {}
    for opt in dict.fromkeys(r["optimizer"] for r in rows):
        mine = [r for r in rows if r["optimizer"] == opt]
        out[opt] = {**_quantiles([r["best_auc"] for r in mine]), "replicas": len(mine),
                    "evaluations": mine[0]["evaluations"]}
    return out


def cmd_compare_hpo(cfg: ExperimentConfig, out: Path, optimizers=COMPARE_OPTIMIZERS, workers=1) -> dict:
    """All optimizers on ``replicas`` seeds (``seed``, ``seed + 1``, ...)."""
    ds = _load_checked(cfg)
    for opt in optimizers:
        if opt not in COMPARE_OPTIMIZERS:
            raise ConfigError(f"optimizers: unknown optimizer {opt!r}; known: {COMPARE_OPTIMIZERS}")
    seeds = [cfg.seed + r for r in range(cfg.replicas)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_seed = list(pool.map(_compare_one, [cfg] * len(seeds), [ds] * len(seeds), seeds,
                                     [tuple(optimizers)] * len(seeds)))
    else:
        per_seed = [_compare_one(cfg, ds, s, optimizers) for s in seeds]
    rows = [r for group in per_seed for r in group]  # seed order, then optimizer order
    hist_dir = out / "histories"
    hist_dir.mkdir(exist_ok=True)
    for r in rows:
        write_history_csv(r["history"], hist_dir / f"{r['optimizer']}_seed{r['seed']}.csv")
    with open(out / "compare.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["seed", "optimizer", "best_tau", "best_auc", "evaluations"])
        for r in rows:
            w.writerow([r["seed"], r["optimizer"], repr(r["best_tau"]), repr(r["best_auc"]), r["evaluations"]])
    summary = summarize_compare(rows)
    _dump_json(summary, out / "summary.json")
    return summary


def read_compare_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [{"seed": int(r["seed"]), "optimizer": r["optimizer"], "best_tau": float(r["best_tau"]),
                 "best_auc": float(r["best_auc"]), "evaluations": int(r["evaluations"])}
                for r in csv.DictReader(fh)]


def baseline_run(cfg: ExperimentConfig, ds: Dataset, seed: int, sampler: str) -> dict:
    """Resample the normalized training split, then KNN on the test split."""
    splits = make_splits(ds, cfg.test_fraction, seed, "test")
    train = resample(splits.train, SamplerConfig(sampler, cfg.smote_k, seed))
    k = min(cfg.knn_k, train.n)
    _, proba = knn_predict(train, splits.test.X, k)
    pos = splits.train.minority_class() if ds.n_classes == 2 else None
    return report(proba, splits.test.y, positive_class=pos).to_dict()


def cmd_baseline(cfg: ExperimentConfig, out: Path) -> dict:
    ds = _load_checked(cfg)
    seeds = [cfg.seed + r for r in range(cfg.replicas)]
    reports = {s: {seed: baseline_run(cfg, ds, seed, s) for seed in seeds} for s in cfg.samplers}
    bdir = out / "baseline"
    bdir.mkdir(exist_ok=True)
    for s, per_seed in reports.items():
        for seed, rep in per_seed.items():
            _dump_json(rep, bdir / f"{s}_seed{seed}.json")
    keys = ("accuracy", "macro_f", "macro_gmean", "auc_or_mauc")
    summary = {
        s: {f"median_{k}": float(np.median([rep[k] for rep in per_seed.values()])) for k in keys}
        for s, per_seed in reports.items()
    }
    _dump_json(summary, out / "baseline_summary.json")
    return summary


# ----------------------------------------------------------------------
# argument parsing


def _add_config_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="flat key = value configuration file")
    g = p.add_argument_group("configuration overrides (any config key, kebab-case)")
    for f in fields(ExperimentConfig):
        if f.name == "explicit":
            continue
        flag = "--" + f.name.replace("_", "-")
        names = [flag]
        if f.name == "loss_kind":
            names.append("--loss")
        if f.name == "T":
            names = ["--T", "--budget"]
        g.add_argument(*names, dest=f.name, default=None, metavar="VALUE")


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--output-dir", help=f"where outputs go (default: ${OUTPUT_ENV} or ./runs)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scl-tpe",
        description="Contrastive embeddings with a temperature tuned by TPE, for imbalanced tables.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("tune", "search the temperature and save the best model"),
        ("train", "train one model at a fixed temperature"),
        ("compare-hpo", "TPE / random / grid / GA over several seeds"),
        ("baseline", "resampling + KNN baselines"),
    ):
        p = sub.add_parser(name, help=help_)
        _add_common(p)
        _add_config_flags(p)
        if name == "compare-hpo":
            p.add_argument("--optimizers", default=",".join(COMPARE_OPTIMIZERS))
            p.add_argument("--workers", type=int, default=1)
    for name, help_ in (("eval", "evaluate a saved model on a dataset"),
                        ("export-embeddings", "write encoder outputs for a dataset as CSV")):
        p = sub.add_parser(name, help=help_)
        _add_common(p)
        p.add_argument("--checkpoint", required=True)
        p.add_argument("--dataset", required=True)
        p.add_argument("--format", default=None, choices=("keel", "csv"))
    return parser


def _config_from_args(args) -> ExperimentConfig:
    overrides = {f.name: getattr(args, f.name) for f in fields(ExperimentConfig)
                 if f.name != "explicit" and getattr(args, f.name, None) is not None}
    file_values = read_config_file(args.config) if args.config else {}
    cfg = build_config(file_values, overrides)
    cfg.validate()
    return cfg


def _output_dir(args) -> Path:
    out = Path(args.output_dir or os.environ.get(OUTPUT_ENV) or "runs")
    out.mkdir(parents=True, exist_ok=True)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        if args.command in ("eval", "export-embeddings"):
            out = _output_dir(args)
            if args.command == "eval":
                result = cmd_eval(args.checkpoint, args.dataset, out, args.format)
            else:
                result = {"embeddings": str(cmd_export_embeddings(args.checkpoint, args.dataset, out,
                                                                  args.format))}
        else:
            cfg = _config_from_args(args)
            out = _output_dir(args)
            write_config(cfg, out / "config.cfg")
            if args.command == "tune":
                result = cmd_tune(cfg, out)
            elif args.command == "train":
                result = cmd_train(cfg, out)
            elif args.command == "compare-hpo":
                opts = tuple(o.strip().lower() for o in args.optimizers.split(",") if o.strip())
                result = cmd_compare_hpo(cfg, out, opts, args.workers)
            else:
                result = cmd_baseline(cfg, out)
    except NumericalError as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (SclTpeError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(json.dumps(result, indent=2))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
