"""End-to-end experiment driver.

``run`` writes into the configured output directory:

* ``config.resolved.yaml``  the validated tree with every default filled in
* ``train_log.jsonl``       one record per epoch
* ``model.airw``            trained weights
* ``metrics.json``          the metrics report
* ``activations.csv``       per-epoch clean/noisy activation statistics
* ``activation_ranking.csv`` training examples ranked by final activation
* ``pr_curve.csv``          precision/recall at the requested cut-offs

All files are pure functions of the resolved configuration.
"""
import csv
import json
import logging
from pathlib import Path

import numpy as np

from . import data_io
from .config import derived_seed
from .losses import predict_scores
from .metrics import (
    MetricsReport,
    accuracy,
    activation_report,
    mean_average_precision,
    precision_recall_at_n,
)
from .noise import apply_noise, confusion_from_noise_level
from .sadmm import air_objective, train
from .sgd import objective_value, response_activations, sgd_train

log = logging.getLogger(__name__)


def load_dataset(cfg):
    """The full (clean) dataset named by the config, before splitting."""
    src = cfg.source
    block = cfg.tree["dataset"][src]
    if src == "blobs":
        seed = block["seed"] if block["seed"] is not None else derived_seed(cfg.seed, "data")
        data = data_io.generate_blobs(data_io.BlobSpec(
            block["n"], block["p"], block["num_classes"], block["separation"], block["stddev"], seed))
    elif src == "idx":
        data = data_io.load_idx(block["images"], block["labels"], block["num_classes"])
    else:
        data = data_io.load_features(block["features"], block["labels"], block["format"], block["num_classes"])
    limit = cfg.tree["dataset"]["limit"]
    if limit is not None and limit < data.n:
        keep = np.sort(np.random.default_rng(derived_seed(cfg.seed, "data")).choice(data.n, limit, replace=False))
        data = data.subset(keep)
    return data


def noisy_labels(cfg, data):
    """Apply the configured label noise to ``data``."""
    return apply_noise(data, cfg.tree["noise"], derived_seed(cfg.seed, "noise"))


def prepare(cfg):
    """Split, then corrupt the training labels; the test split stays clean."""
    data = load_dataset(cfg)
    train_set, test_set = data_io.split(data, cfg.tree["dataset"]["test_fraction"], derived_seed(cfg.seed, "split"))
    return noisy_labels(cfg, train_set), test_set


def fit(cfg, train_set, callback=None):
    """Train the configured solver; returns the TrainResult."""
    want = bool(cfg.tree["metrics"]["activations"])
    if cfg.solver == "air-sadmm":
        return train(train_set, cfg.sadmm_config(record_activations=want), callback=callback)
    return sgd_train(train_set, cfg.sgd_config(record_activations=want), callback=callback)


def final_objective(cfg, result, train_set):
    w = result.model
    if cfg.solver == "air-sadmm":
        return air_objective(w, result.problem, cfg.tree["regularizer"]["lambda1"], cfg.tree["threads"])
    return objective_value(w, train_set, cfg.sgd_config(), result.problem)


def final_activations(cfg, result, train_set):
    """Per-example activation of the final model on the training set.

    AIR-SADMM uses the auxiliary variable of each example's labelled group;
    the SGD solvers use ||x_i * w[:, y_i]||.
    """
    if result.activations:
        return result.activations[-1]
    if train_set.multilabel:
        return None
    return response_activations(result.model, train_set)


def evaluate(cfg, w, test_set, train_set=None, result=None):
    """Build the MetricsReport for weights ``w``."""
    report = MetricsReport()
    scores = predict_scores(w, test_set.features)
    truth = test_set.indicator(truth=True)
    if not test_set.multilabel:
        report.accuracy = accuracy(w, test_set)
    # cut-offs beyond the label count collapse onto n = C
    for n in sorted({min(n, test_set.num_classes) for n in cfg.tree["metrics"]["precision_at"]}):
        p, r, _ = precision_recall_at_n(scores, truth, n)
        report.precision_recall.append({"n": n, "precision": p, "recall": r})
    report.map_label, _ = mean_average_precision(scores, truth, axis="label")
    report.map_image, _ = mean_average_precision(scores, truth, axis="image")
    if result is not None and train_set is not None:
        report.objective = final_objective(cfg, result, train_set)
        report.residuals = [h.get("residual") for h in result.history if "residual" in h]
        if cfg.tree["metrics"]["activations"] and train_set.clean_mask is not None:
            act = final_activations(cfg, result, train_set)
            if act is not None:
                report.activation = activation_report(act, train_set.clean_mask, result.activations)
    return report


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        out.writerows(rows)


def write_artifacts(out, cfg, result, report):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.resolved.yaml").write_text(cfg.dump())
    with open(out / "train_log.jsonl", "w") as fh:
        for rec in result.history:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    data_io.save_model(out / "model.airw", result.model)
    body = report.to_dict()
    act = body.get("activation")
    if act is not None:
        ranking = act.pop("ranking")
        epochs = act.pop("epochs")
        _write_csv(out / "activation_ranking.csv", ["rank", "example", "activation", "clean"],
                   [[r["rank"], r["example"], repr(r["activation"]), int(r["clean"])] for r in ranking])
        keys = ["epoch", "mean_clean", "std_clean", "mean_noisy", "std_noisy", "gap", "auc"]
        _write_csv(out / "activations.csv", keys, [[e[k] for k in keys] for e in epochs])
        if epochs:
            act["first_epoch_auc"] = epochs[0]["auc"]
    _write_csv(out / "pr_curve.csv", ["n", "precision", "recall"],
               [[r["n"], repr(r["precision"]), repr(r["recall"])] for r in report.precision_recall])
    (out / "metrics.json").write_text(json.dumps(body, sort_keys=True, indent=2) + "\n")


def run(cfg, output=None):
    """Prepare data, train, evaluate and write every artifact; returns the metrics dict."""
    out = Path(output or cfg.tree["output"])
    train_set, test_set = prepare(cfg)
    log.info("run %s: n_train=%d n_test=%d p=%d C=%d seed=%d",
             cfg.solver, train_set.n, test_set.n, train_set.p, train_set.num_classes, cfg.seed)
    result = fit(cfg, train_set, callback=lambda rec: log.info("epoch %s", json.dumps(rec, sort_keys=True)))
    # score with the weights as stored so that a later `eval` reproduces these numbers
    stored = result.model.astype(np.float32).astype(np.float64)
    report = evaluate(cfg, stored, test_set, train_set, result)
    write_artifacts(out, cfg, result, report)
    log.info("accuracy %.4f -> %s", report.accuracy if report.accuracy is not None else float("nan"), out)
    return json.loads((out / "metrics.json").read_text())


def _sweep_override(cfg, axis, value, solver, seed, out):
    if axis == "noise_level":
        kind = cfg.tree["noise"]["kind"]
        key = "noise__fraction" if kind == "flip" else "noise__level"
        extra = {key: value}
        if kind == "none":
            extra["noise__kind"] = "confusion"
        return cfg.with_overrides(seed=seed, output=str(out), solver=solver, **extra)
    return cfg.with_overrides(seed=seed, output=str(out), solver=solver, regularizer__subsample_fraction=value)


def sweep(cfg, output=None):
    """Repeat ``run`` over the sweep axis, seeds and solvers; writes ``sweep.csv``.

    Returns the table rows as dicts.
    """
    spec = cfg.tree["sweep"]
    base = Path(output or cfg.tree["output"])
    values = spec["values"] or ([cfg.tree["noise"]["level"]] if spec["axis"] == "noise_level"
                                else [cfg.tree["regularizer"]["subsample_fraction"]])
    seeds = spec["seeds"] or [cfg.seed]
    solvers = spec["solvers"] or [cfg.solver]
    rows = []
    for solver in solvers:
        for value in values:
            for seed in seeds:
                out = base / solver / f"{spec['axis']}={value}" / f"seed={seed}"
                run_cfg = _sweep_override(cfg, spec["axis"], value, solver, seed, out)
                m = run(run_cfg, out)
                act = m.get("activation") or {}
                rows.append({
                    "solver": solver, "value": value, "seed": seed, "accuracy": m["accuracy"],
                    "gap": act.get("gap"), "auc": act.get("auc"),
                })
    _write_csv(base / "sweep.csv", ["solver", "value", "seed", "accuracy", "gap", "auc"],
               [[r["solver"], r["value"], r["seed"], repr(r["accuracy"]), repr(r["gap"]), repr(r["auc"])]
                for r in rows])
    return rows


def write_dataset(out, data):
    """Binary feature/label files plus, when known, the true labels and clean mask."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    data_io.write_features(out / "features.airf", data.features)
    data_io.write_labels(out / "labels.airl", data.labels, data.num_classes)
    if data.clean_mask is not None:
        _write_csv(out / "clean_mask.csv", ["example", "clean", "true_label", "label"],
                   [[i, int(c), int(t), int(y)] for i, (c, t, y)
                    in enumerate(zip(data.clean_mask, data.true_labels, data.labels))])


def confusion_for(cfg, num_classes):
    n = cfg.tree["noise"]
    if n["kind"] != "confusion":
        return None
    return confusion_from_noise_level(num_classes, n["level"], n["convention"])
