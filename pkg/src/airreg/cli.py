"""Command line entry point: ``airreg <command> --config FILE [--seed N] [--out DIR] [--threads N]``.

Exit codes: 0 success, 1 unreadable or malformed data, 2 invalid
configuration, 3 solver divergence.
"""
import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import config, harness
from .data_io import load_model
from .errors import AirError, ConfigError, DivergenceError
from .metrics import activation_report
from .noise import format_confusion
from .sgd import response_activations

log = logging.getLogger("airreg")

LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


def _setup_logging():
    name = os.environ.get("AIR_LOG_LEVEL", "info").lower()
    logging.basicConfig(level=LOG_LEVELS.get(name, logging.INFO), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    if name not in LOG_LEVELS:
        log.warning("AIR_LOG_LEVEL=%r not recognised; using info", name)


def _out(cfg):
    return Path(cfg.tree["output"])


def cmd_generate(cfg, args):
    data = harness.load_dataset(cfg)
    harness.write_dataset(_out(cfg), data)
    (_out(cfg) / "config.resolved.yaml").write_text(cfg.dump())
    log.info("wrote %d examples to %s", data.n, _out(cfg))


def cmd_corrupt(cfg, args):
    data = harness.noisy_labels(cfg, harness.load_dataset(cfg))
    out = _out(cfg)
    harness.write_dataset(out, data)
    Q = harness.confusion_for(cfg, data.num_classes)
    if Q is not None:
        (out / "confusion.txt").write_text(format_confusion(Q))
    (out / "config.resolved.yaml").write_text(cfg.dump())
    log.info("%d of %d labels corrupted", int((~data.clean_mask).sum()), data.n)


def cmd_train(cfg, args):
    harness.run(cfg)


def cmd_sweep(cfg, args):
    rows = harness.sweep(cfg)
    log.info("sweep finished: %d runs", len(rows))


def cmd_eval(cfg, args):
    _, test_set = harness.prepare(cfg)
    w = load_model(args.model).astype("float64")
    report = harness.evaluate(cfg, w, test_set)
    out = _out(cfg)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.json").write_text(json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n")
    print(json.dumps({"accuracy": report.accuracy, "map_label": report.map_label}, sort_keys=True))


def cmd_activations(cfg, args):
    train_set, _ = harness.prepare(cfg)
    w = load_model(args.model).astype("float64")
    act = response_activations(w, train_set, cfg.tree["threads"])
    report = activation_report(act, train_set.clean_mask)
    out = _out(cfg)
    out.mkdir(parents=True, exist_ok=True)
    ranking = report.pop("ranking")
    report.pop("epochs")
    harness._write_csv(out / "activation_ranking.csv", ["rank", "example", "activation", "clean"],
                       [[r["rank"], r["example"], repr(r["activation"]), int(r["clean"])] for r in ranking])
    (out / "activation_summary.json").write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")


COMMANDS = {
    "generate": (cmd_generate, "write a synthetic dataset to binary files"),
    "corrupt": (cmd_corrupt, "apply label noise and write labels plus the clean mask"),
    "train": (cmd_train, "train the configured solver and write all run artifacts"),
    "eval": (cmd_eval, "score a saved model on the test split"),
    "sweep": (cmd_sweep, "repeat training over noise levels or group fractions"),
    "activations": (cmd_activations, "rank training examples by a saved model's activations"),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="airreg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="YAML experiment file")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="override the output directory")
        p.add_argument("--threads", type=int, help="worker threads for the group kernels")
        if name in ("eval", "activations"):
            p.add_argument("--model", required=True, help="AIRW model file")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    _setup_logging()
    try:
        cfg = config.load(args.config, seed=args.seed, output=args.out, threads=args.threads)
        COMMANDS[args.command][0](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DivergenceError as exc:
        print(f"solver diverged: {exc} {json.dumps(exc.diagnostics, default=str, sort_keys=True)}",
              file=sys.stderr)
        return 3
    except (AirError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
