"""Experiment configuration: one YAML file with nested blocks.

Example::

    seed: 0
    output: runs/blobs
    dataset:
      blobs: {n: 2000, p: 50, num_classes: 10, separation: 3.0, stddev: 1.0}
      test_fraction: 0.5
    noise: {kind: confusion, level: 0.5}
    solver: air-sadmm
    sadmm: {rho_max: 10, batch_size: 50}
    regularizer: {lambda_g: 0.05}

Every key not given takes the value from :data:`DEFAULTS`; the resolved
tree written next to each run reproduces it without the original file.
"""
import copy
import math
from dataclasses import dataclass

import numpy as np
import yaml

from .errors import ConfigError, InvalidInputError
from .regularizer import RegConfig
from .sadmm import SolverConfig
from .sgd import SgdConfig

SOLVERS = ("air-sadmm", "air-sgd", "l2-sgd", "hinge-sgd")
SOURCES = ("blobs", "idx", "features")
SWEEP_AXES = ("noise_level", "group_fraction")

DEFAULTS = {
    "seed": None,
    "output": "runs/default",
    "threads": 1,
    "dataset": {
        "test_fraction": 0.5,
        "limit": None,
    },
    "noise": {"kind": "none", "level": 0.0, "convention": "keep-prob", "fraction": 0.0},
    "solver": "air-sadmm",
    "sadmm": {
        "rho0": 10.0, "beta": 1.1, "rho_max": 1e4, "batch_size": 100, "epochs": 30,
        "tol": 1e-4, "min_epochs": 1, "lambda1_mode": "exact-quadratic", "schedule": "decaying",
        "eta0": 1.0, "scale_gradient": True, "backend": None,
    },
    "sgd": {
        "lr": 1e-3, "decay": None, "batch_size": 100, "epochs": 30, "lambda2": 0.05,
        "margin": 1.0, "scale_gradient": True,
    },
    "regularizer": {
        "lambda1": 1e-4, "lambda_g": "default", "subsample_fraction": 1.0,
        "rescale_subsample": True,
    },
    "metrics": {"precision_at": [1, 3, 5], "activations": True},
    "sweep": {"axis": "noise_level", "values": [], "seeds": [], "solvers": []},
}

SOURCE_FIELDS = {
    "blobs": {"n": None, "p": None, "num_classes": None, "separation": None, "stddev": None, "seed": None},
    "idx": {"images": None, "labels": None, "num_classes": 10},
    "features": {"features": None, "labels": None, "format": None, "num_classes": None},
}

# independent seed streams derived from the single experiment seed
STREAMS = {"data": 0, "split": 1, "noise": 2, "solver": 3, "groups": 4}


def derived_seed(seed, stream):
    return int(np.random.SeedSequence(int(seed), spawn_key=(STREAMS[stream],)).generate_state(1)[0])


def _merge(base, user, path=""):
    out = copy.deepcopy(base)
    for key, value in user.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(where, "unknown key")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(where, "expected a mapping")
            out[key] = _merge(base[key], value, where + ".")
        else:
            out[key] = value
    return out


def _number(tree, path, kind=float, low=None, allow_none=False, strict=False):
    node = tree
    keys = path.split(".")
    for k in keys:
        node = node[k]
    if node is None and allow_none:
        return None
    if isinstance(node, bool) or not isinstance(node, (int, float)):
        raise ConfigError(path, f"expected a number, got {node!r}")
    if kind is int and not float(node).is_integer():
        raise ConfigError(path, f"expected an integer, got {node!r}")
    if not math.isfinite(node):
        raise ConfigError(path, "must be finite")
    if low is not None and (node <= low if strict else node < low):
        raise ConfigError(path, f"must be {'>' if strict else '>='} {low}")
    return kind(node)


@dataclass(frozen=True)
class ExperimentConfig:
    """A validated, fully resolved experiment tree."""

    tree: dict

    @property
    def seed(self):
        return self.tree["seed"]

    @property
    def solver(self):
        return self.tree["solver"]

    @property
    def source(self):
        return next(k for k in SOURCES if k in self.tree["dataset"])

    def with_overrides(self, seed=None, output=None, threads=None, **paths):
        tree = copy.deepcopy(self.tree)
        if seed is not None:
            tree["seed"] = seed
        if output is not None:
            tree["output"] = str(output)
        if threads is not None:
            tree["threads"] = threads
        for dotted, value in paths.items():
            node = tree
            keys = dotted.split("__")
            for k in keys[:-1]:
                node = node[k]
            node[keys[-1]] = value
        return validate(tree)

    def reg_config(self):
        r = self.tree["regularizer"]
        return RegConfig(
            lambda1=r["lambda1"], lambda_g=r["lambda_g"],
            subsample_fraction=r["subsample_fraction"],
            subsample_seed=derived_seed(self.seed, "groups"),
            rescale_subsample=r["rescale_subsample"],
        )

    def sadmm_config(self, record_activations=False):
        s = self.tree["sadmm"]
        return SolverConfig(
            rho0=s["rho0"], beta=s["beta"], rho_max=s["rho_max"], batch_size=s["batch_size"],
            epochs=s["epochs"], tol=s["tol"], min_epochs=s["min_epochs"],
            seed=derived_seed(self.seed, "solver"), reg=self.reg_config(),
            lambda1_mode=s["lambda1_mode"], schedule=s["schedule"], eta0=s["eta0"],
            scale_gradient=s["scale_gradient"], threads=self.tree["threads"], backend=s["backend"],
            record_activations=record_activations,
        )

    def sgd_config(self, record_activations=False):
        s = self.tree["sgd"]
        objective = {"air-sgd": "air", "l2-sgd": "l2-softmax", "hinge-sgd": "l2-hinge"}[self.solver]
        return SgdConfig(
            lr=s["lr"], decay=s["decay"], batch_size=s["batch_size"], epochs=s["epochs"],
            seed=derived_seed(self.seed, "solver"), objective=objective, lambda2=s["lambda2"],
            margin=s["margin"], reg=self.reg_config(), scale_gradient=s["scale_gradient"],
            threads=self.tree["threads"], backend=self.tree["sadmm"]["backend"],
            record_activations=record_activations,
        )

    def dump(self):
        return yaml.safe_dump(self.tree, sort_keys=True, default_flow_style=False)


def validate(raw):
    """Check a config tree and fill in defaults; raises ConfigError naming the field."""
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a mapping")
    user = copy.deepcopy(raw)
    ds = user.get("dataset")
    if not isinstance(ds, dict):
        raise ConfigError("dataset", "missing dataset block")
    present = [k for k in SOURCES if k in ds]
    if len(present) != 1:
        raise ConfigError("dataset", f"exactly one source of {SOURCES} is required, got {present or 'none'}")
    src = present[0]
    src_block = ds.pop(src)
    if not isinstance(src_block, dict):
        raise ConfigError(f"dataset.{src}", "expected a mapping")
    base = copy.deepcopy(DEFAULTS)
    tree = _merge(base, user)
    tree["dataset"][src] = _merge(SOURCE_FIELDS[src], src_block, f"dataset.{src}.")
    if tree["seed"] is None:
        raise ConfigError("seed", "a seed is required for reproducibility")
    tree["seed"] = _number(tree, "seed", int, low=0)
    tree["threads"] = _number(tree, "threads", int, low=1)
    if not isinstance(tree["output"], str) or not tree["output"]:
        raise ConfigError("output", "expected a directory path")

    d = tree["dataset"]
    f = _number(tree, "dataset.test_fraction", low=0, strict=True)
    if f >= 1:
        raise ConfigError("dataset.test_fraction", "must lie in (0, 1)")
    d["limit"] = _number(tree, "dataset.limit", int, low=1, allow_none=True)
    s = d[src]
    for key, value in s.items():
        if value is None and key not in ("format", "num_classes", "seed"):
            raise ConfigError(f"dataset.{src}.{key}", "required")
    if src == "blobs":
        for key in ("n", "p", "num_classes"):
            s[key] = _number(tree, f"dataset.blobs.{key}", int, low=1)
        for key in ("separation", "stddev"):
            s[key] = _number(tree, f"dataset.blobs.{key}", low=0, strict=True)
        s["seed"] = _number(tree, "dataset.blobs.seed", int, low=0, allow_none=True)
        if s["num_classes"] < 2 or s["n"] < s["num_classes"]:
            raise ConfigError("dataset.blobs", "need n >= num_classes >= 2")
    elif src == "features" and s["format"] not in (None, "binary", "csv"):
        raise ConfigError("dataset.features.format", "must be 'binary' or 'csv'")

    n = tree["noise"]
    if n["kind"] not in ("none", "confusion", "flip"):
        raise ConfigError("noise.kind", "must be none, confusion or flip")
    for key in ("level", "fraction"):
        v = _number(tree, f"noise.{key}", low=0)
        if v > 1:
            raise ConfigError(f"noise.{key}", "must lie in [0, 1]")
    if n["convention"] not in ("keep-prob", "paper-literal"):
        raise ConfigError("noise.convention", "must be keep-prob or paper-literal")

    if tree["solver"] not in SOLVERS:
        raise ConfigError("solver", f"must be one of {SOLVERS}")

    sw = tree["sweep"]
    if sw["axis"] not in SWEEP_AXES:
        raise ConfigError("sweep.axis", f"must be one of {SWEEP_AXES}")
    for key in ("values", "seeds", "solvers"):
        if not isinstance(sw[key], list):
            raise ConfigError(f"sweep.{key}", "expected a list")
    for s_name in sw["solvers"]:
        if s_name not in SOLVERS:
            raise ConfigError("sweep.solvers", f"unknown solver {s_name!r}")

    m = tree["metrics"]
    if not isinstance(m["precision_at"], list) or any(
            isinstance(k, bool) or not isinstance(k, int) or k < 1 for k in m["precision_at"]):
        raise ConfigError("metrics.precision_at", "expected a list of positive integers")

    cfg = ExperimentConfig(tree)
    # the solver dataclasses carry the remaining range checks
    for block, build in (("regularizer", cfg.reg_config), ("sadmm", cfg.sadmm_config), ("sgd", None)):
        try:
            if block == "sgd":
                if tree["solver"] != "air-sadmm":
                    cfg.sgd_config()
                else:
                    SgdConfig(**{k: v for k, v in tree["sgd"].items()})
            else:
                build()
        except (InvalidInputError, TypeError, ValueError) as exc:
            raise ConfigError(block, str(exc)) from None
    return cfg


def load(path, **overrides):
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"not valid YAML: {exc}") from None
    except OSError as exc:
        raise ConfigError("<file>", str(exc)) from None
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a mapping")
    if overrides.get("seed") is not None:
        raw["seed"] = overrides["seed"]
    cfg = validate(raw)
    return cfg.with_overrides(**overrides)
