"""Stochastic (sub)gradient baselines.

Objectives:

* ``air``: the same objective the SADMM solver minimizes, with the group
  norm handled by its subgradient (zero at groups with zero response).
* ``l2-softmax``: softmax loss + lambda2 ||w||^2.
* ``l2-hinge``: one-vs-rest hinge loss + lambda2 ||w||^2.

Learning rate follows r_k = lr / (1 + decay * k).
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, InvalidInputError, NonFiniteError
from .losses import MiniBatch, loss_and_gradient
from .regularizer import RegConfig, group_activations
from .sadmm import TrainResult, air_objective, epoch_batches, make_problem

OBJECTIVES = ("air", "l2-softmax", "l2-hinge")


@dataclass(frozen=True)
class SgdConfig:
    lr: float = 1e-3
    decay: float = None
    batch_size: int = 100
    epochs: int = 30
    seed: int = 0
    objective: str = "l2-softmax"
    lambda2: float = 0.05
    margin: float = 1.0
    reg: RegConfig = field(default_factory=RegConfig)
    scale_gradient: bool = True
    threads: int = 1
    backend: str = None
    record_activations: bool = False
    divergence_factor: float = 1e6

    def __post_init__(self):
        if not self.lr >= 0:
            raise InvalidInputError("lr must be >= 0")
        if self.decay is not None and self.decay < 0:
            raise InvalidInputError("decay must be >= 0")
        if self.epochs < 0:
            raise InvalidInputError("epochs must be >= 0")
        if self.batch_size < 1:
            raise InvalidInputError("batch_size must be >= 1")
        if self.objective not in OBJECTIVES:
            raise InvalidInputError(f"objective must be one of {OBJECTIVES}")
        if self.lambda2 < 0:
            raise InvalidInputError("lambda2 must be >= 0")


def air_subgradient(w, problem, threads=1):
    """F^T s with s_g = lambda_g F_g w / ||F_g w|| (0 where F_g w = 0)."""
    op = problem.op
    fw = op.forward(w, threads=threads)
    norms = group_activations(fw, threads, op.backend)
    coef = np.zeros_like(norms)
    nz = norms > 0
    coef[nz] = op.weights[nz] / norms[nz]
    fw *= coef[:, None]
    return op.adjoint(fw, threads=threads)


def _loss_kind(cfg, data):
    if cfg.objective == "l2-hinge":
        return "hinge"
    return "logistic" if data.multilabel else "softmax"


def objective_value(w, data, cfg, problem=None):
    if cfg.objective == "air":
        return air_objective(w, problem, cfg.reg.lambda1, cfg.threads)
    kw = {"margin": cfg.margin} if cfg.objective == "l2-hinge" else {}
    loss, _ = loss_and_gradient(_loss_kind(cfg, data), w, data, **kw)
    return loss + cfg.lambda2 * float(np.sum(w * w))


def gradient(w, data, cfg, batch, problem=None):
    kind = _loss_kind(cfg, data)
    kw = {"margin": cfg.margin} if kind == "hinge" else {}
    if not cfg.scale_gradient:
        batch = MiniBatch(batch.indices, 1.0)
    _, g = loss_and_gradient(kind, w, data, batch, **kw)
    if cfg.objective == "air":
        return g + 2 * cfg.reg.lambda1 * w + air_subgradient(w, problem, cfg.threads)
    return g + 2 * cfg.lambda2 * w


def sgd_train(data, cfg, problem=None, callback=None):
    """Train with minibatch SGD; the final iterate is the model."""
    if cfg.objective == "air" and problem is None:
        problem = make_problem(data, cfg.reg, None, cfg.backend, cfg.threads)
    rng = np.random.default_rng(cfg.seed)
    w = np.zeros((data.p, data.num_classes))
    per_epoch = -(-data.n // cfg.batch_size)
    decay = 1.0 / per_epoch if cfg.decay is None else cfg.decay
    start = objective_value(w, data, cfg, problem)
    history, series = [], []
    k = 0
    for epoch in range(cfg.epochs):
        for batch in epoch_batches(data.n, cfg.batch_size, rng):
            g = gradient(w, data, cfg, batch, problem)
            if not np.all(np.isfinite(g)):
                raise NonFiniteError(f"non-finite gradient at iteration {k}", {"k": k})
            w = w - cfg.lr / (1.0 + decay * k) * g
            k += 1
        obj = objective_value(w, data, cfg, problem)
        if not np.isfinite(obj) or obj > cfg.divergence_factor * max(start, 1.0):
            raise DivergenceError(f"objective diverged at epoch {epoch + 1}", {"objective": obj, "k": k})
        record = {"epoch": epoch + 1, "k": k, "objective": obj, "lr": cfg.lr / (1.0 + decay * k)}
        history.append(record)
        if cfg.record_activations and not data.multilabel:
            series.append(response_activations(w, data, cfg.threads))
        if callback is not None:
            callback(record)
    return TrainResult(w, None, history, series, problem)


def response_activations(w, data, threads=1):
    """||x_i * w[:, y_i]|| per example: the baseline analog of the AIR activations."""
    y = data.labels
    resp = data.features * w.T[y]
    return np.sqrt(np.einsum("ij,ij->i", resp, resp))

