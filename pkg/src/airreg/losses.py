"""Classification losses and their gradients.

Loss values are sums over the batch members (unscaled).  Gradients are
multiplied by ``batch.scale``; with ``scale = n / |batch|`` a minibatch
gradient is an unbiased estimate of the full-sum gradient.
"""
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InvalidInputError, UnsupportedLossError


@dataclass(frozen=True, eq=False)
class MiniBatch:
    indices: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.intp)
        if idx.ndim != 1 or idx.size == 0:
            raise InvalidInputError("a minibatch needs at least one index")
        if np.unique(idx).size != idx.size:
            raise InvalidInputError("minibatch indices must be unique")
        if not self.scale > 0:
            raise InvalidInputError("minibatch scale must be positive")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "scale", float(self.scale))

    @classmethod
    def full(cls, n):
        return cls(np.arange(n), 1.0)

    @classmethod
    def sample(cls, n, size, rng, scaled=True):
        """Uniform draw of ``size`` indices without replacement."""
        size = min(int(size), n)
        idx = np.sort(rng.choice(n, size=size, replace=False))
        return cls(idx, n / size if scaled else 1.0)

    def check(self, n):
        if self.indices.min() < 0 or self.indices.max() >= n:
            raise InvalidInputError(f"minibatch index out of range [0, {n})")


def _batch(data, batch):
    if batch is None:
        batch = MiniBatch.full(data.n)
    batch.check(data.n)
    return batch


def _single_label(data, what):
    if data.multilabel:
        raise UnsupportedLossError(f"{what} needs single-label data; use the logistic loss for multi-label sets")


def _check_w(w, data):
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (data.p, data.num_classes):
        raise DimensionError(f"weights must have shape {(data.p, data.num_classes)}, got {w.shape}")
    return w


def predict_scores(w, x):
    """Linear class scores; works on a single example or a row-stacked batch."""
    return np.asarray(x, dtype=np.float64) @ np.asarray(w, dtype=np.float64)


def _log_softmax(S):
    S = S - S.max(axis=1, keepdims=True)
    return S - np.log(np.exp(S).sum(axis=1, keepdims=True))


def softmax_loss(w, data, batch=None):
    """Cross-entropy of the softmax over the batch (summed)."""
    _single_label(data, "softmax loss")
    w = _check_w(w, data)
    batch = _batch(data, batch)
    idx = batch.indices
    logp = _log_softmax(data.features[idx] @ w)
    return float(-logp[np.arange(idx.size), data.labels[idx]].sum())


def softmax_gradient(w, data, batch=None):
    return softmax_loss_gradient(w, data, batch)[1]


def softmax_loss_gradient(w, data, batch=None):
    _single_label(data, "softmax loss")
    w = _check_w(w, data)
    batch = _batch(data, batch)
    idx = batch.indices
    X = data.features[idx]
    logp = _log_softmax(X @ w)
    rows = np.arange(idx.size)
    y = data.labels[idx]
    loss = -logp[rows, y].sum()
    P = np.exp(logp)
    P[rows, y] -= 1.0
    return float(loss), batch.scale * (X.T @ P)


def logistic_loss_gradient(w, data, batch=None):
    """One-vs-rest binary logistic loss; the multi-label counterpart of softmax."""
    w = _check_w(w, data)
    batch = _batch(data, batch)
    idx = batch.indices
    X = data.features[idx]
    Y = data.indicator()[idx].astype(np.float64)
    S = X @ w
    # log(1 + exp(s)) - y s, computed without overflow
    loss = np.logaddexp(0.0, S).sum() - (Y * S).sum()
    sig = np.exp(-np.logaddexp(0.0, -S))
    return float(loss), batch.scale * (X.T @ (sig - Y))


def hinge_loss_gradient(w, data, batch=None, margin=1.0):
    """One-vs-rest hinge loss and a subgradient.

    For class c the target sign is +1 when y_i == c and -1 otherwise; each
    (example, class) pair contributes max(0, margin - sign * w_c^T x_i).
    Pairs sitting exactly on the kink contribute a zero subgradient.
    """
    _single_label(data, "hinge loss")
    w = _check_w(w, data)
    batch = _batch(data, batch)
    idx = batch.indices
    X = data.features[idx]
    sign = -np.ones((idx.size, data.num_classes))
    sign[np.arange(idx.size), data.labels[idx]] = 1.0
    slack = margin - sign * (X @ w)
    active = slack > 0
    loss = slack[active].sum()
    G = -(sign * active)
    return float(loss), batch.scale * (X.T @ G)


LOSSES = {
    "softmax": softmax_loss_gradient,
    "logistic": logistic_loss_gradient,
    "hinge": hinge_loss_gradient,
}


def default_loss(data):
    return "logistic" if data.multilabel else "softmax"


def loss_and_gradient(kind, w, data, batch=None, **kwargs):
    try:
        fn = LOSSES[kind]
    except KeyError:
        raise UnsupportedLossError(f"unknown loss {kind!r}") from None
    return fn(w, data, batch, **kwargs)
