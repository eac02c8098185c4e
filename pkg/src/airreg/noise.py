"""Label corruption: confusion-matrix resampling and uniform flipping.

Noise-level conventions for :func:`confusion_from_noise_level`:

``keep-prob`` (default)
    ``level`` is the corruption probability; the diagonal is ``1 - level``.
``paper-literal``
    The diagonal *equals* ``level``; off-diagonal mass is ``1 - level``.

The two coincide at ``level = 0.5``.  Pick deliberately: at ``level = 0.2``
``keep-prob`` corrupts 20% of labels while ``paper-literal`` corrupts 80%.
"""
import io

import numpy as np

from .errors import DimensionError, InvalidInputError

CONVENTIONS = ("keep-prob", "paper-literal")


def check_confusion(Q, tol=1e-12):
    Q = np.asarray(Q, dtype=np.float64)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise DimensionError("confusion matrix must be square")
    if np.any(Q < 0) or np.any(Q > 1):
        raise InvalidInputError("confusion entries must lie in [0, 1]")
    if np.max(np.abs(Q.sum(axis=1) - 1)) > tol:
        raise InvalidInputError("confusion rows must sum to 1")
    return Q


def confusion_from_noise_level(num_classes, level, convention="keep-prob"):
    C = int(num_classes)
    if C < 2:
        raise InvalidInputError("need at least two classes")
    if not 0 <= level <= 1:
        raise InvalidInputError("noise level must lie in [0, 1]")
    if convention not in CONVENTIONS:
        raise InvalidInputError(f"convention must be one of {CONVENTIONS}")
    keep = 1.0 - level if convention == "keep-prob" else float(level)
    Q = np.full((C, C), (1.0 - keep) / (C - 1))
    np.fill_diagonal(Q, keep)
    return Q


def corrupt_labels(labels, Q, seed):
    """Resample every label from its row of ``Q``.

    Returns ``(noisy, clean_mask)``; a draw that maps a label onto itself
    counts as clean.
    """
    Q = check_confusion(Q)
    y = np.asarray(labels, dtype=np.int64)
    if y.ndim != 1:
        raise DimensionError("corrupt_labels takes single-label data")
    C = Q.shape[0]
    if y.size and (y.min() < 0 or y.max() >= C):
        raise DimensionError(f"labels must index the {C} rows of Q")
    rng = np.random.default_rng(seed)
    draws = rng.random(y.size)
    cum = np.cumsum(Q, axis=1)
    noisy = (draws[:, None] >= cum[y]).sum(axis=1)
    noisy = np.minimum(noisy, C - 1)
    return noisy, noisy == y


def flip_uniform(labels, fraction, num_classes, seed):
    """Flip exactly round(fraction * n) labels, each to a different uniform class."""
    if not 0 <= fraction <= 1:
        raise InvalidInputError("fraction must lie in [0, 1]")
    C = int(num_classes)
    if C < 2:
        raise InvalidInputError("need at least two classes")
    y = np.asarray(labels, dtype=np.int64)
    n = y.size
    k = int(np.floor(fraction * n + 0.5))
    rng = np.random.default_rng(seed)
    chosen = rng.choice(n, size=k, replace=False)
    noisy = y.copy()
    noisy[chosen] = (y[chosen] + rng.integers(1, C, size=k)) % C
    mask = np.ones(n, dtype=bool)
    mask[chosen] = False
    return noisy, mask


def apply_noise(data, spec, seed):
    """Corrupt a dataset's labels; ``spec`` is a dict from the experiment config."""
    kind = spec.get("kind", "none")
    y = data.labels
    if kind == "none":
        return data.with_labels(y, np.ones(data.n, dtype=bool), y)
    if data.multilabel:
        raise InvalidInputError("label noise is only simulated for single-label data")
    if kind == "confusion":
        Q = confusion_from_noise_level(data.num_classes, spec["level"], spec.get("convention", "keep-prob"))
        noisy, mask = corrupt_labels(y, Q, seed)
    elif kind == "flip":
        noisy, mask = flip_uniform(y, spec["fraction"], data.num_classes, seed)
    else:
        raise InvalidInputError(f"unknown noise kind {kind!r}")
    return data.with_labels(noisy, mask, y)


def format_confusion(Q):
    buf = io.StringIO()
    np.savetxt(buf, np.asarray(Q), fmt="%.17g")
    return buf.getvalue()


def parse_confusion(text):
    Q = np.loadtxt(io.StringIO(text), dtype=np.float64, ndmin=2)
    return check_confusion(Q, tol=1e-9)
