"""Datasets and the implicit grouped operator F.

F maps a weight matrix ``w`` (p x C) to the stacked grouped response: group
``(i, c)`` holds ``x_i * w[:, c]`` (elementwise).  F has a single nonzero per
row, so it is never materialized; only the feature matrix and group index
arrays are kept, and F^T F is diagonal.
"""
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DimensionError, InvalidInputError


def _frozen(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix with single-label or multi-label targets.

    Single-label targets are an int array of shape (n,).  Multi-label targets
    are a boolean indicator matrix of shape (n, C).
    """

    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    clean_mask: np.ndarray = None
    true_labels: np.ndarray = None

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise InvalidInputError(f"features must be a non-empty 2-D matrix, got shape {X.shape}")
        n = X.shape[0]
        C = int(self.num_classes)
        if C < 1:
            raise InvalidInputError("num_classes must be >= 1")
        y = self._check_labels(self.labels, n, C, "labels")
        object.__setattr__(self, "features", _frozen(np.ascontiguousarray(X)))
        object.__setattr__(self, "labels", _frozen(y))
        object.__setattr__(self, "num_classes", C)

        mask = self.clean_mask
        if mask is not None:
            mask = np.asarray(mask, dtype=bool)
            if mask.shape != (n,):
                raise DimensionError(f"clean_mask must have length {n}")
            object.__setattr__(self, "clean_mask", _frozen(mask))
        truth = self.true_labels
        if truth is not None:
            truth = self._check_labels(truth, n, C, "true_labels")
            if truth.ndim != y.ndim:
                raise DimensionError("true_labels and labels must share a layout")
            if mask is not None:
                same = truth == y if y.ndim == 1 else np.all(truth == y, axis=1)
                if not np.all(same[mask]):
                    raise InvalidInputError("true_labels disagree with labels on the clean mask")
            object.__setattr__(self, "true_labels", _frozen(truth))

    @staticmethod
    def _check_labels(labels, n, C, name):
        y = np.asarray(labels)
        if y.ndim == 1:
            if y.shape[0] != n:
                raise DimensionError(f"{name} must have length {n}, got {y.shape[0]}")
            if y.dtype.kind not in "iu":
                if y.dtype.kind == "f" and np.all(np.mod(y, 1) == 0):
                    y = y.astype(np.int64)
                else:
                    raise InvalidInputError(f"{name} must be integer class indices")
            y = y.astype(np.int64)
            if y.size and (y.min() < 0 or y.max() >= C):
                raise InvalidInputError(f"{name} contain an index outside [0, {C})")
            return y
        if y.ndim == 2:
            if y.shape != (n, C):
                raise DimensionError(f"{name} indicator must have shape {(n, C)}, got {y.shape}")
            return y.astype(bool)
        raise DimensionError(f"{name} must be 1-D indices or a 2-D indicator matrix")

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def p(self):
        return self.features.shape[1]

    @property
    def multilabel(self):
        return self.labels.ndim == 2

    def indicator(self, truth=False):
        """Label indicator matrix (n, C); ``truth`` selects true_labels when present."""
        y = self.true_labels if truth and self.true_labels is not None else self.labels
        if y.ndim == 2:
            return y.copy()
        out = np.zeros((self.n, self.num_classes), dtype=bool)
        out[np.arange(self.n), y] = True
        return out

    def eval_labels(self):
        """Ground-truth labels when known, otherwise the stored labels."""
        return self.true_labels if self.true_labels is not None else self.labels

    def subset(self, index):
        index = np.asarray(index, dtype=np.intp)
        pick = lambda a: None if a is None else a[index]
        return Dataset(
            self.features[index],
            self.labels[index],
            self.num_classes,
            pick(self.clean_mask),
            pick(self.true_labels),
        )

    def with_labels(self, labels, clean_mask=None, true_labels=None):
        return Dataset(self.features, labels, self.num_classes, clean_mask, true_labels)


@dataclass(frozen=True, eq=False)
class GroupOperator:
    """Implicit F over a set of active groups.

    Group ids are flat indices ``g = i * C + c`` kept in ascending order.
    ``weights`` holds lambda_j for each active group.
    """

    features: np.ndarray
    num_classes: int
    groups: np.ndarray
    weights: np.ndarray
    backend: object = field(default=None, repr=False)
    ex: np.ndarray = field(init=False, repr=False)
    cls: np.ndarray = field(init=False, repr=False)
    class_ptr: np.ndarray = field(init=False, repr=False)
    class_idx: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        g = np.asarray(self.groups, dtype=np.intp)
        C = self.num_classes
        ex, cls = np.divmod(g, C)
        order = np.argsort(cls, kind="stable")
        counts = np.bincount(cls, minlength=C)
        ptr = np.zeros(C + 1, dtype=np.intp)
        np.cumsum(counts, out=ptr[1:])
        object.__setattr__(self, "groups", _frozen(g))
        object.__setattr__(self, "ex", _frozen(ex.astype(np.intp)))
        object.__setattr__(self, "cls", _frozen(cls.astype(np.intp)))
        object.__setattr__(self, "class_ptr", _frozen(ptr))
        object.__setattr__(self, "class_idx", _frozen(order.astype(np.intp)))
        object.__setattr__(self, "weights", _frozen(np.asarray(self.weights, dtype=np.float64)))
        if self.backend is None:
            object.__setattr__(self, "backend", kernels.DEFAULT)

    @property
    def n_groups(self):
        return self.groups.shape[0]

    @property
    def group_size(self):
        return self.features.shape[1]

    @property
    def is_full(self):
        return self.n_groups == self.features.shape[0] * self.num_classes

    def _check_w(self, w):
        w = np.asarray(w, dtype=np.float64)
        if w.ndim == 1 and self.num_classes == 1:
            w = w[:, None]
        if w.shape != (self.group_size, self.num_classes):
            raise DimensionError(
                f"weights must have shape {(self.group_size, self.num_classes)}, got {w.shape}"
            )
        return w

    def _check_v(self, v, name="v"):
        v = np.ascontiguousarray(v, dtype=np.float64)
        if v.shape != (self.n_groups, self.group_size):
            raise DimensionError(
                f"{name} must have shape {(self.n_groups, self.group_size)}, got {v.shape}"
            )
        return v

    def forward(self, w, out=None, threads=1):
        w = self._check_w(w)
        if out is None:
            out = np.empty((self.n_groups, self.group_size))
        self.backend.forward(
            self.features, np.ascontiguousarray(w.T), self.ex, self.cls, out, threads
        )
        return out

    def adjoint(self, v, u=None, a=1.0, b=0.0, threads=1):
        """F^T (a v + b u) as a p x C matrix."""
        v = self._check_v(v)
        u = v if u is None else self._check_v(u, "u")
        outT = np.empty((self.num_classes, self.group_size))
        self.backend.adjoint(
            self.features, v, u, float(a), float(b), self.ex,
            self.class_ptr, self.class_idx, outT, threads,
        )
        return outT.T.copy()

    def gram_diagonal(self, threads=1):
        outT = np.empty((self.num_classes, self.group_size))
        self.backend.gram(self.features, self.ex, self.class_ptr, self.class_idx, outT, threads)
        return outT.T.copy()

    def with_backend(self, backend):
        return GroupOperator(self.features, self.num_classes, self.groups, self.weights, backend)


def default_group_weight(p):
    """Uniform group weight: 10 divided by the group length."""
    return 10.0 / p


def assemble_group_operator(features, num_classes, weight_rule="default", groups=None, backend=None):
    """Build the implicit operator for ``features`` (n x p) and ``num_classes``.

    ``weight_rule`` is ``"default"`` (10/p for every group), a positive
    scalar, or an array with one weight per active group.  ``groups`` selects
    a subset of the n*C flat group ids; all groups are active by default.
    """
    X = np.ascontiguousarray(features, dtype=np.float64)
    if X.ndim != 2 or X.size == 0:
        raise InvalidInputError(f"features must be a non-empty 2-D matrix, got shape {X.shape}")
    C = int(num_classes)
    if C < 1:
        raise InvalidInputError("num_classes must be >= 1")
    n, p = X.shape
    total = n * C
    if groups is None:
        g = np.arange(total, dtype=np.intp)
    else:
        g = np.unique(np.asarray(groups, dtype=np.intp))
        if g.size == 0 or g[0] < 0 or g[-1] >= total:
            raise InvalidInputError(f"group ids must be a non-empty subset of [0, {total})")

    if isinstance(weight_rule, str):
        if weight_rule != "default":
            raise InvalidInputError(f"unknown weight rule {weight_rule!r}")
        lam = np.full(g.size, default_group_weight(p))
    else:
        lam = np.asarray(weight_rule, dtype=np.float64)
        if lam.ndim == 0:
            lam = np.full(g.size, float(lam))
        if lam.shape != (g.size,):
            raise DimensionError("one weight per active group is required")
    if np.any(lam < 0) or not np.all(np.isfinite(lam)):
        raise InvalidInputError("group weights must be finite and non-negative")
    if backend is not None and isinstance(backend, str):
        backend = kernels.get(backend)
    X = X.view()
    X.setflags(write=False)
    return GroupOperator(X, C, g, lam, backend)


def apply_forward(op, w, threads=1):
    return op.forward(w, threads=threads)


def apply_adjoint(op, v, threads=1):
    return op.adjoint(v, threads=threads)


def gram_diagonal(op, threads=1):
    """Diagonal of F^T F arranged as p x C (column c: sum of x_ij^2 over class-c groups)."""
    return op.gram_diagonal(threads=threads)
