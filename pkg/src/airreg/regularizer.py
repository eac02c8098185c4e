"""The auxiliary group norm on the grouped response and its proximal map."""
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DimensionError, InvalidInputError
from .tensor import default_group_weight


@dataclass(frozen=True)
class RegConfig:
    """Regularization weights.

    ``lambda_g`` is ``"default"`` (10 / p per group) or a positive number.
    ``group_subset`` pins the active groups explicitly; otherwise
    ``subsample_fraction`` of them are drawn with ``subsample_seed``.
    With ``rescale_subsample`` the active groups' weights are multiplied by
    total / active, so the subsampled norm estimates the full one.
    """

    lambda1: float = 1e-4
    lambda_g: object = "default"
    subsample_fraction: float = 1.0
    subsample_seed: int = 0
    group_subset: tuple = None
    rescale_subsample: bool = True

    def __post_init__(self):
        if not self.lambda1 >= 0:
            raise InvalidInputError("lambda1 must be >= 0")
        if not isinstance(self.lambda_g, str) and not float(self.lambda_g) > 0:
            raise InvalidInputError("lambda_g must be positive")
        if isinstance(self.lambda_g, str) and self.lambda_g != "default":
            raise InvalidInputError(f"unknown lambda_g rule {self.lambda_g!r}")
        if not 0 < self.subsample_fraction <= 1:
            raise InvalidInputError("subsample_fraction must lie in (0, 1]")

    def active_groups(self, total):
        if self.group_subset is not None:
            g = np.unique(np.asarray(self.group_subset, dtype=np.intp))
            if g.size == 0 or g[0] < 0 or g[-1] >= total:
                raise InvalidInputError("group_subset holds invalid group ids")
            return g
        if self.subsample_fraction >= 1:
            return None
        return sample_groups(total, self.subsample_fraction, self.subsample_seed)

    def group_weight(self, p, total, active):
        """Weight shared by the active groups."""
        lam = default_group_weight(p) if isinstance(self.lambda_g, str) else float(self.lambda_g)
        if active is not None and self.rescale_subsample:
            lam *= total / len(active)
        return lam


def group_norm_value(v, weights):
    """Weighted sum of the Euclidean norms of the rows of ``v``."""
    v = np.asarray(v, dtype=np.float64)
    weights = np.broadcast_to(np.asarray(weights, dtype=np.float64), (v.shape[0],))
    return float(weights @ np.sqrt(np.einsum("kj,kj->k", v, v)))


def prox_group(z, alpha):
    """Group soft-thresholding: argmin_y alpha ||y|| + 0.5 ||y - z||^2."""
    z = np.asarray(z, dtype=np.float64)
    if alpha < 0:
        raise InvalidInputError("alpha must be >= 0")
    nrm = np.sqrt(z @ z)
    if nrm <= alpha:
        return np.zeros_like(z)
    return (nrm - alpha) / nrm * z


def prox_all(target, alphas, threads=1, backend=None):
    """Apply group soft-thresholding to every row of ``target``.

    Rows are independent; ``threads`` only changes scheduling, never results.
    """
    Z = np.ascontiguousarray(target, dtype=np.float64)
    a = np.ascontiguousarray(np.broadcast_to(np.asarray(alphas, dtype=np.float64), (Z.shape[0],)))
    if np.any(a < 0):
        raise InvalidInputError("thresholds must be >= 0")
    out = np.empty_like(Z)
    kernels.get(backend).prox_groups(Z, a, out, threads)
    return out


def sample_groups(total_groups, fraction, seed):
    """Uniform subset of round(fraction * total) group ids (at least one), sorted."""
    if not 0 < fraction <= 1:
        raise InvalidInputError("fraction must lie in (0, 1]")
    if fraction == 1:
        return np.arange(total_groups, dtype=np.intp)
    k = max(1, int(np.floor(fraction * total_groups + 0.5)))
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(total_groups, size=k, replace=False)).astype(np.intp)


def group_activations(v, threads=1, backend=None):
    """Euclidean norm of each group of ``v``."""
    V = np.ascontiguousarray(v, dtype=np.float64)
    if V.ndim != 2:
        raise DimensionError("grouped response must be 2-D (groups x p)")
    out = np.empty(V.shape[0])
    kernels.get(backend).group_norms(V, out, threads)
    return out


def label_activations(op, v, labels, threads=1):
    """Per-example activation of the group paired with each example's label.

    Returns an array of length n with NaN for examples whose labelled group
    is not active (group subsampling).
    """
    labels = np.asarray(labels)
    n = op.features.shape[0]
    norms = group_activations(v, threads, op.backend)
    want = np.arange(n) * op.num_classes + labels
    pos = np.searchsorted(op.groups, want)
    pos = np.minimum(pos, op.n_groups - 1)
    hit = op.groups[pos] == want
    out = np.full(n, np.nan)
    out[hit] = norms[pos[hit]]
    return out
