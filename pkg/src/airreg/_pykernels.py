"""Pure numpy implementations of the group kernels.

Signatures mirror the compiled module so the two are interchangeable.
Per-group work is split into fixed chunks; numpy releases the GIL inside
the arithmetic, so a thread pool gives real concurrency while the chunk
boundaries (and hence results) stay independent of the thread count.
"""
from concurrent.futures import ThreadPoolExecutor

import numpy as np

_CHUNK = 4096


def _chunks(m):
    return [(lo, min(lo + _CHUNK, m)) for lo in range(0, m, _CHUNK)]


def _run(fn, m, nthreads):
    spans = _chunks(m)
    if nthreads <= 1 or len(spans) <= 1:
        for lo, hi in spans:
            fn(lo, hi)
        return
    with ThreadPoolExecutor(max_workers=nthreads) as pool:
        list(pool.map(lambda s: fn(*s), spans))


def forward(X, Wt, ex, cls, out, nthreads=1):
    def work(lo, hi):
        np.multiply(X[ex[lo:hi]], Wt[cls[lo:hi]], out=out[lo:hi])

    _run(work, len(ex), nthreads)


def adjoint(X, V, U, a, b, ex, class_ptr, class_idx, outT, nthreads=1):
    for c in range(len(class_ptr) - 1):
        idx = class_idx[class_ptr[c]:class_ptr[c + 1]]
        if b == 0.0:
            block = a * V[idx]
        else:
            block = a * V[idx] + b * U[idx]
        outT[c] = np.einsum("kj,kj->j", X[ex[idx]], block)


def gram(X, ex, class_ptr, class_idx, outT, nthreads=1):
    for c in range(len(class_ptr) - 1):
        rows = X[ex[class_idx[class_ptr[c]:class_ptr[c + 1]]]]
        outT[c] = np.einsum("kj,kj->j", rows, rows)


def group_norms(V, out, nthreads=1):
    def work(lo, hi):
        block = V[lo:hi]
        np.sqrt(np.einsum("kj,kj->k", block, block), out=out[lo:hi])

    _run(work, V.shape[0], nthreads)


def _shrink(Z, alpha):
    nrm = np.sqrt(np.einsum("kj,kj->k", Z, Z))
    keep = nrm > alpha
    scale = np.zeros_like(nrm)
    scale[keep] = (nrm[keep] - alpha[keep]) / nrm[keep]
    return scale


def prox_groups(Z, alpha, out, nthreads=1):
    def work(lo, hi):
        block = Z[lo:hi]
        scale = _shrink(block, alpha[lo:hi])
        np.multiply(block, scale[:, None], out=out[lo:hi])

    _run(work, Z.shape[0], nthreads)


def vu_update(X, Wt, V, U, ex, cls, rho, alpha, res, nthreads=1):
    def work(lo, hi):
        fw = X[ex[lo:hi]] * Wt[cls[lo:hi]]
        z = fw - U[lo:hi] / rho
        scale = _shrink(z, alpha[lo:hi])
        v = z * scale[:, None]
        r = v - fw
        V[lo:hi] = v
        U[lo:hi] += rho * r
        res[lo:hi] = np.einsum("kj,kj->k", r, r)

    _run(work, len(ex), nthreads)
