# cython: language_level=3
"""Compiled group kernels.

Every routine works on the implicit grouped operator: group ``k`` pairs
example ``ex[k]`` with class ``cls[k]`` and holds ``p`` coefficients.
Per-group loops run under ``prange``; each group writes only its own row, so
results do not depend on the thread count.  Reductions over groups
(``adjoint``, ``gram``) are split by class and accumulate in a fixed order.
"""
from cython.parallel cimport prange
from libc.math cimport sqrt


def forward(const double[:, ::1] X, const double[:, ::1] Wt,
            const Py_ssize_t[::1] ex, const Py_ssize_t[::1] cls,
            double[:, ::1] out, int nthreads=1):
    cdef Py_ssize_t m = ex.shape[0]
    cdef Py_ssize_t p = X.shape[1]
    cdef Py_ssize_t k, j, i, c
    for k in prange(m, nogil=True, num_threads=nthreads, schedule="static"):
        i = ex[k]
        c = cls[k]
        for j in range(p):
            out[k, j] = X[i, j] * Wt[c, j]


def adjoint(const double[:, ::1] X, const double[:, ::1] V,
            const double[:, ::1] U, double a, double b,
            const Py_ssize_t[::1] ex, const Py_ssize_t[::1] class_ptr,
            const Py_ssize_t[::1] class_idx, double[:, ::1] outT,
            int nthreads=1):
    """outT[c, :] = sum over groups k of class c of x_{ex[k]} * (a V[k] + b U[k])."""
    cdef Py_ssize_t C = class_ptr.shape[0] - 1
    cdef Py_ssize_t p = X.shape[1]
    cdef Py_ssize_t c, t, k, j, i
    for c in prange(C, nogil=True, num_threads=nthreads, schedule="static"):
        for j in range(p):
            outT[c, j] = 0.0
        for t in range(class_ptr[c], class_ptr[c + 1]):
            k = class_idx[t]
            i = ex[k]
            if b == 0.0:
                for j in range(p):
                    outT[c, j] += X[i, j] * (a * V[k, j])
            else:
                for j in range(p):
                    outT[c, j] += X[i, j] * (a * V[k, j] + b * U[k, j])


def gram(const double[:, ::1] X, const Py_ssize_t[::1] ex,
         const Py_ssize_t[::1] class_ptr, const Py_ssize_t[::1] class_idx,
         double[:, ::1] outT, int nthreads=1):
    cdef Py_ssize_t C = class_ptr.shape[0] - 1
    cdef Py_ssize_t p = X.shape[1]
    cdef Py_ssize_t c, t, k, j, i
    for c in prange(C, nogil=True, num_threads=nthreads, schedule="static"):
        for j in range(p):
            outT[c, j] = 0.0
        for t in range(class_ptr[c], class_ptr[c + 1]):
            k = class_idx[t]
            i = ex[k]
            for j in range(p):
                outT[c, j] += X[i, j] * X[i, j]


def group_norms(const double[:, ::1] V, double[::1] out, int nthreads=1):
    cdef Py_ssize_t m = V.shape[0]
    cdef Py_ssize_t p = V.shape[1]
    cdef Py_ssize_t k, j
    cdef double acc
    for k in prange(m, nogil=True, num_threads=nthreads, schedule="static"):
        acc = 0.0
        for j in range(p):
            acc = acc + V[k, j] * V[k, j]
        out[k] = sqrt(acc)


def prox_groups(const double[:, ::1] Z, const double[::1] alpha,
                double[:, ::1] out, int nthreads=1):
    """Group soft-thresholding of every row of ``Z``; ``out`` may alias ``Z``."""
    cdef Py_ssize_t m = Z.shape[0]
    cdef Py_ssize_t p = Z.shape[1]
    cdef Py_ssize_t k, j
    cdef double acc, nrm, scale
    for k in prange(m, nogil=True, num_threads=nthreads, schedule="static"):
        acc = 0.0
        for j in range(p):
            acc = acc + Z[k, j] * Z[k, j]
        nrm = sqrt(acc)
        if nrm <= alpha[k]:
            scale = 0.0
        else:
            scale = (nrm - alpha[k]) / nrm
        for j in range(p):
            out[k, j] = scale * Z[k, j]


def vu_update(const double[:, ::1] X, const double[:, ::1] Wt,
              double[:, ::1] V, double[:, ::1] U,
              const Py_ssize_t[::1] ex, const Py_ssize_t[::1] cls,
              double rho, const double[::1] alpha, double[::1] res,
              int nthreads=1):
    """Fused v- and u-updates.

    For each group: z = F_g w - u_g / rho, v_g = prox(z, alpha_g),
    u_g += rho (v_g - F_g w).  ``res[k]`` receives ||v_g - F_g w||^2.
    """
    cdef Py_ssize_t m = ex.shape[0]
    cdef Py_ssize_t p = X.shape[1]
    cdef Py_ssize_t k, j, i, c
    cdef double acc, nrm, scale, fw, z, r, racc
    for k in prange(m, nogil=True, num_threads=nthreads, schedule="static"):
        i = ex[k]
        c = cls[k]
        acc = 0.0
        for j in range(p):
            z = X[i, j] * Wt[c, j] - U[k, j] / rho
            acc = acc + z * z
        nrm = sqrt(acc)
        if nrm <= alpha[k]:
            scale = 0.0
        else:
            scale = (nrm - alpha[k]) / nrm
        racc = 0.0
        for j in range(p):
            fw = X[i, j] * Wt[c, j]
            z = fw - U[k, j] / rho
            V[k, j] = scale * z
            r = V[k, j] - fw
            U[k, j] = U[k, j] + rho * r
            racc = racc + r * r
        res[k] = racc
