# cython: language_level=3
"""Compiled subset scans; same contract as :mod:`spaceiv._pykernels`."""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, sqrt, NAN, isfinite
from libc.stdlib cimport malloc, free

cnp.import_array()

cdef int MAX_JACOBI_SWEEPS = 100


cdef inline void _gather(const double[:, ::1] G, const cnp.intp_t[::1] idx, int p, double* out) noexcept nogil:
    cdef int i, j
    for i in range(p):
        for j in range(p):
            out[i * p + j] = G[idx[i], idx[j]]


cdef int _cholesky(double* a, int p) noexcept nogil:
    """In-place lower Cholesky factor; returns 0 on success."""
    cdef int i, j, k
    cdef double s
    for j in range(p):
        s = a[j * p + j]
        for k in range(j):
            s -= a[j * p + k] * a[j * p + k]
        if not (s > 0.0):
            return 1
        s = sqrt(s)
        a[j * p + j] = s
        for i in range(j + 1, p):
            for k in range(j):
                a[i * p + j] -= a[i * p + k] * a[j * p + k]
            a[i * p + j] /= s
        for i in range(j):
            a[i * p + j] = 0.0
    return 0


cdef void _lower_inverse(const double* L, double* Li, int p) noexcept nogil:
    cdef int i, j, k
    cdef double s
    for i in range(p * p):
        Li[i] = 0.0
    for j in range(p):
        Li[j * p + j] = 1.0 / L[j * p + j]
        for i in range(j + 1, p):
            s = 0.0
            for k in range(j, i):
                s -= L[i * p + k] * Li[k * p + j]
            Li[i * p + j] = s / L[i * p + i]


cdef int _jacobi_min(double* a, double* vecs, int p, double* out_val, double* out_vec) noexcept nogil:
    """Cyclic Jacobi on symmetric ``a`` (destroyed); writes the smallest
    eigenvalue and its unit eigenvector."""
    cdef int i, j, k, sweep, best
    cdef double off, app, aqq, apq, theta, t, c, s, akp, akq, vkp, vkq, scale
    for i in range(p):
        for j in range(p):
            vecs[i * p + j] = 1.0 if i == j else 0.0
    for sweep in range(MAX_JACOBI_SWEEPS):
        off = 0.0
        scale = 0.0
        for i in range(p):
            scale += a[i * p + i] * a[i * p + i]
            for j in range(i + 1, p):
                off += a[i * p + j] * a[i * p + j]
        if off <= 1e-30 * scale or off == 0.0:
            break
        for i in range(p - 1):
            for j in range(i + 1, p):
                apq = a[i * p + j]
                if apq == 0.0:
                    continue
                app = a[i * p + i]
                aqq = a[j * p + j]
                theta = (aqq - app) / (2.0 * apq)
                t = 1.0 / (fabs(theta) + sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / sqrt(t * t + 1.0)
                s = t * c
                for k in range(p):
                    akp = a[k * p + i]
                    akq = a[k * p + j]
                    a[k * p + i] = c * akp - s * akq
                    a[k * p + j] = s * akp + c * akq
                for k in range(p):
                    akp = a[i * p + k]
                    akq = a[j * p + k]
                    a[i * p + k] = c * akp - s * akq
                    a[j * p + k] = s * akp + c * akq
                a[i * p + j] = 0.0
                a[j * p + i] = 0.0
                for k in range(p):
                    vkp = vecs[k * p + i]
                    vkq = vecs[k * p + j]
                    vecs[k * p + i] = c * vkp - s * vkq
                    vecs[k * p + j] = s * vkp + c * vkq
    else:
        return 1
    best = 0
    for i in range(1, p):
        if a[i * p + i] < a[best * p + best]:
            best = i
    out_val[0] = a[best * p + best]
    for k in range(p):
        out_vec[k] = vecs[k * p + best]
    return 0


def liml_scan(gp, gm, subsets):
    cdef const double[:, ::1] P = np.ascontiguousarray(gp, dtype=np.float64)
    cdef const double[:, ::1] M = np.ascontiguousarray(gm, dtype=np.float64)
    cdef cnp.intp_t[:, ::1] sub = np.ascontiguousarray(subsets, dtype=np.intp)
    cdef Py_ssize_t k = sub.shape[0], r
    cdef int s = <int>sub.shape[1]
    cdef int p = s + 1
    cdef int i, j, l
    cdef double kappa, vnorm, acc
    ratios_arr = np.full(k, np.nan)
    betas_arr = np.full((k, s), np.nan)
    cdef double[::1] ratios = ratios_arr
    cdef double[:, ::1] betas = betas_arr
    cdef cnp.intp_t[::1] idx = np.zeros(p, dtype=np.intp)
    cdef double* buf = <double*>malloc(7 * p * p * sizeof(double))
    if buf == NULL:
        raise MemoryError()
    cdef double* Pb = buf
    cdef double* Mb = buf + p * p
    cdef double* Li = buf + 2 * p * p
    cdef double* T = buf + 3 * p * p
    cdef double* S = buf + 4 * p * p
    cdef double* V = buf + 5 * p * p
    cdef double* u = buf + 6 * p * p
    cdef double* v = u + p
    try:
        with nogil:
            for r in range(k):
                idx[0] = 0
                for i in range(s):
                    idx[i + 1] = sub[r, i] + 1
                _gather(P, idx, p, Pb)
                _gather(M, idx, p, Mb)
                if _cholesky(Mb, p) != 0:
                    continue
                _lower_inverse(Mb, Li, p)
                # S = Li P Li^T
                for i in range(p):
                    for j in range(p):
                        acc = 0.0
                        for l in range(i + 1):
                            acc += Li[i * p + l] * Pb[l * p + j]
                        T[i * p + j] = acc
                for i in range(p):
                    for j in range(i, p):
                        acc = 0.0
                        for l in range(j + 1):
                            acc += T[i * p + l] * Li[j * p + l]
                        S[i * p + j] = acc
                        S[j * p + i] = acc
                if _jacobi_min(S, V, p, &kappa, u) != 0:
                    continue
                # v = Li^T u
                vnorm = 0.0
                for i in range(p):
                    acc = 0.0
                    for l in range(i, p):
                        acc += Li[l * p + i] * u[l]
                    v[i] = acc
                    vnorm += acc * acc
                vnorm = sqrt(vnorm)
                if not isfinite(kappa) or fabs(v[0]) < 1e-12 * vnorm:
                    continue
                ratios[r] = kappa
                for i in range(s):
                    betas[r, i] = -v[i + 1] / v[0]
    finally:
        free(buf)
    return ratios_arr, betas_arr


cdef int _spd_solve(double* G, double* rhs, double* out, int p) noexcept nogil:
    """Solve ``G x = rhs`` for SPD ``G`` (overwritten by its factor)."""
    cdef int i, l
    cdef double acc
    if _cholesky(G, p) != 0:
        return 1
    for i in range(p):
        acc = rhs[i]
        for l in range(i):
            acc -= G[i * p + l] * out[l]
        out[i] = acc / G[i * p + i]
    for i in range(p - 1, -1, -1):
        acc = out[i]
        for l in range(i + 1, p):
            acc -= G[l * p + i] * out[l]
        out[i] = acc / G[i * p + i]
    return 0


def tsls_scan(gp, gm, subsets):
    cdef const double[:, ::1] P = np.ascontiguousarray(gp, dtype=np.float64)
    cdef const double[:, ::1] M = np.ascontiguousarray(gm, dtype=np.float64)
    cdef cnp.intp_t[:, ::1] sub = np.ascontiguousarray(subsets, dtype=np.intp)
    cdef Py_ssize_t k = sub.shape[0], r
    cdef int s = <int>sub.shape[1]
    cdef int p = s + 1
    cdef int i, j
    cdef double num, den
    ratios_arr = np.full(k, np.nan)
    betas_arr = np.full((k, s), np.nan)
    cdef double[::1] ratios = ratios_arr
    cdef double[:, ::1] betas = betas_arr
    cdef cnp.intp_t[::1] idx = np.zeros(p, dtype=np.intp)
    cdef double* buf = <double*>malloc((3 * p * p + 3 * p) * sizeof(double))
    if buf == NULL:
        raise MemoryError()
    cdef double* Pb = buf
    cdef double* Mb = buf + p * p
    cdef double* G = buf + 2 * p * p
    cdef double* rhs = G + p * p
    cdef double* b = rhs + p
    cdef double* v = b + p
    try:
        with nogil:
            for r in range(k):
                idx[0] = 0
                for i in range(s):
                    idx[i + 1] = sub[r, i] + 1
                _gather(P, idx, p, Pb)
                _gather(M, idx, p, Mb)
                for i in range(s):
                    rhs[i] = Pb[(i + 1) * p]
                    for j in range(s):
                        G[i * s + j] = Pb[(i + 1) * p + j + 1]
                if _spd_solve(G, rhs, b, s) != 0:
                    continue
                v[0] = 1.0
                for i in range(s):
                    v[i + 1] = -b[i]
                num = 0.0
                den = 0.0
                for i in range(p):
                    for j in range(p):
                        num += v[i] * v[j] * Pb[i * p + j]
                        den += v[i] * v[j] * Mb[i * p + j]
                if not (den > 0.0):
                    continue
                ratios[r] = num / den
                for i in range(s):
                    betas[r, i] = b[i]
    finally:
        free(buf)
    return ratios_arr, betas_arr


def ls_scan(g, subsets):
    cdef const double[:, ::1] Gm = np.ascontiguousarray(g, dtype=np.float64)
    cdef cnp.intp_t[:, ::1] sub = np.ascontiguousarray(subsets, dtype=np.intp)
    cdef Py_ssize_t k = sub.shape[0], r
    cdef int s = <int>sub.shape[1]
    cdef int i, j
    cdef double acc
    rss_arr = np.full(k, np.nan)
    betas_arr = np.full((k, s), np.nan)
    cdef double[::1] rss = rss_arr
    cdef double[:, ::1] betas = betas_arr
    if s == 0:
        rss_arr[:] = Gm[0, 0]
        return rss_arr, betas_arr
    cdef double* G = <double*>malloc((s * s + 2 * s) * sizeof(double))
    if G == NULL:
        raise MemoryError()
    cdef double* rhs = G + s * s
    cdef double* b = rhs + s
    try:
        with nogil:
            for r in range(k):
                for i in range(s):
                    rhs[i] = Gm[sub[r, i] + 1, 0]
                    for j in range(s):
                        G[i * s + j] = Gm[sub[r, i] + 1, sub[r, j] + 1]
                if _spd_solve(G, rhs, b, s) != 0:
                    continue
                acc = Gm[0, 0]
                for i in range(s):
                    acc -= rhs[i] * b[i]
                    betas[r, i] = b[i]
                rss[r] = acc
    finally:
        free(G)
    return rss_arr, betas_arr
