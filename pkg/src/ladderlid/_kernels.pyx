# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Fused loops for the combinator and batch-norm backward passes.

Same contracts as ``_kernels_py``; one pass over the data instead of a chain
of numpy temporaries.
"""

import numpy as np
from libc.math cimport exp


cdef inline double _sig(double x) nogil:
    return 1.0 / (1.0 + exp(-x))


def combinator_forward(z_tilde, u, a):
    cdef double[:, ::1] uu = np.ascontiguousarray(u, dtype=np.float64)
    cdef double[:, ::1] aa = np.ascontiguousarray(a, dtype=np.float64)
    cdef Py_ssize_t n = uu.shape[0], w = uu.shape[1], i, j
    out = np.empty((n, w))
    cdef double[:, ::1] o = out
    cdef double[:, ::1] zt
    cdef double x, mu, v
    if z_tilde is None:
        with nogil:
            for i in range(n):
                for j in range(w):
                    o[i, j] = aa[3, j] * uu[i, j] + aa[4, j]
        return out
    zt = np.ascontiguousarray(z_tilde, dtype=np.float64)
    with nogil:
        for i in range(n):
            for j in range(w):
                x = uu[i, j]
                mu = aa[0, j] * _sig(aa[1, j] * x + aa[2, j]) + aa[3, j] * x + aa[4, j]
                v = aa[5, j] * _sig(aa[6, j] * x + aa[7, j]) + aa[8, j] * x + aa[9, j]
                o[i, j] = (zt[i, j] - mu) * v + mu
    return out


def combinator_backward(z_tilde, u, a, g):
    cdef double[:, ::1] uu = np.ascontiguousarray(u, dtype=np.float64)
    cdef double[:, ::1] aa = np.ascontiguousarray(a, dtype=np.float64)
    cdef double[:, ::1] gg = np.ascontiguousarray(g, dtype=np.float64)
    cdef Py_ssize_t n = uu.shape[0], w = uu.shape[1], i, j
    ga_arr = np.zeros((10, w))
    gu_arr = np.empty((n, w))
    cdef double[:, ::1] ga = ga_arr
    cdef double[:, ::1] gu = gu_arr
    cdef double[:, ::1] zt
    cdef double[:, ::1] gz
    cdef double x, gi, s1, s2, d1, d2, mu, v, gmu, gv
    if z_tilde is None:
        with nogil:
            for i in range(n):
                for j in range(w):
                    gi = gg[i, j]
                    ga[3, j] += gi * uu[i, j]
                    ga[4, j] += gi
                    gu[i, j] = gi * aa[3, j]
        return None, gu_arr, ga_arr
    zt = np.ascontiguousarray(z_tilde, dtype=np.float64)
    gz_arr = np.empty((n, w))
    gz = gz_arr
    with nogil:
        for i in range(n):
            for j in range(w):
                x = uu[i, j]
                gi = gg[i, j]
                s1 = _sig(aa[1, j] * x + aa[2, j])
                s2 = _sig(aa[6, j] * x + aa[7, j])
                d1 = s1 * (1.0 - s1)
                d2 = s2 * (1.0 - s2)
                mu = aa[0, j] * s1 + aa[3, j] * x + aa[4, j]
                v = aa[5, j] * s2 + aa[8, j] * x + aa[9, j]
                gz[i, j] = gi * v
                gmu = gi * (1.0 - v)
                gv = gi * (zt[i, j] - mu)
                ga[0, j] += gmu * s1
                ga[1, j] += gmu * aa[0, j] * d1 * x
                ga[2, j] += gmu * aa[0, j] * d1
                ga[3, j] += gmu * x
                ga[4, j] += gmu
                ga[5, j] += gv * s2
                ga[6, j] += gv * aa[5, j] * d2 * x
                ga[7, j] += gv * aa[5, j] * d2
                ga[8, j] += gv * x
                ga[9, j] += gv
                gu[i, j] = (gmu * (aa[0, j] * d1 * aa[1, j] + aa[3, j])
                            + gv * (aa[5, j] * d2 * aa[6, j] + aa[8, j]))
    return gz_arr, gu_arr, ga_arr


def bn_backward(g, z, std, g_mean=None, g_std=None):
    cdef double[:, ::1] gg = np.ascontiguousarray(g, dtype=np.float64)
    cdef double[:, ::1] zz = np.ascontiguousarray(z, dtype=np.float64)
    cdef double[::1] sd = np.ascontiguousarray(std, dtype=np.float64)
    cdef Py_ssize_t n = gg.shape[0], w = gg.shape[1], i, j
    tm_arr = np.zeros(w)
    ts_arr = np.zeros(w)
    cdef double[::1] tm = tm_arr
    cdef double[::1] ts = ts_arr
    cdef double[::1] em
    cdef double[::1] es
    out = np.empty((n, w))
    cdef double[:, ::1] o = out
    with nogil:
        for i in range(n):
            for j in range(w):
                tm[j] += gg[i, j]
                ts[j] += gg[i, j] * zz[i, j]
        for j in range(w):
            tm[j] = -tm[j] / sd[j]
            ts[j] = -ts[j] / sd[j]
    if g_mean is not None:
        em = np.ascontiguousarray(g_mean, dtype=np.float64)
        for j in range(w):
            tm[j] += em[j]
    if g_std is not None:
        es = np.ascontiguousarray(g_std, dtype=np.float64)
        for j in range(w):
            ts[j] += es[j]
    with nogil:
        for i in range(n):
            for j in range(w):
                o[i, j] = gg[i, j] / sd[j] + (tm[j] + ts[j] * zz[i, j]) / n
    return out
