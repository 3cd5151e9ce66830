# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled numerical kernels.

Mirrors ``_kernels_py`` function for function.  The scatter-add and the Adam
step are the loops that dominate a training epoch once the dense layers are
handed to BLAS.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, asin, sqrt, pow, M_PI

cnp.import_array()

cdef double EARTH_RADIUS_KM = 6371.0
cdef double DEG = M_PI / 180.0


def embed_gather(const double[:, ::1] embedding, tokens):
    cdef const long long[:, ::1] tok = np.ascontiguousarray(tokens, dtype=np.int64)
    cdef Py_ssize_t n = tok.shape[0], length = tok.shape[1], m = embedding.shape[1]
    cdef Py_ssize_t vocab = embedding.shape[0]
    out_arr = np.empty((n, length * m), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, s, k
    cdef long long t
    for i in range(n):
        for s in range(length):
            t = tok[i, s]
            if t < 0 or t >= vocab:
                raise IndexError(f"token {t} outside embedding of {vocab} rows")
            for k in range(m):
                out[i, s * m + k] = embedding[t, k]
    return out_arr


def embed_scatter_add(const double[:, ::1] grad_flat, tokens, Py_ssize_t n_rows):
    cdef const long long[:, ::1] tok = np.ascontiguousarray(tokens, dtype=np.int64)
    cdef Py_ssize_t n = tok.shape[0], length = tok.shape[1]
    if length == 0:
        raise ValueError("tokens must have at least one slot")
    cdef Py_ssize_t m = grad_flat.shape[1] // length
    out_arr = np.zeros((n_rows, m), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, s, k
    cdef long long t
    for i in range(n):
        for s in range(length):
            t = tok[i, s]
            if t < 0 or t >= n_rows:
                raise IndexError(f"token {t} outside embedding of {n_rows} rows")
            for k in range(m):
                out[t, k] += grad_flat[i, s * m + k]
    return out_arr


def adam_update(param, grad, m, v, double lr, double beta1, double beta2,
                double eps, long step):
    cdef double[::1] p = param.reshape(-1)
    cdef const double[::1] g = np.ascontiguousarray(grad, dtype=np.float64).reshape(-1)
    cdef double[::1] mm = m.reshape(-1)
    cdef double[::1] vv = v.reshape(-1)
    cdef double c1 = 1.0 - pow(beta1, <double>step)
    cdef double c2 = 1.0 - pow(beta2, <double>step)
    cdef double one_b1 = 1.0 - beta1, one_b2 = 1.0 - beta2
    cdef Py_ssize_t i, size = p.shape[0]
    for i in range(size):
        mm[i] = mm[i] * beta1 + one_b1 * g[i]
        vv[i] = vv[i] * beta2 + one_b2 * g[i] * g[i]
        p[i] = p[i] - lr * (mm[i] / c1) / (sqrt(vv[i] / c2) + eps)


def haversine_many(lat1, lon1, lat2, lon2):
    cdef const double[::1] a1 = np.ascontiguousarray(lat1, dtype=np.float64).reshape(-1)
    cdef const double[::1] o1 = np.ascontiguousarray(lon1, dtype=np.float64).reshape(-1)
    cdef const double[::1] a2 = np.ascontiguousarray(lat2, dtype=np.float64).reshape(-1)
    cdef const double[::1] o2 = np.ascontiguousarray(lon2, dtype=np.float64).reshape(-1)
    cdef Py_ssize_t i, n = a1.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double p1, p2, sdlat, sdlon, h
    for i in range(n):
        p1 = a1[i] * DEG
        p2 = a2[i] * DEG
        sdlat = sin((p2 - p1) / 2.0)
        sdlon = sin((o2[i] - o1[i]) * DEG / 2.0)
        h = sdlat * sdlat + cos(p1) * cos(p2) * sdlon * sdlon
        if h > 1.0:
            h = 1.0
        elif h < 0.0:
            h = 0.0
        out[i] = 2.0 * EARTH_RADIUS_KM * asin(sqrt(h))
    return out_arr
