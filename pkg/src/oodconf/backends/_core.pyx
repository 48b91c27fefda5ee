# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled dense kernels for the per-sample forward/backward passes.

All arrays must be C-contiguous float64; the callers in ``oodconf.net``
guarantee this. Semantics mirror ``pyref`` exactly (including the
relu_grad subgradient-at-zero convention).
"""

import numpy as np

NAME = "compiled"


def affine(double[:, ::1] W, double[::1] b, double[::1] x):
    cdef Py_ssize_t m = W.shape[0]
    cdef Py_ssize_t n = W.shape[1]
    out_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double acc
    for i in range(m):
        acc = b[i]
        for j in range(n):
            acc += W[i, j] * x[j]
        out[i] = acc
    return out_arr


def affine_input_grad(double[:, ::1] W, double[::1] dz):
    cdef Py_ssize_t m = W.shape[0]
    cdef Py_ssize_t n = W.shape[1]
    out_arr = np.zeros(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double g
    for i in range(m):
        g = dz[i]
        for j in range(n):
            out[j] += g * W[i, j]
    return out_arr


def weight_grad(double[::1] dz, double[::1] x):
    cdef Py_ssize_t m = dz.shape[0]
    cdef Py_ssize_t n = x.shape[0]
    out_arr = np.empty((m, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double g
    for i in range(m):
        g = dz[i]
        for j in range(n):
            out[i, j] = g * x[j]
    return out_arr


def relu(double[::1] z):
    cdef Py_ssize_t n = z.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i
    for i in range(n):
        out[i] = z[i] if z[i] > 0.0 else 0.0
    return out_arr


def relu_grad(double[::1] z, double[::1] da):
    cdef Py_ssize_t n = z.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i
    for i in range(n):
        out[i] = da[i] if z[i] > 0.0 else 0.0
    return out_arr
