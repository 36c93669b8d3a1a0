# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops. Signatures and semantics mirror ``_pykernels``."""
import numpy as np

cimport numpy as cnp
from libc.math cimport M_PI, cos, sin, sqrt

cnp.import_array()


def ar_recursion(const double[:, ::1] rho, const double[::1] x0,
                 const double[:, ::1] innovations):
    cdef Py_ssize_t J = rho.shape[0]
    cdef Py_ssize_t T = innovations.shape[0]
    if rho.shape[1] != J or x0.shape[0] != J or (T > 0 and innovations.shape[1] != J):
        raise ValueError("shape mismatch between rho, x0 and innovations")
    out_arr = np.empty((T + 1, J), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t t, i, k
    cdef double acc
    for i in range(J):
        out[0, i] = x0[i]
    for t in range(T):
        for i in range(J):
            acc = 0.0
            for k in range(J):
                acc = acc + rho[i, k] * out[t, k]
            out[t + 1, i] = acc + innovations[t, i]
    return out_arr


def fourier_design(const double[::1] u, Py_ssize_t dimension, const double[::1] weights):
    cdef Py_ssize_t N = u.shape[0]
    cdef Py_ssize_t J = dimension
    if weights.shape[0] != J:
        raise ValueError("weights must have one entry per basis function")
    out_arr = np.empty((N, J), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double[::1] scale = np.empty(J, dtype=np.float64)
    cdef Py_ssize_t n, k, m
    cdef double x
    scale[0] = 1.0 / sqrt(2.0 * M_PI * weights[0])
    for k in range(1, J):
        scale[k] = 1.0 / sqrt(M_PI * weights[k])
    for n in range(N):
        x = u[n]
        out[n, 0] = scale[0]
        for k in range(1, J):
            m = (k + 1) // 2
            if k % 2 == 1:
                out[n, k] = scale[k] * cos(m * x)
            else:
                out[n, k] = scale[k] * sin(m * x)
    return out_arr
