# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled simulation kernels.

Same contract and operation order as ``_kernels_py``; releases the GIL so
batches can run on a thread pool.
"""
import numpy as np
from cpython.pycapsule cimport PyCapsule_GetPointer, PyCapsule_IsValid
from libc.math cimport exp, log, sqrt
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport (
    random_standard_normal_fill, random_standard_uniform_fill)

NAME = "compiled"


cdef bitgen_t* _bitgen(rng) except NULL:
    capsule = rng.bit_generator.capsule
    if not PyCapsule_IsValid(capsule, "BitGenerator"):
        raise ValueError("not a numpy BitGenerator")
    return <bitgen_t*> PyCapsule_GetPointer(capsule, "BitGenerator")


def draw_cell(rng, double shape, double lam, Py_ssize_t size, Py_ssize_t n):
    """Same draws and order as the numpy fallback, without temporaries."""
    if not shape > 0.0:
        raise ValueError("gamma shape must be positive")
    cdef bitgen_t* bg = _bitgen(rng)
    cdef bint boost = shape < 1.0
    cdef double a1 = shape + 1.0 if boost else shape
    cdef double d = a1 - 1.0 / 3.0
    cdef double c = 1.0 / sqrt(9.0 * d)
    cdef double inv_a = 1.0 / shape
    out_arr = np.empty(size)
    z_arr = np.empty((size, n))
    cdef double[::1] out = out_arr
    cdef double[:, ::1] z = z_arr
    cdef Py_ssize_t[::1] pending = np.arange(size, dtype=np.intp)
    cdef double[::1] xs = np.empty(size)
    cdef double[::1] us = np.empty(size)
    cdef Py_ssize_t k = size, i, kept
    cdef double x, u, t, v, x2
    with rng.bit_generator.lock, nogil:
        while k > 0:
            random_standard_normal_fill(bg, k, &xs[0])
            random_standard_uniform_fill(bg, k, &us[0])
            kept = 0
            for i in range(k):
                x = xs[i]
                u = us[i]
                t = 1.0 + c * x
                v = t * t * t
                if v > 0.0:
                    x2 = x * x
                    if u < 1.0 - 0.0331 * (x2 * x2) or log(u) < 0.5 * x2 + d * (1.0 - v + log(v)):
                        out[pending[i]] = d * v
                        continue
                pending[kept] = pending[i]
                kept += 1
            k = kept
        if boost and size > 0:
            random_standard_uniform_fill(bg, size, &us[0])
            for i in range(size):
                out[i] = out[i] * exp(log(us[i]) / shape)
        for i in range(size):
            out[i] = out[i] / lam
        if size > 0 and n > 0:
            random_standard_normal_fill(bg, size * n, &z[0, 0])
    return out_arr, z_arr


def mt_accept(const double[::1] x, const double[::1] u, double d, double c, double[::1] out):
    cdef Py_ssize_t i, k = x.shape[0]
    cdef double t, v, x2
    acc_arr = np.zeros(k, dtype=np.bool_)
    cdef unsigned char[::1] acc = acc_arr.view(np.uint8)
    with nogil:
        for i in range(k):
            t = 1.0 + c * x[i]
            v = t * t * t
            out[i] = d * v
            if v <= 0.0:
                continue
            x2 = x[i] * x[i]
            if u[i] < 1.0 - 0.0331 * (x2 * x2):
                acc[i] = 1
            elif log(u[i]) < 0.5 * x2 + d * (1.0 - v + log(v)):
                acc[i] = 1
    return acc_arr


def walk(const double[:, ::1] gamma, const double[:, :, ::1] z,
         const double[:, ::1] drift, const double[:, ::1] bt,
         const double[:, :, ::1] chol, const double[:, ::1] eta,
         int kind, double strike, const double[::1] spot,
         const unsigned char[::1] avg_flags, double log_mgf,
         double[::1] out_payoff, double[::1] out_loglr):
    cdef Py_ssize_t m = gamma.shape[0], N = gamma.shape[1], n = drift.shape[1]
    cdef Py_ssize_t p, j, i, k
    cdef int n_avg = 0
    cdef double g, sg, s, dx, total, val
    # cell-major sweep over per-path state keeps memory access sequential
    xbuf = np.zeros((N, n), dtype=np.float64)
    lrbuf = np.zeros(N, dtype=np.float64)
    accbuf = np.zeros(N, dtype=np.float64)
    cdef double[:, ::1] x = xbuf
    cdef double[::1] lr = lrbuf
    cdef double[::1] acc = accbuf
    for j in range(m):
        if avg_flags[j]:
            n_avg += 1
    with nogil:
        for j in range(m):
            for p in range(N):
                g = gamma[j, p]
                sg = sqrt(g)
                for i in range(n):
                    s = chol[j, i, 0] * z[j, p, 0]
                    for k in range(1, i + 1):
                        s = s + chol[j, i, k] * z[j, p, k]
                    dx = drift[j, i] + bt[j, i] * g + sg * s
                    lr[p] = lr[p] + eta[j, i] * dx
                    x[p, i] = x[p, i] + dx
                if kind == 1 and avg_flags[j]:
                    acc[p] = acc[p] + spot[0] * exp(x[p, 0])
        for p in range(N):
            if kind == 1:
                val = strike - acc[p] / n_avg
            else:
                total = spot[0] * exp(x[p, 0])
                for i in range(1, n):
                    total = total + spot[i] * exp(x[p, i])
                val = strike - total
            out_payoff[p] = val if val > 0.0 else 0.0
            out_loglr[p] = log_mgf - lr[p]
