# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled small-matrix kernels.

Same call signatures and results as ``_pykernels``; the loops run without the
GIL so the campaign thread pool can overlap them.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs
from libc.stdlib cimport malloc, free

from .errors import RankDeficientInput

cnp.import_array()

NAME = "cython"

ctypedef double complex cplx

cdef extern from "complex.h" nogil:
    double cabs(double complex)
    double complex conj(double complex)


def kron(a, b):
    cdef const cplx[:, ::1] A = np.ascontiguousarray(a, dtype=np.complex128)
    cdef const cplx[:, ::1] B = np.ascontiguousarray(b, dtype=np.complex128)
    cdef Py_ssize_t ar = A.shape[0], ac = A.shape[1], br = B.shape[0], bc = B.shape[1]
    out = np.empty((ar * br, ac * bc), dtype=np.complex128)
    cdef cplx[:, ::1] O = out
    cdef Py_ssize_t i, j, k, l
    cdef cplx aij
    with nogil:
        for i in range(ar):
            for j in range(ac):
                aij = A[i, j]
                for k in range(br):
                    for l in range(bc):
                        O[i * br + k, j * bc + l] = aij * B[k, l]
    return out


def partial_trace(m, bint keep_first, Py_ssize_t dA, Py_ssize_t dB):
    cdef const cplx[:, ::1] M = np.ascontiguousarray(m, dtype=np.complex128)
    cdef Py_ssize_t a, b, j
    cdef cplx s
    if keep_first:
        out = np.empty((dA, dA), dtype=np.complex128)
    else:
        out = np.empty((dB, dB), dtype=np.complex128)
    cdef cplx[:, ::1] O = out
    with nogil:
        if keep_first:
            for a in range(dA):
                for b in range(dA):
                    s = 0
                    for j in range(dB):
                        s = s + M[a * dB + j, b * dB + j]
                    O[a, b] = s
        else:
            for a in range(dB):
                for b in range(dB):
                    s = 0
                    for j in range(dA):
                        s = s + M[j * dB + a, j * dB + b]
                    O[a, b] = s
    return out


def apply_pair(V, rho, Py_ssize_t d_out, Py_ssize_t d_env):
    """Return ``(Tr_env(V rho V^+), Tr_out(V rho V^+))``."""
    cdef const cplx[:, ::1] Vm = np.ascontiguousarray(V, dtype=np.complex128)
    cdef const cplx[:, ::1] R = np.ascontiguousarray(rho, dtype=np.complex128)
    cdef Py_ssize_t n = Vm.shape[0], d = Vm.shape[1]
    cdef Py_ssize_t a, b, e, f, k, l
    cdef cplx s
    T_arr = np.empty((n, d), dtype=np.complex128)
    out = np.empty((d_out, d_out), dtype=np.complex128)
    env = np.empty((d_env, d_env), dtype=np.complex128)
    cdef cplx[:, ::1] T = T_arr
    cdef cplx[:, ::1] O = out
    cdef cplx[:, ::1] E = env
    with nogil:
        for a in range(n):
            for l in range(d):
                s = 0
                for k in range(d):
                    s = s + Vm[a, k] * R[k, l]
                T[a, l] = s
        for a in range(d_out):
            for b in range(d_out):
                s = 0
                for e in range(d_env):
                    for k in range(d):
                        s = s + T[a * d_env + e, k] * conj(Vm[b * d_env + e, k])
                O[a, b] = s
        for e in range(d_env):
            for f in range(d_env):
                s = 0
                for a in range(d_out):
                    for k in range(d):
                        s = s + T[a * d_env + e, k] * conj(Vm[a * d_env + f, k])
                E[e, f] = s
    return out, env


def gram_schmidt(m):
    cdef cplx[:, ::1] Q
    q = np.array(m, dtype=np.complex128, order="C", copy=True)
    Q = q
    cdef Py_ssize_t n = Q.shape[0], kcols = Q.shape[1]
    cdef Py_ssize_t i, j, r, p
    cdef cplx c
    cdef double norm0, norm, tol = n * 2.220446049250313e-16
    cdef Py_ssize_t bad = -1
    with nogil:
        for j in range(kcols):
            norm0 = 0.0
            for r in range(n):
                norm0 += Q[r, j].real * Q[r, j].real + Q[r, j].imag * Q[r, j].imag
            norm0 = sqrt(norm0)
            if j > 0:
                for p in range(2):
                    for i in range(j):
                        c = 0
                        for r in range(n):
                            c = c + conj(Q[r, i]) * Q[r, j]
                        for r in range(n):
                            Q[r, j] = Q[r, j] - c * Q[r, i]
            norm = 0.0
            for r in range(n):
                norm += Q[r, j].real * Q[r, j].real + Q[r, j].imag * Q[r, j].imag
            norm = sqrt(norm)
            if norm0 == 0.0 or norm <= tol * norm0:
                bad = j
                break
            for r in range(n):
                Q[r, j] = Q[r, j] / norm
    if bad >= 0:
        raise RankDeficientInput(f"column {bad} is linearly dependent on earlier columns")
    return q


cdef double _abs_det(cplx* buf, Py_ssize_t r) noexcept nogil:
    # in-place LU with partial pivoting; returns |det|
    cdef Py_ssize_t i, j, k, piv
    cdef double best, val, det = 1.0
    cdef cplx tmp, factor
    for k in range(r):
        piv = k
        best = cabs(buf[k * r + k])
        for i in range(k + 1, r):
            val = cabs(buf[i * r + k])
            if val > best:
                best = val
                piv = i
        if best == 0.0:
            return 0.0
        if piv != k:
            for j in range(r):
                tmp = buf[k * r + j]
                buf[k * r + j] = buf[piv * r + j]
                buf[piv * r + j] = tmp
        det *= best
        for i in range(k + 1, r):
            factor = buf[i * r + k] / buf[k * r + k]
            for j in range(k + 1, r):
                buf[i * r + j] = buf[i * r + j] - factor * buf[k * r + j]
    return det


def det_r(x, Py_ssize_t r):
    cdef const cplx[:, ::1] X = np.ascontiguousarray(x, dtype=np.complex128)
    cdef Py_ssize_t d = X.shape[0]
    cdef Py_ssize_t i, j, t
    cdef double total = 0.0
    cdef Py_ssize_t* idx = <Py_ssize_t*> malloc(r * sizeof(Py_ssize_t))
    cdef cplx* buf = <cplx*> malloc(r * r * sizeof(cplx))
    if idx == NULL or buf == NULL:
        free(idx)
        free(buf)
        raise MemoryError()
    with nogil:
        for i in range(r):
            idx[i] = i
        while True:
            for i in range(r):
                for j in range(r):
                    buf[i * r + j] = X[idx[i], idx[j]]
            total += _abs_det(buf, r)
            # next combination in lexicographic order
            t = r - 1
            while t >= 0 and idx[t] == d - r + t:
                t -= 1
            if t < 0:
                break
            idx[t] += 1
            for i in range(t + 1, r):
                idx[i] = idx[i - 1] + 1
    free(idx)
    free(buf)
    return total
