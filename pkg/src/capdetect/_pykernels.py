"""Numpy implementations of the hot kernels.

Used when the compiled ``_ckernels`` extension is unavailable, and as the
reference the compiled versions are tested against.
"""
from itertools import combinations

import numpy as np

from .errors import RankDeficientInput

NAME = "python"


def kron(a, b):
    return np.kron(a, b)


def partial_trace(m, keep_first, dA, dB):
    t = np.asarray(m, dtype=complex).reshape(dA, dB, dA, dB)
    if keep_first:
        return np.einsum("ajbj->ab", t)
    return np.einsum("iaib->ab", t)


def apply_pair(V, rho, d_out, d_env):
    """Return ``(Tr_env(V rho V^+), Tr_out(V rho V^+))``."""
    d = V.shape[1]
    Vr = V.reshape(d_out, d_env, d)
    T = (V @ rho).reshape(d_out, d_env, d)
    out = np.einsum("aek,bek->ab", T, Vr.conj())
    env = np.einsum("aek,afk->ef", T, Vr.conj())
    return out, env


def gram_schmidt(m):
    m = np.asarray(m, dtype=complex)
    n, k = m.shape
    q = np.empty_like(m)
    tol = n * np.finfo(float).eps
    for j in range(k):
        v = m[:, j].copy()
        norm0 = np.linalg.norm(v)
        if j > 0:
            # two passes of modified Gram-Schmidt
            for _ in range(2):
                for i in range(j):
                    v -= np.vdot(q[:, i], v) * q[:, i]
        norm = np.linalg.norm(v)
        if norm0 == 0.0 or norm <= tol * norm0:
            raise RankDeficientInput(f"column {j} is linearly dependent on earlier columns")
        q[:, j] = v / norm
    return q


def det_r(x, r):
    x = np.asarray(x, dtype=complex)
    d = x.shape[0]
    idx = np.array(list(combinations(range(d), r)), dtype=np.intp)
    subs = x[idx[:, :, None], idx[:, None, :]]
    return float(np.abs(np.linalg.det(subs)).sum())
