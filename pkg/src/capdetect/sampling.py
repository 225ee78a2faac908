"""Reproducible random matrices, isometries and channels.

Every sampler draws from a :class:`SeededStream`. A stream is keyed by
``(seed, stream_id)``; distinct ids give independent PCG64 generators via
numpy's ``SeedSequence`` spawn keys, which is what lets a Monte Carlo run hand
sample ``i`` the stream ``(seed, i)`` and stay schedule independent.
"""
from __future__ import annotations

import numpy as np

from . import numkernel as nk
from ._backend import kernels
from .channels import QuantumChannel
from .errors import DimensionError, RankDeficientInput

MASK64 = (1 << 64) - 1
MAX_RESAMPLES = 100


class SeededStream:
    """A deterministic stream of Gaussian draws.

    Attributes
    ----------
    seed, stream_id : int
        Unsigned 64-bit key of the stream.
    resamples : int
        Number of rank-deficient Ginibre draws thrown away so far.
    """

    def __init__(self, seed, stream_id=0):
        if not (0 <= seed <= MASK64 and 0 <= stream_id <= MASK64):
            raise ValueError("seed and stream_id must be unsigned 64-bit integers")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self.resamples = 0
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        self._rng = np.random.Generator(np.random.PCG64(ss))

    def __repr__(self):
        return f"SeededStream(seed={self.seed}, stream_id={self.stream_id})"

    def normal(self, shape):
        return self._rng.standard_normal(shape)

    def uniform(self, shape=None):
        return self._rng.random(shape)


def ginibre(rows, cols, stream):
    """Complex Ginibre matrix: iid entries with density ``exp(-|z|^2)/pi``."""
    if rows < 1 or cols < 1:
        raise DimensionError("ginibre needs rows, cols >= 1")
    re = stream.normal((rows, cols))
    im = stream.normal((rows, cols))
    return np.sqrt(0.5) * (re + 1j * im)


def gram_schmidt(m):
    """Orthonormalize the columns of a full-column-rank matrix.

    The first column is only normalized, so its direction is kept exactly.
    Each later column gets two modified Gram-Schmidt passes.
    """
    m = nk.as_cmatrix(m)
    rep = nk.svd_rank(m)
    if rep.rank != m.shape[1]:
        raise RankDeficientInput(f"matrix has rank {rep.rank} < {m.shape[1]} columns")
    return kernels.gram_schmidt(m)


def haar_isometry(d, d_out, d_env, stream):
    """Haar-random isometry ``C^d -> C^dout (x) C^denv`` from Gram-Schmidt on Ginibre."""
    n = d_out * d_env
    if d < 1 or d > n:
        raise DimensionError(f"no isometry from C^{d} into C^{n}")
    for _ in range(MAX_RESAMPLES):
        g = ginibre(n, d, stream)
        try:
            return kernels.gram_schmidt(g)
        except RankDeficientInput:
            stream.resamples += 1
    raise RankDeficientInput(f"{MAX_RESAMPLES} consecutive rank-deficient Ginibre draws")


def sample_channel(d, d_out, d_env, stream):
    if d <= 1:
        raise DimensionError("random channels need input dimension d > 1")
    if d > d_out * d_env:
        raise DimensionError(f"d={d} exceeds d_out*d_env={d_out * d_env}")
    return QuantumChannel(d, d_out, d_env, haar_isometry(d, d_out, d_env, stream))


def random_pure_state(d, stream):
    v = ginibre(d, 1, stream)[:, 0]
    return v / np.linalg.norm(v)


def random_density_matrix(d, stream, rank=None):
    """``A A^+ / Tr`` for a ``d x rank`` Ginibre ``A`` (Hilbert-Schmidt measure at full rank)."""
    a = ginibre(d, rank or d, stream)
    rho = a @ a.conj().T
    return rho / np.trace(rho).real
