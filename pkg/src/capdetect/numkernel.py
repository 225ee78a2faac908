"""Dense complex linear algebra used throughout the package.

Matrices are plain ``numpy`` arrays of dtype ``complex128``. Eigen- and
singular-value problems go to LAPACK through :mod:`numpy.linalg`; the
structural kernels (Kronecker product, partial trace, principal-minor sums)
come from the backend picked in :mod:`capdetect._backend`.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .errors import (
    ConvergenceFailure,
    DimensionError,
    NonHermitianInput,
    SignificantNegativeEigenvalue,
    ZeroVector,
)

EPS = np.finfo(float).eps
#: Largest row or column count any kernel will produce.
MAX_DIM = 4096
HERMITIAN_TOL = 1e-8
NEGATIVE_EIG_TOL = 1e-9


class Keep(str, enum.Enum):
    FIRST = "first"
    SECOND = "second"


def as_cmatrix(a, name="matrix"):
    """Coerce to a finite 2-D complex128 array."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim == 1:
        m = m.reshape(-1, 1)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise DimensionError(f"{name} must be a non-empty 2-D array, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    return m


@dataclass(frozen=True)
class HermitianEig:
    eigenvalues: np.ndarray  # descending
    eigenvectors: np.ndarray  # columns


@dataclass(frozen=True)
class RankReport:
    rank: int
    singular_values: np.ndarray  # descending
    threshold: float

    def near_threshold(self, factor=10.0):
        """True if some singular value lies within ``factor`` of the threshold."""
        s = self.singular_values
        if self.threshold == 0.0:
            return False
        return bool(np.any((s > self.threshold / factor) & (s < self.threshold * factor)))


def rank_threshold(rows, cols, smax):
    return max(rows, cols) * EPS * float(smax)


def kron(a, b):
    a = as_cmatrix(a, "a")
    b = as_cmatrix(b, "b")
    r, c = a.shape[0] * b.shape[0], a.shape[1] * b.shape[1]
    if r > MAX_DIM or c > MAX_DIM:
        raise DimensionError(f"kron result {r}x{c} exceeds MAX_DIM={MAX_DIM}")
    return kernels.kron(a, b)


def partial_trace(m, keep, dA, dB):
    """Trace out one factor of a ``dA*dB`` square matrix.

    ``keep=Keep.FIRST`` returns the ``dA x dA`` reduced matrix (second factor
    traced out); ``Keep.SECOND`` the ``dB x dB`` one.
    """
    m = as_cmatrix(m)
    keep = Keep(keep)
    if m.shape != (dA * dB, dA * dB):
        raise DimensionError(f"expected {dA * dB}x{dA * dB} matrix, got {m.shape[0]}x{m.shape[1]}")
    return kernels.partial_trace(m, keep is Keep.FIRST, dA, dB)


def check_hermitian(a, tol=HERMITIAN_TOL):
    a = as_cmatrix(a)
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got {a.shape}")
    resid = np.linalg.norm(a - a.conj().T)
    if resid > tol * max(1.0, np.linalg.norm(a)):
        raise NonHermitianInput(f"||A - A^+||_F = {resid:.3e} exceeds tolerance")
    return a


def hermitian_eig(a):
    a = check_hermitian(a)
    h = 0.5 * (a + a.conj().T)
    try:
        w, u = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc
    return HermitianEig(eigenvalues=w[::-1].copy(), eigenvectors=u[:, ::-1].copy())


def svd_rank(a):
    a = as_cmatrix(a)
    try:
        s = np.linalg.svd(a, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc
    smax = s[0] if s.size else 0.0
    thr = rank_threshold(a.shape[0], a.shape[1], smax)
    return RankReport(rank=int(np.count_nonzero(s > thr)), singular_values=s, threshold=thr)


def von_neumann_entropy(rho):
    """Entropy in bits of a density matrix."""
    rho = check_hermitian(rho)
    lam = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    if lam.size and lam[0] < -NEGATIVE_EIG_TOL:
        raise SignificantNegativeEigenvalue(f"minimum eigenvalue {lam[0]:.3e} < -{NEGATIVE_EIG_TOL:g}")
    return entropy_of_spectrum(lam)


def entropy_of_spectrum(lam):
    lam = np.clip(np.asarray(lam, dtype=float), 0.0, 1.0)
    lam = lam[lam > 0.0]
    return float(-np.sum(lam * np.log2(lam)))


def schmidt_matrix(v, dA, dB):
    v = np.asarray(v, dtype=np.complex128).reshape(-1)
    if v.size != dA * dB:
        raise DimensionError(f"vector of length {v.size} does not split as {dA}x{dB}")
    return v.reshape(dA, dB)


def schmidt_rank(v, dA, dB):
    m = schmidt_matrix(v, dA, dB)
    if not np.any(m):
        raise ZeroVector("Schmidt rank of the zero vector is undefined")
    return svd_rank(m)


def det_r(x, r):
    """Sum of absolute values of all ``r x r`` principal minors."""
    x = as_cmatrix(x)
    d = x.shape[0]
    if x.shape[1] != d:
        raise DimensionError(f"det_r needs a square matrix, got {x.shape}")
    if not 1 <= r <= d:
        raise DimensionError(f"minor size r={r} outside [1, {d}]")
    return float(kernels.det_r(x, int(r)))
