"""Quantum channels held as Stinespring isometries.

A channel ``Phi: M_d -> M_dout`` is stored through an isometry
``V: C^d -> C^dout (x) C^denv``; rows of ``V`` are indexed as
``out * d_env + env``. Both the channel and its complement are read off the
same ``V``, so the two are always a matched pair.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import numkernel as nk
from ._backend import kernels
from .errors import DimensionError, InvalidChannel, InvalidChoi, RankInconsistency

ISOMETRY_TOL = 1e-10
CHOI_HERMITIAN_TOL = 1e-10
CHOI_PSD_TOL = 1e-9
CHOI_TP_TOL = 1e-9


@dataclass(frozen=True)
class QuantumChannel:
    d_in: int
    d_out: int
    d_env: int
    V: np.ndarray = field(repr=False)

    def __post_init__(self):
        V = np.array(self.V, dtype=np.complex128, order="C", copy=True)
        if self.d_in < 1 or self.d_out < 1 or self.d_env < 1:
            raise InvalidChannel("dimensions must be positive integers")
        if self.d_in > self.d_out * self.d_env:
            raise InvalidChannel(
                f"d_in={self.d_in} exceeds d_out*d_env={self.d_out * self.d_env}; no isometry exists"
            )
        if V.shape != (self.d_out * self.d_env, self.d_in):
            raise InvalidChannel(
                f"isometry has shape {V.shape}, expected {(self.d_out * self.d_env, self.d_in)}"
            )
        if not np.all(np.isfinite(V)):
            raise InvalidChannel("isometry has non-finite entries")
        resid = isometry_residual(V)
        if resid > ISOMETRY_TOL:
            raise InvalidChannel(f"isometry invariant violated: ||V^+V - 1||_F = {resid:.3e}")
        V.setflags(write=False)
        object.__setattr__(self, "V", V)

    def complement(self):
        """The complementary channel, with out and env swapped in ``V``."""
        Vc = self.V.reshape(self.d_out, self.d_env, self.d_in).transpose(1, 0, 2)
        return QuantumChannel(self.d_in, self.d_env, self.d_out, Vc.reshape(-1, self.d_in))


@dataclass(frozen=True)
class ChoiMatrix:
    d_in: int
    d_out: int
    J: np.ndarray = field(repr=False)

    def __post_init__(self):
        J = np.array(self.J, dtype=np.complex128, order="C", copy=True)
        n = self.d_out * self.d_in
        if J.shape != (n, n):
            raise InvalidChoi(f"Choi matrix has shape {J.shape}, expected {(n, n)}")
        if not np.all(np.isfinite(J)):
            raise InvalidChoi("Choi matrix has non-finite entries")
        herm = np.linalg.norm(J - J.conj().T)
        if herm > CHOI_HERMITIAN_TOL * max(1.0, np.linalg.norm(J)):
            raise InvalidChoi(f"Hermiticity violated: ||J - J^+||_F = {herm:.3e}")
        lam_min = np.linalg.eigvalsh(0.5 * (J + J.conj().T))[0]
        if lam_min < -CHOI_PSD_TOL:
            raise InvalidChoi(f"complete positivity violated: minimum eigenvalue {lam_min:.3e}")
        tp = np.linalg.norm(nk.partial_trace(J, nk.Keep.SECOND, self.d_out, self.d_in) - np.eye(self.d_in))
        if tp > CHOI_TP_TOL:
            raise InvalidChoi(f"trace preservation violated: ||Tr_out J - 1||_F = {tp:.3e}")
        J.setflags(write=False)
        object.__setattr__(self, "J", J)


@dataclass(frozen=True)
class MinimalDims:
    d_star_out: int
    d_star_env: int
    rank_reports: tuple  # (RankReport of J(Phi), RankReport of Phi(1))

    def near_threshold(self, factor=10.0):
        return any(r.near_threshold(factor) for r in self.rank_reports)


def isometry_residual(V):
    return float(np.linalg.norm(V.conj().T @ V - np.eye(V.shape[1])))


def _check_input(ch, rho):
    rho = nk.as_cmatrix(rho, "rho")
    if rho.shape != (ch.d_in, ch.d_in):
        raise DimensionError(f"input must be {ch.d_in}x{ch.d_in}, got {rho.shape[0]}x{rho.shape[1]}")
    return rho


def apply_pair(ch, rho):
    """``(Phi(rho), Phi_c(rho))`` from a single pass over ``V``."""
    rho = _check_input(ch, rho)
    return kernels.apply_pair(ch.V, rho, ch.d_out, ch.d_env)


def apply(ch, rho):
    return apply_pair(ch, rho)[0]


def apply_complement(ch, rho):
    return apply_pair(ch, rho)[1]


def pure_output_factor(ch, psi):
    """``M`` with ``Phi(|psi><psi|) = M M^+`` and ``Phi_c(|psi><psi|) = M^T conj(M)``."""
    psi = np.asarray(psi, dtype=np.complex128).reshape(-1)
    if psi.size != ch.d_in:
        raise DimensionError(f"state vector must have length {ch.d_in}")
    return (ch.V @ psi).reshape(ch.d_out, ch.d_env)


def _choi_factor(ch):
    # w[o, e, i] = V[(o, e), i]; J = Tr_env |w><w| in (out, in) order
    w = ch.V.reshape(ch.d_out, ch.d_env, ch.d_in)
    return w.transpose(0, 2, 1).reshape(ch.d_out * ch.d_in, ch.d_env)


def choi(ch):
    M = _choi_factor(ch)
    return ChoiMatrix(ch.d_in, ch.d_out, M @ M.conj().T)


def choi_complement(ch):
    return choi(ch.complement())


def minimal_dims(ch):
    eye = np.eye(ch.d_in, dtype=np.complex128)
    out_id, env_id = apply_pair(ch, eye)
    rank_J = nk.svd_rank(choi(ch).J)
    rank_out = nk.svd_rank(out_id)
    rank_env = nk.svd_rank(env_id)
    if rank_env.rank != rank_J.rank:
        raise RankInconsistency(
            f"rank J(Phi) = {rank_J.rank} but rank Phi_c(1) = {rank_env.rank}"
        )
    return MinimalDims(d_star_out=rank_out.rank, d_star_env=rank_J.rank, rank_reports=(rank_J, rank_out))


def kraus(ch):
    w = ch.V.reshape(ch.d_out, ch.d_env, ch.d_in)
    return [w[:, e, :].copy() for e in range(ch.d_env)]


def from_kraus(ops):
    ops = [nk.as_cmatrix(k, "Kraus operator") for k in ops]
    d_out, d_in = ops[0].shape
    if any(k.shape != (d_out, d_in) for k in ops):
        raise DimensionError("Kraus operators must share one shape")
    V = np.stack(ops, axis=1).reshape(d_out * len(ops), d_in)
    return QuantumChannel(d_in, d_out, len(ops), V)


def from_choi(j):
    """Minimal Stinespring form of the channel with Choi matrix ``j``.

    Eigenvalues at or below the rank threshold are dropped, so the returned
    channel has ``d_env`` equal to the rank of ``j``.
    """
    if not isinstance(j, ChoiMatrix):
        raise InvalidChoi("from_choi expects a ChoiMatrix")
    eig = nk.hermitian_eig(j.J)
    lam = eig.eigenvalues
    n = j.J.shape[0]
    keep = lam > nk.rank_threshold(n, n, lam[0])
    ops = [
        np.sqrt(l) * eig.eigenvectors[:, k].reshape(j.d_out, j.d_in)
        for k, l in zip(np.flatnonzero(keep), lam[keep])
    ]
    V = np.stack(ops, axis=1).reshape(j.d_out * len(ops), j.d_in)
    # polar correction absorbs the tolerated trace-preservation slack
    g = V.conj().T @ V
    w, u = np.linalg.eigh(g)
    V = V @ (u * (1.0 / np.sqrt(w))) @ u.conj().T
    return QuantumChannel(j.d_in, j.d_out, len(ops), V)


# -- built-in channels ---------------------------------------------------------


def _check_p(p):
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability p={p} outside [0, 1]")


def _check_d(d, least=2):
    if int(d) != d or d < least:
        raise ValueError(f"dimension d={d} must be an integer >= {least}")


def identity(d):
    _check_d(d)
    return QuantumChannel(d, d, 1, np.eye(d))


def erasure(d, p):
    """Erasure channel onto ``C^d (+) |e>``; its complement is ``erasure(d, 1-p)``."""
    _check_d(d)
    _check_p(p)
    n = d + 1
    V = np.zeros((n * n, d), dtype=np.complex128)
    for i in range(d):
        V[i * n + d, i] += np.sqrt(1.0 - p)
        V[d * n + i, i] += np.sqrt(p)
    return QuantumChannel(d, n, n, V)


def dephasing(p):
    """Qubit dephasing ``rho -> (1 - p/2) rho + (p/2) Z rho Z``."""
    _check_p(p)
    z = np.diag([1.0, -1.0])
    return from_kraus([np.sqrt(1.0 - p / 2) * np.eye(2), np.sqrt(p / 2) * z])


def depolarizing(d, p):
    """``rho -> (1 - p) rho + p Tr(rho) 1/d`` with ``d**2`` Weyl-operator Kraus terms."""
    _check_d(d)
    _check_p(p)
    omega = np.exp(2j * np.pi / d)
    shift = np.roll(np.eye(d), 1, axis=0)
    clock = np.diag(omega ** np.arange(d))
    ops = []
    for a in range(d):
        for b in range(d):
            w = np.linalg.matrix_power(shift, a) @ np.linalg.matrix_power(clock, b)
            weight = 1.0 - p + p / d**2 if a == b == 0 else p / d**2
            ops.append(np.sqrt(weight) * w)
    return from_kraus(ops)


def werner_holevo(d):
    """``X -> (Tr(X) 1 - X^T) / (d - 1)``; every pure input gives a rank-deficient output."""
    _check_d(d)
    swap = np.zeros((d * d, d * d))
    for i in range(d):
        for j in range(d):
            swap[i * d + j, j * d + i] = 1.0
    J = (np.eye(d * d) - swap) / (d - 1)
    return from_choi(ChoiMatrix(d, d, J))


BUILTINS = {
    "identity": lambda d, p: identity(d),
    "erasure": lambda d, p: erasure(d, p),
    "dephasing": lambda d, p: dephasing(p),
    "depolarizing": lambda d, p: depolarizing(d, p),
    "werner-holevo": lambda d, p: werner_holevo(d),
}


# -- JSON ----------------------------------------------------------------------


def matrix_to_pairs(m):
    m = np.asarray(m, dtype=np.complex128).reshape(-1)
    return [[float(z.real), float(z.imag)] for z in m]


def pairs_to_matrix(pairs, rows, cols, name):
    arr = np.asarray(pairs, dtype=float)
    if arr.shape != (rows * cols, 2):
        raise ValueError(f"{name}: expected {rows * cols} [re, im] pairs, got array of shape {arr.shape}")
    return (arr[:, 0] + 1j * arr[:, 1]).reshape(rows, cols)


def channel_to_dict(ch):
    return {
        "d_in": ch.d_in,
        "d_out": ch.d_out,
        "d_env": ch.d_env,
        "isometry": matrix_to_pairs(ch.V),
    }


def _dim(obj, key):
    v = obj.get(key)
    if not isinstance(v, int) or isinstance(v, bool) or v < 1:
        raise ValueError(f"field {key!r} must be a positive integer, got {v!r}")
    return v


def channel_from_dict(obj):
    """Validate and build a channel; raises ``InvalidChannel`` naming the violation."""
    try:
        d_in, d_out, d_env = _dim(obj, "d_in"), _dim(obj, "d_out"), _dim(obj, "d_env")
        V = pairs_to_matrix(obj["isometry"], d_out * d_env, d_in, "isometry")
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidChannel(f"malformed channel JSON: {exc}") from exc
    return QuantumChannel(d_in, d_out, d_env, V)


def choi_to_dict(c):
    n = c.d_in * c.d_out
    return {"d_in": c.d_in, "d_out": c.d_out, "choi": matrix_to_pairs(c.J.reshape(n, n))}


def choi_from_dict(obj):
    try:
        d_in, d_out = _dim(obj, "d_in"), _dim(obj, "d_out")
        J = pairs_to_matrix(obj["choi"], d_in * d_out, d_in * d_out, "choi")
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidChoi(f"malformed Choi JSON: {exc}") from exc
    return ChoiMatrix(d_in, d_out, J)


def dumps_channel(ch):
    return json.dumps(channel_to_dict(ch))


def loads_channel(text):
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidChannel(f"not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise InvalidChannel("channel JSON must be an object")
    if "choi" in obj and "isometry" not in obj:
        return from_choi(choi_from_dict(obj))
    return channel_from_dict(obj)
