"""Coherent information and the trace-gap positivity test.

For a pure input ``psi`` the outputs ``Phi(psi)`` and ``Phi_c(psi)`` share
their nonzero spectrum, so ``I_c(psi) = 0``. Mixing in a little ``sigma``,
``rho(eps) = (1 - eps) psi + eps sigma``, the eigenvalues leaving zero grow
like ``eps * lambda_1`` and give ``I'(eps)`` a ``log2(1/eps)`` term whose
coefficient is the trace gap

    Tr(K_psi Phi(sigma)) - Tr(Kc_psi Phi_c(sigma)),

with ``K_psi``/``Kc_psi`` the kernel projectors of the two pure outputs. A
positive gap makes the channel's coherent information positive for small
``eps``; a negative one does the same for the complement.
"""
from __future__ import annotations

import enum
import io
import json
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import numkernel as nk
from .channels import (
    MinimalDims,
    apply_pair,
    matrix_to_pairs,
    minimal_dims,
    pure_output_factor,
)
from .errors import DimensionError, GridTooCoarse, NumericalAnomaly
from .sampling import SeededStream, ginibre, random_pure_state

DENSITY_TOL = 1e-9


class Verdict(str, enum.Enum):
    CHANNEL_POSITIVE = "ChannelPositive"
    COMPLEMENT_POSITIVE = "ComplementPositive"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class KernelProjector:
    dim: int
    P: np.ndarray = field(repr=False)
    kernel_dim: int


@dataclass(frozen=True)
class DetectConfig:
    tries: int = 64
    climb_steps: int = 200
    gap_threshold: float = 1e-7
    seed: int = 0


@dataclass(frozen=True)
class DetectionReport:
    verdict: Verdict
    witness_psi: np.ndarray | None
    witness_rank: int
    target_rank: int
    trace_gap: float
    minimal_dims: MinimalDims
    tries_used: int
    climb_steps_used: int = 0
    small_gap: bool = False
    search_rank_report: nk.RankReport | None = field(default=None, repr=False)

    def to_dict(self):
        md = self.minimal_dims
        return {
            "verdict": self.verdict.value,
            "witness_psi": None if self.witness_psi is None else matrix_to_pairs(self.witness_psi),
            "witness_rank": self.witness_rank,
            "target_rank": self.target_rank,
            "trace_gap": self.trace_gap,
            "small_gap": self.small_gap,
            "minimal_dims": {
                "d_star_out": md.d_star_out,
                "d_star_env": md.d_star_env,
                "rank_threshold_J": md.rank_reports[0].threshold,
                "rank_threshold_phi_id": md.rank_reports[1].threshold,
            },
            "tries_used": self.tries_used,
            "climb_steps_used": self.climb_steps_used,
        }


@dataclass(frozen=True)
class PerturbationCurve:
    psi: np.ndarray = field(repr=False)
    sigma: np.ndarray = field(repr=False)
    epsilons: np.ndarray
    ic_values: np.ndarray
    fitted_slope: float
    slope_prediction: float
    fit_intercept: float = 0.0

    def to_dict(self):
        return {
            "psi": matrix_to_pairs(self.psi),
            "sigma": matrix_to_pairs(self.sigma),
            "epsilons": [float(e) for e in self.epsilons],
            "ic_values": [float(v) for v in self.ic_values],
            "fitted_slope": self.fitted_slope,
            "slope_prediction": self.slope_prediction,
        }

    def to_csv(self):
        buf = io.StringIO()
        buf.write("epsilon,ic_bits\n")
        for e, v in zip(self.epsilons, self.ic_values):
            buf.write(f"{float(e)!r},{float(v)!r}\n")
        return buf.getvalue()


class SearchResult(NamedTuple):
    psi: np.ndarray
    rank: nk.RankReport
    tries_used: int
    climb_steps_used: int


class MaximizeResult(NamedTuple):
    rho: np.ndarray
    value: float
    history: list  # best value after each restart


# -- states --------------------------------------------------------------------


def check_density(rho, d):
    rho = nk.check_hermitian(rho)
    if rho.shape != (d, d):
        raise DimensionError(f"density matrix must be {d}x{d}, got {rho.shape}")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > DENSITY_TOL:
        raise ValueError(f"density matrix has trace {tr:.12g}, expected 1")
    return rho


def check_unit(psi, d):
    psi = np.asarray(psi, dtype=np.complex128).reshape(-1)
    if psi.size != d:
        raise DimensionError(f"state vector must have length {d}, got {psi.size}")
    nrm = np.linalg.norm(psi)
    if abs(nrm - 1.0) > DENSITY_TOL:
        raise ValueError(f"state vector has norm {nrm:.12g}, expected 1")
    return psi


def perturbed_state(psi, sigma, eps):
    """``(1 - eps) |psi><psi| + eps sigma``."""
    return (1.0 - eps) * np.outer(psi, psi.conj()) + eps * sigma


# -- coherent information ------------------------------------------------------


def coherent_information(ch, rho):
    """``S(Phi(rho)) - S(Phi_c(rho))`` in bits."""
    rho = check_density(rho, ch.d_in)
    out, env = apply_pair(ch, rho)
    return nk.von_neumann_entropy(out) - nk.von_neumann_entropy(env)


def _ic_unchecked(ch, rho):
    out, env = apply_pair(ch, rho)
    return nk.entropy_of_spectrum(np.linalg.eigvalsh(out)) - nk.entropy_of_spectrum(np.linalg.eigvalsh(env))


# -- kernel projectors and the trace gap ---------------------------------------


def kernel_projector(output):
    eig = nk.hermitian_eig(output)
    lam = eig.eigenvalues
    n = lam.size
    thr = nk.rank_threshold(n, n, np.max(np.abs(lam)))
    ker = eig.eigenvectors[:, lam <= thr]
    return KernelProjector(dim=n, P=ker @ ker.conj().T, kernel_dim=ker.shape[1])


def pure_output_projectors(ch, psi):
    """Kernel projectors of ``Phi(psi)`` and ``Phi_c(psi)`` from one SVD.

    With ``M = reshape(V psi)``, ``Phi(psi) = M M^+`` and
    ``Phi_c(psi) = conj(M^+ M)``. Working with the singular values of ``M``
    instead of the eigenvalues of ``M M^+`` squares the gap between the
    genuine zeros and the nonzero spectrum.

    Returns ``(K, Kc, rank_report)``.
    """
    M = pure_output_factor(ch, psi)
    U, s, Wh = np.linalg.svd(M)
    thr = nk.rank_threshold(M.shape[0], M.shape[1], s[0])
    r = int(np.count_nonzero(s > thr))
    Ur = U[:, :r]
    Wr = Wh[:r, :].T  # conj of right singular vectors spans range(Phi_c(psi))
    K = np.eye(ch.d_out) - Ur @ Ur.conj().T
    Kc = np.eye(ch.d_env) - Wr @ Wr.conj().T
    return K, Kc, nk.RankReport(rank=r, singular_values=s, threshold=thr)


def _gap_parts(ch, psi, sigma):
    K, Kc, _ = pure_output_projectors(ch, psi)
    out_s, env_s = apply_pair(ch, sigma)
    return K, Kc, out_s, env_s


def trace_gap(ch, psi, sigma):
    psi = check_unit(psi, ch.d_in)
    sigma = check_density(sigma, ch.d_in)
    K, Kc, out_s, env_s = _gap_parts(ch, psi, sigma)
    return float(np.trace(K @ out_s).real - np.trace(Kc @ env_s).real)


def _nonzero_desc(m, scale):
    # the threshold scales with the uncompressed matrix: when the projector
    # is zero the compressed one is pure round-off and has no scale of its own
    lam = np.linalg.eigvalsh(0.5 * (m + m.conj().T))[::-1]
    thr = nk.rank_threshold(lam.size, lam.size, scale)
    return lam[np.abs(lam) > thr]


def first_order_corrections(ch, psi, sigma):
    """First-order slopes of the eigenvalues that leave zero.

    Returns the nonzero eigenvalues, descending, of ``K Phi(sigma) K`` and
    ``Kc Phi_c(sigma) Kc``.
    """
    psi = check_unit(psi, ch.d_in)
    sigma = check_density(sigma, ch.d_in)
    K, Kc, out_s, env_s = _gap_parts(ch, psi, sigma)
    return (
        _nonzero_desc(K @ out_s @ K, np.linalg.norm(out_s, 2)),
        _nonzero_desc(Kc @ env_s @ Kc, np.linalg.norm(env_s, 2)),
    )


# -- max-rank search -----------------------------------------------------------


def pure_output_rank(ch, psi):
    """Rank of ``Phi(|psi><psi|)``, i.e. the Schmidt rank of ``V psi``."""
    return nk.svd_rank(pure_output_factor(ch, psi))


def _pure_output(ch, psi):
    M = pure_output_factor(ch, psi)
    return M @ M.conj().T


def max_rank_search(ch, tries, stream, dims=None, climb_steps=200):
    """Look for a pure state whose output has rank ``min(d*_out, d*_env)``.

    Random pure states are tried first; if none reaches the target rank, the
    best one is refined by accept-if-better random tangent moves on
    ``det_r(Phi(psi))``. Failing to reach the target proves nothing.
    """
    if tries < 1:
        raise ValueError("tries must be >= 1")
    dims = dims or minimal_dims(ch)
    target = min(dims.d_star_out, dims.d_star_env)
    best_psi, best_rep, best_score = None, None, -np.inf
    used = 0
    for _ in range(tries):
        used += 1
        psi = random_pure_state(ch.d_in, stream)
        rep = pure_output_rank(ch, psi)
        score = (rep.rank, rep.singular_values[min(target, rep.singular_values.size) - 1])
        if best_rep is None or score > best_score:
            best_psi, best_rep, best_score = psi, rep, score
        if rep.rank >= target:
            return SearchResult(best_psi, best_rep, used, 0)

    psi = best_psi
    value = nk.det_r(_pure_output(ch, psi), target)
    step = 0.5
    steps = 0
    for steps in range(1, climb_steps + 1):
        xi = ginibre(ch.d_in, 1, stream)[:, 0]
        xi -= np.vdot(psi, xi) * psi
        cand = psi + step * xi / max(np.linalg.norm(xi), 1e-300)
        cand /= np.linalg.norm(cand)
        cand_value = nk.det_r(_pure_output(ch, cand), target)
        if cand_value > value:
            psi, value = cand, cand_value
            rep = pure_output_rank(ch, psi)
            if rep.rank > best_rep.rank:
                best_psi, best_rep = psi, rep
            if rep.rank >= target:
                break
        else:
            step *= 0.97
    return SearchResult(best_psi, best_rep, used, steps)


# -- detection -----------------------------------------------------------------


def detect(ch, config=None, stream=None):
    """Apply the dimension criterion with a max-rank witness.

    The search always runs, so ``witness_rank`` is meaningful even when the
    minimal dimensions coincide and the verdict is Inconclusive.
    """
    config = config or DetectConfig()
    stream = stream if stream is not None else SeededStream(config.seed, 0)
    dims = minimal_dims(ch)
    target = min(dims.d_star_out, dims.d_star_env)
    res = max_rank_search(ch, config.tries, stream, dims=dims, climb_steps=config.climb_steps)
    sigma = np.eye(ch.d_in, dtype=np.complex128) / ch.d_in
    K, Kc, out_s, env_s = _gap_parts(ch, res.psi, sigma)
    gap = float(np.trace(K @ out_s).real - np.trace(Kc @ env_s).real)

    if res.rank.rank > target:
        raise NumericalAnomaly(
            f"pure-state output rank {res.rank.rank} exceeds min(d*_out, d*_env) = {target}"
        )
    attained = res.rank.rank == target
    verdict = Verdict.INCONCLUSIVE
    if attained and dims.d_star_out != dims.d_star_env:
        if dims.d_star_out > dims.d_star_env:
            verdict = Verdict.CHANNEL_POSITIVE
            wrong_sign = gap < -config.gap_threshold
        else:
            verdict = Verdict.COMPLEMENT_POSITIVE
            wrong_sign = gap > config.gap_threshold
        if wrong_sign:
            raise NumericalAnomaly(f"trace gap {gap:.3e} has the wrong sign for {verdict.value}")
    positive = verdict is not Verdict.INCONCLUSIVE
    return DetectionReport(
        verdict=verdict,
        witness_psi=res.psi if positive else None,
        witness_rank=res.rank.rank,
        target_rank=target,
        trace_gap=gap,
        minimal_dims=dims,
        tries_used=res.tries_used,
        climb_steps_used=res.climb_steps_used,
        small_gap=positive and abs(gap) <= config.gap_threshold,
        search_rank_report=res.rank,
    )


# -- perturbation curves -------------------------------------------------------


def default_eps_grid():
    return np.logspace(-6, -1, 48)


def fit_log_slope(epsilons, values, min_points_per_decade=8):
    """Fit ``I'(eps) = c log2(1/eps) + k`` over the smallest decade of the grid.

    ``I'`` is estimated by central differences at interior grid points.
    Returns ``(c, k)``.
    """
    e = np.asarray(epsilons, dtype=float)
    v = np.asarray(values, dtype=float)
    deriv = (v[2:] - v[:-2]) / (e[2:] - e[:-2])
    mid = e[1:-1]
    sel = mid <= 10.0 * e[0] * (1 + 1e-12)
    if np.count_nonzero(sel) < min_points_per_decade:
        raise GridTooCoarse(
            f"only {np.count_nonzero(sel)} derivative points in the smallest decade; "
            f"need {min_points_per_decade}"
        )
    A = np.column_stack([np.log2(1.0 / mid[sel]), np.ones(np.count_nonzero(sel))])
    (c, k), *_ = np.linalg.lstsq(A, deriv[sel], rcond=None)
    return float(c), float(k)


def perturbation_curve(ch, psi, sigma, eps_grid=None):
    psi = check_unit(psi, ch.d_in)
    sigma = check_density(sigma, ch.d_in)
    eps = default_eps_grid() if eps_grid is None else np.asarray(eps_grid, dtype=float)
    if eps.ndim != 1 or eps.size < 3 or np.any(np.diff(eps) <= 0) or eps[0] <= 0 or eps[-1] > 1:
        raise ValueError("eps_grid must be strictly ascending in (0, 1] with at least 3 points")
    ic = np.array([coherent_information(ch, perturbed_state(psi, sigma, x)) for x in eps])
    c, k = fit_log_slope(eps, ic)
    return PerturbationCurve(
        psi=psi,
        sigma=sigma,
        epsilons=eps,
        ic_values=ic,
        fitted_slope=c,
        slope_prediction=trace_gap(ch, psi, sigma),
        fit_intercept=k,
    )


# -- coherent-information lower bound -----------------------------------------


def _rho_from_params(x, d):
    A = (x[: d * d] + 1j * x[d * d :]).reshape(d, d)
    rho = A @ A.conj().T
    return rho / np.trace(rho).real


def _params_from_rho(rho):
    w, u = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    A = (u * np.sqrt(np.clip(w, 0.0, None))) @ u.conj().T
    return np.concatenate([A.real.ravel(), A.imag.ravel()])


def _ascend(ch, x, iters, fd_step):
    d = ch.d_in
    f = lambda y: _ic_unchecked(ch, _rho_from_params(y, d))
    fx = f(x)
    t = 1.0
    for _ in range(iters):
        g = np.empty_like(x)
        for i in range(x.size):
            h = fd_step * max(1.0, abs(x[i]))
            xp, xm = x.copy(), x.copy()
            xp[i] += h
            xm[i] -= h
            g[i] = (f(xp) - f(xm)) / (2 * h)
        gn2 = float(g @ g)
        if gn2 < 1e-24:
            break
        # backtracking line search with Armijo condition
        while t > 1e-12:
            y = x + t * g
            fy = f(y)
            if fy >= fx + 1e-4 * t * gn2:
                break
            t *= 0.5
        else:
            break
        improvement = fy - fx
        x, fx = y, fy
        t *= 2.0
        if improvement < 1e-14:
            break
    return x, fx


def maximize_ic(ch, restarts, iters, stream, witness=None, fd_step=1e-6, config=None):
    """Lower bound on the maximal coherent information of one channel use.

    Starting points, in order: the maximally mixed state, the perturbed
    witness ``rho(1e-3)`` of :func:`detect` (when it certifies positivity),
    then Ginibre-random states. Each start is improved by finite-difference
    gradient ascent on ``rho = A A^+ / Tr(A A^+)``. The result is never
    claimed to be the maximum.
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    d = ch.d_in
    if witness is None:
        rep = detect(ch, config, stream=stream)
        if rep.verdict is Verdict.CHANNEL_POSITIVE:
            witness = rep.witness_psi
    starts = [_params_from_rho(np.eye(d) / d)]
    if witness is not None:
        w = check_unit(witness, d)
        starts.append(_params_from_rho(perturbed_state(w, np.eye(d) / d, 1e-3)))
    best_x, best_v, history = None, -np.inf, []
    for k in range(restarts):
        if k < len(starts):
            x0 = starts[k]
        else:
            g = ginibre(d, d, stream)
            x0 = np.concatenate([g.real.ravel(), g.imag.ravel()])
        x, v = _ascend(ch, x0, iters, fd_step)
        if v > best_v:
            best_x, best_v = x, v
        history.append(best_v)
    return MaximizeResult(_rho_from_params(best_x, d), float(best_v), history)


def report_json(obj):
    return json.dumps(obj.to_dict(), indent=2)
