"""Monte Carlo campaigns over random channels.

Sample ``i`` of a campaign always draws from ``SeededStream(seed, i)``, and
records are sorted by sample index before anything is aggregated or written.
Because of that, the thread count has no effect on the output.
"""
from __future__ import annotations

import csv
import enum
import io
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from . import numkernel as nk
from ._backend import BACKEND
from .channels import choi, minimal_dims
from .detection import (
    DetectConfig,
    Verdict,
    coherent_information,
    detect,
    maximize_ic,
    perturbation_curve,
    perturbed_state,
)
from .errors import CapDetectError
from .sampling import SeededStream, sample_channel

SCHEMA = "capdetect-v1"
CSV_COLUMNS = [
    "schema",
    "sample_index",
    "stream_id",
    "rank_J",
    "rank_phi_id",
    "d_star_out",
    "d_star_env",
    "max_rank_found",
    "verdict",
    "trace_gap",
    "ic_at_eps",
    "ic_lower_bound",
    "wall_ms",
]
ANOMALOUS = "Anomalous"
EPS_WITNESS = 1e-3
SLOPE_MIN_GAP = 0.05
SLOPE_RTOL = 0.05


class Mode(str, enum.Enum):
    DETECT = "detect"
    SLOPE_CHECK = "slope"
    SUPPORT_CHECK = "support"
    MAXIMIZE = "maximize"


@dataclass(frozen=True)
class ExperimentConfig:
    d: int
    d_out: int
    d_env: int
    n_samples: int
    seed: int
    tries: int = 64
    climb_steps: int = 200
    eps_grid: tuple | None = None
    output_path: str | None = None
    mode: Mode = Mode.DETECT
    restarts: int = 3
    iters: int = 40

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.d <= 1:
            raise ValueError("input dimension d must be > 1")
        if self.d > self.d_out * self.d_env:
            raise ValueError(f"d={self.d} exceeds d_out*d_env={self.d_out * self.d_env}")
        object.__setattr__(self, "mode", Mode(self.mode))

    def echo(self):
        out = asdict(self)
        out["mode"] = self.mode.value
        out.pop("output_path")
        return out


@dataclass
class ExperimentRecord:
    sample_index: int
    stream_id: int
    rank_J: int | None = None
    rank_phi_id: int | None = None
    d_star_out: int | None = None
    d_star_env: int | None = None
    max_rank_found: int | None = None
    verdict: str = ANOMALOUS
    trace_gap: float | None = None
    ic_at_eps: float | None = None
    ic_lower_bound: float | None = None
    wall_ms: float | None = None
    # diagnostics kept out of records.csv
    anomaly: str | None = None
    borderline: bool = False
    support_ok: bool = False
    maxrank_ok: bool = False
    witness_consistent: bool | None = None
    schmidt_ok: bool | None = None
    fitted_slope: float | None = None
    slope_ok: bool | None = None
    resamples: int = 0

    def csv_row(self, with_wall_time=False):
        def fmt(v):
            if v is None:
                return ""
            if isinstance(v, float):
                return repr(v)
            return str(v)

        vals = [getattr(self, c) for c in CSV_COLUMNS[1:]]
        if not with_wall_time:
            vals[-1] = None
        return [SCHEMA] + [fmt(v) for v in vals]


def expected_verdict(d_out, d_env):
    if d_out > d_env:
        return Verdict.CHANNEL_POSITIVE
    if d_out < d_env:
        return Verdict.COMPLEMENT_POSITIVE
    return None


def _column_schmidt_ok(ch):
    target = min(ch.d_out, ch.d_env)
    return all(nk.schmidt_rank(ch.V[:, k], ch.d_out, ch.d_env).rank == target for k in range(ch.d_in))


def run_sample(cfg, index):
    """Run one sample of a campaign; numerical failures become anomalous rows."""
    t0 = time.perf_counter()
    rec = ExperimentRecord(sample_index=index, stream_id=index)
    stream = SeededStream(cfg.seed, index)
    try:
        ch = sample_channel(cfg.d, cfg.d_out, cfg.d_env, stream)
        rec.resamples = stream.resamples
        dims = minimal_dims(ch)
        rec.rank_J, rec.rank_phi_id = dims.rank_reports[0].rank, dims.rank_reports[1].rank
        rec.d_star_out, rec.d_star_env = dims.d_star_out, dims.d_star_env
        rec.support_ok = (
            dims.d_star_out == min(cfg.d_out, cfg.d * cfg.d_env)
            and dims.d_star_env == min(cfg.d_env, cfg.d * cfg.d_out)
        )
        if cfg.mode is Mode.SUPPORT_CHECK:
            rec.schmidt_ok = _column_schmidt_ok(ch)

        report = detect(ch, DetectConfig(tries=cfg.tries, climb_steps=cfg.climb_steps), stream=stream)
        rec.max_rank_found = report.witness_rank
        rec.maxrank_ok = report.witness_rank == min(cfg.d_out, cfg.d_env)
        rec.verdict = report.verdict.value
        rec.trace_gap = report.trace_gap
        if report.verdict is Verdict.INCONCLUSIVE:
            rec.borderline = dims.near_threshold() or (
                report.search_rank_report is not None and report.search_rank_report.near_threshold()
            )

        sigma = np.eye(cfg.d, dtype=np.complex128) / cfg.d
        if report.witness_psi is not None:
            rec.ic_at_eps = coherent_information(ch, perturbed_state(report.witness_psi, sigma, EPS_WITNESS))
            if report.verdict is Verdict.CHANNEL_POSITIVE:
                rec.witness_consistent = rec.ic_at_eps > 0
            else:
                rec.witness_consistent = rec.ic_at_eps < 0

        if cfg.mode is Mode.SLOPE_CHECK and report.witness_psi is not None and abs(report.trace_gap) > SLOPE_MIN_GAP:
            curve = perturbation_curve(ch, report.witness_psi, sigma, cfg.eps_grid)
            rec.fitted_slope = curve.fitted_slope
            rec.slope_ok = abs(curve.fitted_slope - curve.slope_prediction) <= SLOPE_RTOL * abs(curve.slope_prediction)

        if cfg.mode is Mode.MAXIMIZE:
            witness = report.witness_psi if report.verdict is Verdict.CHANNEL_POSITIVE else None
            res = maximize_ic(ch, cfg.restarts, cfg.iters, stream, witness=witness)
            rec.ic_lower_bound = res.value
    except CapDetectError as exc:
        rec.verdict = ANOMALOUS
        rec.anomaly = f"{type(exc).__name__}: {exc}"
    rec.wall_ms = (time.perf_counter() - t0) * 1e3
    return rec


def summarize(cfg, records):
    n = len(records)
    count = lambda v: sum(r.verdict == v for r in records)
    n_cp = count(Verdict.CHANNEL_POSITIVE.value)
    n_mp = count(Verdict.COMPLEMENT_POSITIVE.value)
    # anomalous rows count towards the inconclusive fraction
    n_inc = n - n_cp - n_mp
    gaps = np.array([abs(r.trace_gap) for r in records if r.trace_gap is not None])
    exp = expected_verdict(cfg.d_out, cfg.d_env)
    inconclusive = [r for r in records if r.verdict != (exp.value if exp else None)]
    borderline = sum(r.borderline for r in inconclusive) if exp else 0
    rank_viol = sum(
        r.max_rank_found is not None
        and r.d_star_out is not None
        and r.max_rank_found > min(r.d_star_out, r.d_star_env)
        for r in records
    )
    summary = {
        "config": cfg.echo(),
        "n_samples": n,
        "expected_verdict": exp.value if exp else None,
        "fraction_channel_positive": n_cp / n,
        "fraction_complement_positive": n_mp / n,
        "fraction_inconclusive": n_inc / n,
        "fraction_support_ok": sum(r.support_ok for r in records) / n,
        "fraction_maxrank_ok": sum(r.maxrank_ok for r in records) / n,
        "mean_abs_trace_gap": float(gaps.mean()) if gaps.size else None,
        "min_abs_trace_gap": float(gaps.min()) if gaps.size else None,
        "anomaly_count": sum(r.anomaly is not None for r in records),
        "anomalies": [{"sample_index": r.sample_index, "reason": r.anomaly} for r in records if r.anomaly],
        "n_unexpected_verdict": len(inconclusive) if exp else 0,
        "n_borderline_unexpected": borderline,
        "n_unexplained_unexpected": (len(inconclusive) - borderline) if exp else 0,
        "rank_bound_violations": rank_viol,
        "witness_inconsistent": sum(r.witness_consistent is False for r in records),
        "ginibre_resamples": sum(r.resamples for r in records),
    }
    if cfg.mode is Mode.SUPPORT_CHECK:
        summary["fraction_schmidt_ok"] = sum(bool(r.schmidt_ok) for r in records) / n
    if cfg.mode is Mode.SLOPE_CHECK:
        tested = [r for r in records if r.slope_ok is not None]
        summary["n_slope_tested"] = len(tested)
        summary["fraction_slope_ok"] = (sum(r.slope_ok for r in tested) / len(tested)) if tested else None
    if cfg.mode is Mode.MAXIMIZE:
        vals = [r.ic_lower_bound for r in records if r.ic_lower_bound is not None]
        summary["mean_ic_lower_bound"] = float(np.mean(vals)) if vals else None
        summary["fraction_ic_lower_bound_positive"] = sum(v > 0 for v in vals) / n
    if exp is not None:
        frac = summary["fraction_channel_positive" if exp is Verdict.CHANNEL_POSITIVE else "fraction_complement_positive"]
        summary["almost_sure_ok"] = frac >= 0.99 and summary["n_unexplained_unexpected"] == 0
    return summary


def run_campaign(cfg, threads=None):
    """Run every sample and aggregate. Returns ``(records, summary)``."""
    threads = threads or os.cpu_count() or 1
    t0 = time.time()
    if threads == 1:
        records = [run_sample(cfg, i) for i in range(cfg.n_samples)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(lambda i: run_sample(cfg, i), range(cfg.n_samples)))
    records.sort(key=lambda r: r.sample_index)
    summary = summarize(cfg, records)
    summary["metadata"] = {
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "wall_s": time.time() - t0,
        "threads": threads,
        "backend": BACKEND,
    }
    if cfg.output_path:
        write_outputs(cfg.output_path, records, summary)
    return records, summary


def records_csv(records, with_wall_time=False):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow(r.csv_row(with_wall_time))
    return buf.getvalue()


def timings_csv(records):
    lines = ["sample_index,wall_ms"] + [f"{r.sample_index},{r.wall_ms!r}" for r in records]
    return "\n".join(lines) + "\n"


def dumps_summary(summary):
    return json.dumps(summary, indent=2, sort_keys=True)


def write_outputs(out_dir, records, summary, with_wall_time=False):
    """Write ``records.csv``, ``summary.json`` and ``timings.csv`` into ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "records.csv"), "w", newline="") as fh:
        fh.write(records_csv(records, with_wall_time))
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        fh.write(dumps_summary(summary) + "\n")
    with open(os.path.join(out_dir, "timings.csv"), "w") as fh:
        fh.write(timings_csv(records))


# -- boundary of the channel set -----------------------------------------------


def is_interior(ch):
    """Whether ``J(Phi)`` has full rank ``(d_out*d_in)``, i.e. lies in the interior."""
    return nk.svd_rank(choi(ch).J).rank == ch.d_out * ch.d_in


def boundary_check(d, n_samples, seed, threads=None, tries=64):
    """Sample square channels with ``d_env = d**2`` and test interior membership.

    Every interior channel is also run through :func:`detect`, which should
    report ComplementPositive for it.
    """
    if d < 2:
        raise ValueError("boundary_check needs d >= 2")

    def one(i):
        stream = SeededStream(seed, i)
        ch = sample_channel(d, d, d * d, stream)
        interior = is_interior(ch)
        verdict = None
        if interior:
            try:
                verdict = detect(ch, DetectConfig(tries=tries), stream=stream).verdict.value
            except CapDetectError as exc:
                verdict = f"{ANOMALOUS}: {exc}"
        return interior, verdict

    threads = threads or os.cpu_count() or 1
    if threads == 1:
        rows = [one(i) for i in range(n_samples)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, range(n_samples)))
    n_int = sum(r[0] for r in rows)
    n_cp = sum(r[1] == Verdict.COMPLEMENT_POSITIVE.value for r in rows)
    return {
        "d": d,
        "n_samples": n_samples,
        "seed": seed,
        "interior_fraction": n_int / n_samples,
        "complement_positive_fraction": (n_cp / n_int) if n_int else None,
    }
