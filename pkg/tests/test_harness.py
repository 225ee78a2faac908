import csv
import io
import json

import numpy as np
import pytest

from capdetect import channels as C
from capdetect import harness as H
from capdetect.errors import NumericalAnomaly


def cfg(**kw):
    base = dict(d=3, d_out=4, d_env=2, n_samples=20, seed=42, tries=16, climb_steps=20)
    base.update(kw)
    return H.ExperimentConfig(**base)


def test_config_validation():
    with pytest.raises(ValueError):
        cfg(n_samples=0)
    with pytest.raises(ValueError):
        cfg(d=1)
    with pytest.raises(ValueError):
        cfg(d=9)
    assert cfg(mode="slope").mode is H.Mode.SLOPE_CHECK
    assert "output_path" not in cfg().echo()
    json.dumps(cfg().echo())


def test_records_sorted_and_thread_independent():
    c = cfg(n_samples=24)
    r1, s1 = H.run_campaign(c, threads=1)
    r8, s8 = H.run_campaign(c, threads=8)
    assert [r.sample_index for r in r8] == list(range(24))
    assert all(r.stream_id == r.sample_index for r in r8)
    assert H.records_csv(r1) == H.records_csv(r8)
    s1.pop("metadata"), s8.pop("metadata")
    assert s1 == s8


def test_records_csv_header_and_fields():
    records, _ = H.run_campaign(cfg(n_samples=5), threads=1)
    text = H.records_csv(records)
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == H.CSV_COLUMNS
    assert ",".join(rows[0]) == (
        "schema,sample_index,stream_id,rank_J,rank_phi_id,d_star_out,d_star_env,"
        "max_rank_found,verdict,trace_gap,ic_at_eps,ic_lower_bound,wall_ms"
    )
    for i, row in enumerate(rows[1:]):
        rec = dict(zip(H.CSV_COLUMNS, row))
        assert rec["schema"] == H.SCHEMA and int(rec["sample_index"]) == i
        assert rec["verdict"] == "ChannelPositive"
        assert float(rec["trace_gap"]) == records[i].trace_gap
        assert float(rec["ic_at_eps"]) > 0
        assert rec["ic_lower_bound"] == "" and rec["wall_ms"] == ""
    assert float(H.records_csv(records, with_wall_time=True).splitlines()[1].rsplit(",", 1)[1]) > 0


def test_summary_fractions():
    _, s = H.run_campaign(cfg(d_out=2, d_env=4, n_samples=30), threads=2)
    total = s["fraction_channel_positive"] + s["fraction_complement_positive"] + s["fraction_inconclusive"]
    assert total == pytest.approx(1.0)
    assert s["fraction_complement_positive"] == 1.0
    assert s["fraction_support_ok"] == 1.0 and s["fraction_maxrank_ok"] == 1.0
    assert s["rank_bound_violations"] == 0 and s["witness_inconsistent"] == 0
    assert s["almost_sure_ok"] is True
    assert s["min_abs_trace_gap"] > 0
    assert s["metadata"]["threads"] == 2


def test_equal_dims_campaign_is_inconclusive():
    _, s = H.run_campaign(cfg(d=2, d_out=3, d_env=3, n_samples=10), threads=1)
    assert s["fraction_inconclusive"] == 1.0
    assert s["expected_verdict"] is None and "almost_sure_ok" not in s


def test_anomalies_are_recorded(monkeypatch):
    real = H.detect

    def flaky(ch, config=None, stream=None):
        if stream.stream_id == 3:
            raise NumericalAnomaly("injected")
        return real(ch, config, stream=stream)

    monkeypatch.setattr(H, "detect", flaky)
    records, s = H.run_campaign(cfg(n_samples=6), threads=3)
    assert len(records) == 6
    assert records[3].verdict == H.ANOMALOUS and "injected" in records[3].anomaly
    assert records[3].d_star_out == 4  # fields computed before the failure survive
    assert s["anomaly_count"] == 1
    assert s["anomalies"] == [{"sample_index": 3, "reason": "NumericalAnomaly: injected"}]
    assert s["n_unexplained_unexpected"] == 1 and s["almost_sure_ok"] is False


def test_support_mode():
    _, s = H.run_campaign(cfg(mode=H.Mode.SUPPORT_CHECK, n_samples=20), threads=1)
    assert s["fraction_schmidt_ok"] == 1.0 and s["fraction_support_ok"] == 1.0


def test_slope_mode():
    records, s = H.run_campaign(cfg(mode=H.Mode.SLOPE_CHECK, n_samples=15), threads=4)
    assert s["n_slope_tested"] >= 5
    assert s["fraction_slope_ok"] == 1.0
    for r in records:
        if r.slope_ok is not None:
            assert abs(r.trace_gap) > H.SLOPE_MIN_GAP


def test_maximize_mode():
    records, s = H.run_campaign(cfg(mode=H.Mode.MAXIMIZE, n_samples=3, restarts=2, iters=5), threads=1)
    for r in records:
        assert r.ic_lower_bound is not None and r.ic_lower_bound > 0
        assert r.ic_lower_bound <= np.log2(3) + 1e-9
    assert s["fraction_ic_lower_bound_positive"] == 1.0


def test_write_outputs(tmp_path):
    out = tmp_path / "run"
    H.run_campaign(cfg(n_samples=4, output_path=str(out)), threads=1)
    assert sorted(p.name for p in out.iterdir()) == ["records.csv", "summary.json", "timings.csv"]
    summary = json.loads((out / "summary.json").read_text())
    assert summary["n_samples"] == 4 and summary["config"]["seed"] == 42
    timings = (out / "timings.csv").read_text().splitlines()
    assert timings[0] == "sample_index,wall_ms" and len(timings) == 5
    assert all(float(line.split(",")[1]) > 0 for line in timings[1:])


def test_is_interior():
    assert not H.is_interior(C.dephasing(0.5))
    assert not H.is_interior(C.identity(2))
    assert H.is_interior(C.depolarizing(2, 1.0))


def test_boundary_check():
    res = H.boundary_check(2, 30, seed=1, threads=2)
    assert res["interior_fraction"] == 1.0
    assert res["complement_positive_fraction"] == 1.0
    with pytest.raises(ValueError):
        H.boundary_check(1, 5, 0)
