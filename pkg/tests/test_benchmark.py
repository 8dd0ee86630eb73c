import itertools

import numpy as np
import pytest

from skelsign.benchmark import (
    BenchReport,
    compare_reports,
    pipeline_stages,
    run_bench,
)
from skelsign.encoding import EncodingSpec
from skelsign.errors import StageFailureError, ValidationError
from skelsign.imputation import ImputeConfig
from skelsign.landmarks import write_sequence

from conftest import random_sequence

# Five recorded extraction runs for the lightweight and the heavyweight
# pipeline, plus the shared model-inference runs.
LIGHT_RUNS = (4.612, 4.399, 4.457, 4.421, 4.297)
HEAVY_RUNS = (25.464, 23.385, 38.358, 25.115, 31.524)
INFERENCE_RUNS = (0.946, 0.863, 0.861, 0.896, 0.870)


def test_report_mean_sd_match_recomputation(rng):
    times = {f"stage{i}": tuple(rng.random(7) + 0.1) for i in range(4)}
    report = BenchReport.from_timings(times)
    for stage, runs in times.items():
        assert report.mean(stage) == pytest.approx(np.mean(runs), abs=1e-12)
        assert report.sd(stage) == pytest.approx(np.std(runs), abs=1e-12)
    assert report.total_mean() == pytest.approx(
        sum(np.mean(r) for r in times.values()), abs=1e-12
    )


def test_report_validation():
    with pytest.raises(ValidationError):
        BenchReport.from_timings({"a": (1.0, -0.5)})
    with pytest.raises(ValidationError):
        BenchReport.from_timings({"a": (1.0, 2.0), "b": (1.0,)})


def test_recorded_run_ratios():
    ours = BenchReport.from_timings({"extraction": LIGHT_RUNS, "inference": INFERENCE_RUNS})
    theirs = BenchReport.from_timings({"extraction": HEAVY_RUNS, "inference": INFERENCE_RUNS})
    speedup = compare_reports(ours, theirs)
    assert speedup.per_stage["extraction"] == pytest.approx(6.48, abs=0.01)
    assert speedup.per_stage["inference"] == 1.0
    assert speedup.end_to_end == pytest.approx(5.57, abs=0.01)


def test_self_comparison_is_exactly_one():
    report = BenchReport.from_timings({"extraction": LIGHT_RUNS, "inference": INFERENCE_RUNS})
    speedup = compare_reports(report, report)
    assert all(r == 1.0 for r in speedup.per_stage.values())
    assert speedup.end_to_end == 1.0


def test_ratios_match_direct_division(rng):
    for _ in range(20):
        stages = [f"s{i}" for i in range(int(rng.integers(1, 5)))]
        cand = BenchReport.from_timings({s: tuple(rng.random(5) + 0.1) for s in stages})
        base = BenchReport.from_timings({s: tuple(rng.random(5) + 0.1) for s in stages})
        speedup = compare_reports(cand, base)
        for s in stages:
            assert speedup.per_stage[s] == pytest.approx(
                base.mean(s) / cand.mean(s), abs=1e-12
            )
        assert speedup.end_to_end == pytest.approx(
            base.total_mean() / cand.total_mean(), abs=1e-12
        )


def test_stage_mismatch_rejected():
    a = BenchReport.from_timings({"x": (1.0,)})
    b = BenchReport.from_timings({"y": (1.0,)})
    with pytest.raises(ValidationError):
        compare_reports(a, b)


def test_stub_clock_gives_zero_sd():
    ticker = itertools.count()

    def fake_clock():
        return float(next(ticker))

    stages = {"one": lambda v: v, "two": lambda v: v}
    report = run_bench(stages, "ignored", runs=3, clock=fake_clock)
    assert report.runs == 3
    assert report.sd("one") == 0.0
    assert report.sd("two") == 0.0


def test_warmup_excluded_from_statistics():
    calls = []

    def stage(v):
        calls.append(1)
        return v

    report = run_bench({"only": stage}, "ignored", runs=4, warmup=2)
    assert len(calls) == 6  # 2 warm-up + 4 recorded
    assert report.runs == 4


def test_stage_failure_carries_partial_report():
    def boom(v):
        raise RuntimeError("nope")

    with pytest.raises(StageFailureError) as err:
        run_bench({"ok": lambda v: v, "boom": boom}, "x", runs=3, warmup=0)
    partial = err.value.partial_report
    assert partial.valid is False
    assert "boom" in partial.error


def test_pipeline_stage_chain(tmp_path, rng):
    seq = random_sequence(rng, frames=12, full_schema=True, missing_frac=0.1)
    path = tmp_path / "seq.csv"
    write_sequence(seq, path)
    stages = pipeline_stages("arcanjo", ImputeConfig(), EncodingSpec())
    report = run_bench(stages, path, runs=2)
    assert report.stages == ("read", "select", "impute", "encode")
    assert report.runs == 2
    text = report.render_text()
    assert "Mean (SD)" in text
    assert text.count("\n") >= 5  # header + 2 runs + separators + mean row


def test_report_json_roundtrip(tmp_path):
    report = BenchReport.from_timings({"extraction": LIGHT_RUNS})
    path = tmp_path / "bench.json"
    report.save(path)
    back = BenchReport.from_json(path)
    assert back.timings == report.timings
    assert back.stages == report.stages


def test_render_matches_recorded_table_row():
    report = BenchReport.from_timings({"ours": LIGHT_RUNS})
    text = report.render_text()
    assert "4.437 (0.102)" in text
