"""Acceptance suite: one test per release criterion, each printing a
pass/fail line with its runtime. Run with `pytest tests/test_acceptance.py -s`
to see the lines as they complete."""

import contextlib
import hashlib
import math
import time

import numpy as np
import pytest

from skelsign.benchmark import BenchReport, compare_reports
from skelsign.encoding import EncodingSpec, encode, encode_dataset, quantize_unit
from skelsign.evaluation import (
    ExperimentConfig,
    aggregate_sessions,
    compute_metrics,
    make_split_plan,
    run_experiment,
)
from skelsign.imputation import ImputeConfig, impute_sequence
from skelsign.landmarks import ALL_LANDMARK_IDS, Part, read_sequence, write_sequence
from skelsign.selection import load_manifest
from skelsign.synth import make_synthetic_dataset

from conftest import make_sequence, random_sequence, series_sequence
from oracles import (
    encoded_pixel,
    linear_interp,
    metrics_by_counting,
    natural_cubic_spline_eval,
)


@contextlib.contextmanager
def criterion(name, budget_seconds):
    start = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"[FAIL] {name}")
        raise
    elapsed = time.perf_counter() - start
    print(f"[PASS] {name} ({elapsed:.2f}s)")
    assert elapsed < budget_seconds, f"{name} exceeded {budget_seconds}s budget"


def test_subset_cardinalities():
    with criterion("subset cardinalities (543/68/75/118/80, part exclusions)", 1.0):
        expected = {"all": 543, "laines": 68, "arcanjo": 75, "asl-1st": 118, "asl-2nd": 80}
        for name, count in expected.items():
            manifest = load_manifest(name)
            assert len(manifest.ids) == count
            assert len(set(manifest.ids)) == count
        assert load_manifest("arcanjo").count_for(Part.FACE) == 0
        assert load_manifest("asl-1st").count_for(Part.POSE) == 0


def test_imputation_oracle_suite():
    with criterion("imputation oracle suite (1000 series, cubic 1e-9, linear exact)", 10.0):
        rng = np.random.default_rng(7031)
        cfg = ImputeConfig()
        checked_cubic = checked_linear = 0
        for case in range(1000):
            t = int(rng.integers(4, 40))
            values = rng.random(t)
            if case % 3 == 0 and t >= 6:
                # One contiguous run, often wider than the window.
                run = int(rng.integers(1, min(t - 2, 11)))
                start = int(rng.integers(1, t - run))
                values[start : start + run] = np.nan
            else:
                n_gaps = int(rng.integers(1, max(2, t // 3)))
                gap_at = rng.choice(np.arange(1, t - 1), size=n_gaps, replace=False)
                values[gap_at] = np.nan
            # Some series also lose their edges, to exercise extrapolation.
            lead = int(rng.integers(0, 3))
            trail = int(rng.integers(0, 3))
            if lead:
                values[:lead] = np.nan
            if trail:
                values[-trail:] = np.nan

            seq = series_sequence(values)
            filled, _ = impute_sequence(seq, cfg)
            out = filled.coords[:, 0, 0]
            out_missing = filled.missing[:, 0]

            observed = np.flatnonzero(~np.isnan(values))
            if observed.size == 0:
                assert out_missing.all()
                continue
            first, last = observed[0], observed[-1]
            # No extrapolation beyond the observed range.
            assert out_missing[:first].all() and out_missing[last + 1 :].all()
            # Observed values untouched.
            assert np.array_equal(out[observed], values[observed])
            # Idempotence.
            again, stats = impute_sequence(filled, cfg)
            assert stats.filled_cubic == stats.filled_linear == 0
            assert np.array_equal(
                np.nan_to_num(again.coords[:, 0, 0], nan=-1.0),
                np.nan_to_num(out, nan=-1.0),
            )

            for left, right in zip(observed, observed[1:]):
                gap = right - left - 1
                if gap == 0:
                    continue
                frames = np.arange(left + 1, right)
                lo = observed[observed <= left][-cfg.window :]
                hi = observed[observed >= right][: cfg.window]
                support = np.concatenate([lo, hi])
                if gap <= cfg.window and support.size >= cfg.cubic_min_points:
                    for frame in frames:
                        expected = natural_cubic_spline_eval(
                            list(support), list(values[support]), frame
                        )
                        expected = min(max(expected, 0.0), 1.0)
                        assert abs(out[frame] - expected) <= 1e-9
                        checked_cubic += 1
                else:
                    for frame in frames:
                        expected = linear_interp(
                            left, values[left], right, values[right], frame
                        )
                        assert out[frame] == expected  # exact two-point formula
                        checked_linear += 1
        assert checked_cubic > 1000 and checked_linear > 100


def test_encoding_law_suite():
    with criterion("encoding law suite (L,T grid: shape, channel, monotone, determinism)", 10.0):
        rng = np.random.default_rng(5150)
        for l in range(1, 7):
            for t in range(1, 11):
                coords = rng.random((t, l, 2))
                missing = rng.random((t, l)) < 0.2
                coords[missing] = np.nan
                seq = make_sequence(coords, missing, ids=ALL_LANDMARK_IDS[:l])
                image = encode(seq)
                assert image.pixels.shape == (l, 2 * math.ceil(t / 3), 3)
                x = np.nan_to_num(seq.coords[:, :, 0], nan=0.0).T.tolist()
                y = np.nan_to_num(seq.coords[:, :, 1], nan=0.0).T.tolist()
                for row in range(image.height):
                    for col in range(image.width):
                        for channel in range(3):
                            assert image.pixels[row, col, channel] == encoded_pixel(
                                x, y, l, t, row, col, channel
                            )
                assert np.array_equal(image.pixels, encode(seq).pixels)
        # Quantization monotonicity over a dense grid.
        grid = np.linspace(0.0, 1.0, 10001)
        levels = quantize_unit(grid)
        assert (np.diff(levels.astype(int)) >= 0).all()


def test_metrics_bruteforce_equivalence():
    with criterion("metrics brute-force equivalence (500 vectors, 1e-12; 11/15 example)", 5.0):
        rng = np.random.default_rng(90210)
        for _ in range(500):
            k = int(rng.integers(2, 11))
            n = int(rng.integers(1, 1000))
            classes = [f"c{i}" for i in range(k)]
            truth = [classes[i] for i in rng.integers(0, k, size=n)]
            pred = [classes[i] for i in rng.integers(0, k, size=n)]
            report = compute_metrics(truth, pred, classes)
            expected = metrics_by_counting(truth, pred, classes)
            for key in ("accuracy", "macro_precision", "macro_recall", "macro_f1"):
                assert abs(report.metric(key) - expected[key]) <= 1e-12
        worked = compute_metrics(list("AABB"), list("ABBB"))
        assert abs(worked.macro_f1 - 11 / 15) <= 1e-12


def test_split_laws():
    with criterion("split laws (6/20/132 sessions, disjoint partitions)", 1.0):
        for n, expected in ((3, 6), (5, 20), (12, 132)):
            signers = [f"p{i:02d}" for i in range(n)]
            plan = make_split_plan(signers)
            assert len(plan.sessions) == expected
            seen = set()
            for session in plan.sessions:
                assert session.test != session.val
                train = set(session.train)
                assert session.test not in train and session.val not in train
                assert train | {session.test, session.val} == set(signers)
                seen.add((session.test, session.val))
            assert len(seen) == expected


def test_bench_arithmetic():
    with criterion("bench arithmetic (6.48x extraction, 5.57x end-to-end, self 1.0)", 1.0):
        ours = BenchReport.from_timings(
            {"extraction": (4.612, 4.399, 4.457, 4.421, 4.297),
             "inference": (0.946, 0.863, 0.861, 0.896, 0.870)}
        )
        theirs = BenchReport.from_timings(
            {"extraction": (25.464, 23.385, 38.358, 25.115, 31.524),
             "inference": (0.946, 0.863, 0.861, 0.896, 0.870)}
        )
        assert ours.mean("extraction") == pytest.approx(4.437, abs=5e-4)
        assert theirs.mean("extraction") == pytest.approx(28.769, abs=5e-4)
        assert ours.mean("inference") == pytest.approx(0.887, abs=5e-4)
        speedup = compare_reports(ours, theirs)
        assert abs(speedup.per_stage["extraction"] - 6.48) <= 0.01
        assert abs(speedup.end_to_end - 5.57) <= 0.01
        self_cmp = compare_reports(ours, ours)
        assert all(r == 1.0 for r in self_cmp.per_stage.values())
        assert self_cmp.end_to_end == 1.0


def test_roundtrip_and_determinism(tmp_path):
    with criterion("round-trip 5e-7 on 100 sequences; byte-identical encode re-runs", 10.0):
        rng = np.random.default_rng(1166)
        for i in range(100):
            full = i % 5 == 0  # every fifth sequence uses the full 543 schema
            seq = random_sequence(
                rng,
                frames=int(rng.integers(2, 8)) if full else None,
                missing_frac=float(rng.random() * 0.4),
                full_schema=full,
            )
            path = tmp_path / "roundtrip.csv"
            write_sequence(seq, path)
            back = read_sequence(path)
            assert np.array_equal(back.missing, seq.missing)
            assert seq.allclose(back, atol=5e-7)

        manifest = make_synthetic_dataset(
            tmp_path / "data", samples_per_class=2, signers=2, frames=12,
            dropout=0.2, seed=31,
        )
        hashes = []
        for run in ("a", "b"):
            out = tmp_path / run
            encode_dataset(
                manifest, load_manifest("asl-2nd"), ImputeConfig(), EncodingSpec(), out
            )
            hashes.append(
                {p.name: hashlib.sha256(p.read_bytes()).hexdigest()
                 for p in sorted(out.glob("*.png"))}
            )
        assert hashes[0] == hashes[1] and hashes[0]


def test_imputation_benefit(tmp_path):
    with criterion("imputation benefit: imputed macro-F1 strictly above raw", 60.0):
        make_synthetic_dataset(
            tmp_path / "data", samples_per_class=12, signers=4, frames=45,
            dropout=0.2, seed=17,
        )
        scores = {}
        for name, impute in (("imputed", ImputeConfig()), ("raw", None)):
            config = ExperimentConfig(
                manifest_path=tmp_path / "data" / "manifest.json",
                strategy="asl-2nd",
                impute=impute,
            )
            report = run_experiment(config, tmp_path / name)
            scores[name] = report["summaries"]["per_session"]["means"]["macro_f1"]
        assert scores["imputed"] > scores["raw"], scores
