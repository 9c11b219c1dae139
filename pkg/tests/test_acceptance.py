"""Exit criteria, one test per criterion (per verdict where a criterion has several).

A summary line per criterion is printed at the end of the pytest run.
"""
import contextlib
import filecmp
import time

import numpy as np
import pytest

from bucketeer import _purepy, assignment, harness, hashing
from bucketeer.assignment import ExperimentConfig, assign_arrays
from bucketeer.harness import REPRO_PATTERN, AlgoVariant, CorpusSpec
from bucketeer.stats import Histogram100, chi_square_sf, gof_uniform

from conftest import ACCEPTANCE_RESULTS
from test_hashing import FNV1A64_VECTORS, RFC1321_SUITE, SPOOKY64_VECTORS

CORPUS = CorpusSpec(1_000_000, REPRO_PATTERN, 0)


@contextlib.contextmanager
def criterion(number, desc, budget_s=None):
    detail = {"text": ""}
    start = time.perf_counter()
    try:
        yield detail
        elapsed = time.perf_counter() - start
        if budget_s is not None:
            assert elapsed < budget_s, f"took {elapsed:.1f}s, budget {budget_s}s"
    except BaseException as exc:
        ACCEPTANCE_RESULTS.append((number, desc, False, f"{detail['text']} {exc}".strip()))
        raise
    ACCEPTANCE_RESULTS.append((number, desc, True, f"{detail['text']} ({time.perf_counter() - start:.2f}s)"))


def test_c1_hash_correctness():
    with criterion(1, "hash reference vectors", budget_s=1.0) as d:
        n = 0
        for data, expected in FNV1A64_VECTORS:
            assert hashing.fnv1a64(data) == expected
            assert _purepy.fnv1a64(data) == expected
            n += 1
        for data, digest in RFC1321_SUITE:
            assert hashing.md5_64(data) == int(digest[:16], 16)
            n += 1
        assert len(SPOOKY64_VECTORS) >= 10
        for data, expected in SPOOKY64_VECTORS:
            assert hashing.spooky64(data) == expected
            assert _purepy.spooky64(data) == expected
            n += 1
        d["text"] = f"{n} vectors exact"


def test_c2_survival_function():
    pairs = [
        (106.74, 99, 0.2798, 5e-4),
        (113.22, 99, 0.1556, 5e-4),
        (108.19, 99, 0.2480, 5e-4),
        (108.40, 99, 0.2435, 5e-4),
        (0.44, 1, 0.5075, 2e-3),
        (0.31, 1, 0.5783, 2e-3),
    ]
    with criterion(2, "chi-square survival function vs published pairs", budget_s=1.0) as d:
        worst = 0.0
        for stat, df, want, tol in pairs:
            got = chi_square_sf(stat, df)
            assert abs(got - want) <= tol, f"sf({stat}, {df}) = {got:.5f}, want {want} +/- {tol}"
            worst = max(worst, abs(got - want))
        d["text"] = f"6 pairs, max abs error {worst:.2e}"


UNIFORMITY_CASES = [(v, e) for v in AlgoVariant for e in (10, 100)]


@pytest.mark.parametrize("variant,exposure", UNIFORMITY_CASES, ids=lambda x: str(int(x)))
def test_c3_uniformity_verdicts(variant, exposure):
    expect_reject = variant is AlgoVariant.ALGO1 and exposure == 10
    desc = f"uniformity {variant.label} at {exposure}% exposure " + (
        "rejects at p<1e-6" if expect_reject else "passes at alpha 0.05")
    with criterion(3, desc, budget_s=120) as d:
        rep = harness.run_uniformity(variant, CORPUS, exposure)
        d["text"] = f"statistic {rep.test.statistic:.2f}, p {rep.test.p_value:.4g}"
        p = rep.test.p_value
        if expect_reject:
            assert p < 1e-6, f"p = {p:.4g}, expected < 1e-6"
        else:
            assert p >= 0.05, f"p = {p:.4g}, expected >= 0.05"


@pytest.mark.parametrize("variant", list(AlgoVariant), ids=lambda v: v.label)
def test_c4_independence_verdicts(variant):
    expect_reject = variant in (AlgoVariant.ALGO1, AlgoVariant.ALGO2)
    desc = f"independence {variant.label} " + (
        "rejects at p<1e-6" if expect_reject else "passes at alpha 0.05")
    with criterion(4, desc, budget_s=120) as d:
        rep = harness.run_independence(variant, CORPUS)
        d["text"] = f"statistic {rep.test.statistic:.3f}, p {rep.test.p_value:.4g}"
        p = rep.test.p_value
        if expect_reject:
            assert p < 1e-6, f"p = {p:.4g}, expected < 1e-6"
        else:
            assert p >= 0.05, f"p = {p:.4g}, expected >= 0.05"


@pytest.mark.parametrize("kind", ["md5", "spooky"])
def test_c5_monotonic_ramp_up(kind):
    with criterion(5, f"monotonic ramp-up ({kind}, 10,000 users, exposure 0..100)", budget_s=30) as d:
        users = harness.generate_corpus(CorpusSpec(10_000, REPRO_PATTERN, 0))
        split = (("control", 20), ("treatment", 80))
        previous = None
        for rate in range(101):
            res = assign_arrays(ExperimentConfig("exp_A", rate, split), users, kind)
            if previous is not None:
                was = previous.exposed
                assert not (was & ~res.exposed).any(), f"user dropped at {rate}%"
                assert (res.bucket_index[was] == previous.bucket_index[was]).all(), f"bucket changed at {rate}%"
            previous = res
        assert previous.exposed.all()
        d["text"] = "exposed sets nested, buckets stable"


def test_c6_repro_deterministic(tmp_path):
    with criterion(6, "repro twice with the same seed is byte-identical") as d:
        first, second = tmp_path / "a", tmp_path / "b"
        harness.repro(first, CORPUS)
        harness._corpus.cache_clear()
        harness._encoded.cache_clear()
        harness.repro(second, CORPUS)
        names = sorted(p.name for p in first.iterdir())
        assert names == ["fig1.csv", "fig2.csv", "fig3.csv", "table1.json", "table2.json"]
        match, mismatch, errors = filecmp.cmpfiles(first, second, names, shallow=False)
        assert not mismatch and not errors
        d["text"] = f"{len(match)} artifacts identical"


def test_c7_calibration():
    with criterion(7, "uniformity test rejection rate on true-uniform data in [2%, 8%]") as d:
        rng = np.random.default_rng(20240607)
        rejects = sum(
            gof_uniform(Histogram100(rng.multinomial(10_000, np.full(100, 0.01)))).reject
            for _ in range(1000)
        )
        d["text"] = f"{rejects / 10:.1f}% rejected"
        assert 20 <= rejects <= 80


def test_c8_latency():
    with criterion(8, "algo2 measured faster than algo1") as d:
        corpus = CorpusSpec(200_000, REPRO_PATTERN, 0)
        rep = harness.run_latency_bench(list(AlgoVariant), corpus, iterations=5)
        ratios = rep.speedups()
        d["text"] = f"[{rep.backend}] " + ", ".join(
            f"{k} {rep.ns_per_assignment[k]:.0f}ns ({ratios.get(k, 1.0):.2f}x)" for k in rep.ns_per_assignment)
        assert rep.ns_per_assignment["algo2"] < rep.ns_per_assignment["algo1"]
