import math

import numpy as np
import pytest

from bucketeer import harness
from bucketeer.assignment import ExperimentConfig, assign_new, assign_original, parse_buckets
from bucketeer.errors import ConfigError, SampleSizeError
from bucketeer.harness import (
    REPRO_PATTERN,
    AlgoVariant,
    CorpusSpec,
    generate_corpus,
    replay,
    run_independence,
    run_latency_bench,
    run_srm_check,
    run_uniformity,
)

SMALL = CorpusSpec(50_000, REPRO_PATTERN, 3)


def test_corpus_examples():
    assert generate_corpus(CorpusSpec(1, "user_{index}")) == ["user_0"]
    assert generate_corpus(CorpusSpec(3, "user_{index}")) == ["user_0", "user_1", "user_2"]


def test_corpus_deterministic_and_distinct():
    spec = CorpusSpec(100_000, REPRO_PATTERN, 99)
    first = generate_corpus(spec)
    harness._corpus.cache_clear()
    assert generate_corpus(spec) == first
    assert len(set(first)) == len(first)
    assert generate_corpus(CorpusSpec(100_000, REPRO_PATTERN, 100)) != first


def test_corpus_errors():
    with pytest.raises(ConfigError, match="index"):
        generate_corpus(CorpusSpec(2, "fixed"))
    generate_corpus(CorpusSpec(1, "fixed"))
    with pytest.raises(ConfigError, match="unknown placeholders"):
        generate_corpus(CorpusSpec(2, "{index}{name}"))
    with pytest.raises(ConfigError):
        generate_corpus(CorpusSpec(0))


def test_variant_parse():
    assert AlgoVariant.parse("algo3") is AlgoVariant.ALGO3
    assert AlgoVariant.parse(2) is AlgoVariant.ALGO2
    with pytest.raises(ConfigError):
        AlgoVariant.parse(5)


def test_uniformity_histogram_counts_conditioned_users():
    corpus = CorpusSpec(10_000, REPRO_PATTERN, 3)
    config = ExperimentConfig("exp_A", 10, harness.HALF_SPLIT)
    expected = [0] * 100
    for user in generate_corpus(corpus):
        t = assign_new(config, user, "md5")
        if t.r_e < 10:
            expected[t.r_b] += 1
    rep = run_uniformity(3, corpus, 10)
    assert rep.payload["histogram"] == expected
    assert rep.payload["n_conditioned"] == sum(expected)


def test_uniformity_eq_condition():
    rep = run_uniformity(4, CorpusSpec(200_000, REPRO_PATTERN, 1), 100, condition="eq", y=42)
    assert 1500 < rep.payload["n_conditioned"] < 2500


def test_uniformity_sample_floor_message():
    with pytest.raises(SampleSizeError, match="increase n_users"):
        run_uniformity(3, CorpusSpec(1000, REPRO_PATTERN, 0), 10)


def test_uniformity_bad_condition():
    with pytest.raises(ConfigError):
        run_uniformity(3, SMALL, 10, condition="gt")
    with pytest.raises(ConfigError):
        run_uniformity(3, SMALL, 10, condition="eq", y=100)


def test_algo1_residue_coupling():
    # low 2 bits of an FNV-1a hash depend only on the low 2 bits of the input
    # bytes, so R_b mod 4 is a fixed function of R_e mod 4 in the two-step scheme
    config = ExperimentConfig("exp_A", 100, harness.HALF_SPLIT)
    pairs = set()
    for user in generate_corpus(CorpusSpec(5000, REPRO_PATTERN, 0)):
        t = assign_original(config, user)
        pairs.add((t.r_e % 4, t.r_b % 4))
    assert len(pairs) == 4
    assert len({a for a, _ in pairs}) == 4


def test_algo1_low_exposure_is_non_uniform():
    rep = run_uniformity(1, SMALL, 10)
    assert rep.test.p_value < 1e-6


def test_independence_report_shape():
    rep = run_independence(4, SMALL)
    table = np.array(rep.payload["contingency"])
    assert table.shape == (2, 2) and table.sum() == SMALL.n_users
    assert len(rep.payload["scatter"]) == harness.SCATTER_SIZE
    assert rep.test.df == 1


def test_scatter_is_first_users():
    rep = run_independence(3, SMALL)
    users = generate_corpus(SMALL)[:harness.SCATTER_SIZE]
    a = ExperimentConfig("exp_A", 100, harness.HALF_SPLIT)
    b = ExperimentConfig("exp_B", 100, harness.HALF_SPLIT)
    expected = [[assign_new(a, u, "md5").r_b, assign_new(b, u, "md5").r_b] for u in users]
    assert rep.payload["scatter"] == expected


def test_independence_identical_ids():
    with pytest.raises(ConfigError, match="distinct"):
        run_independence(3, SMALL, ("exp_A", "exp_A"))


def test_independence_deterministic():
    a = run_independence(3, SMALL).to_json()
    harness._corpus.cache_clear()
    harness._encoded.cache_clear()
    assert run_independence(3, SMALL).to_json() == a


@pytest.mark.parametrize(
    "make",
    [
        lambda: run_uniformity(2, SMALL, 30, "lt", 20, "exp_Z", 0.01),
        lambda: run_independence(1, SMALL, ("x1", "x2")),
        lambda: harness.srm_report(3, SMALL, ExperimentConfig("e", 40, parse_buckets("a:10,b:90"))),
    ],
)
def test_replay_reproduces_statistic(make):
    rep = make()
    again = replay(rep.to_dict()["scenario"])
    assert again.to_json() == rep.to_json()


def test_srm_proportional_counts_give_zero():
    from bucketeer.stats import gof_proportions

    assert gof_proportions([300, 700], [30, 70]).statistic == 0


@pytest.mark.parametrize("variant", [3, 4])
def test_srm_20_80_no_mismatch(variant):
    # alpha 0.001: seed 0 puts MD5 at p = 0.017, an ordinary tail draw
    config = ExperimentConfig("exp_A", 100, parse_buckets("control:20,treatment:80"))
    report = run_srm_check(variant, CorpusSpec(1_000_000, REPRO_PATTERN, 0), config, alpha=0.001)
    assert not report.reject


def test_srm_algo1_residue_mismatch():
    # at 1% exposure only R_e = 0 is exposed, which pins R_b mod 4 to one
    # residue; a 2% control bucket {0, 1} then gets either 1/25 or 0 of users
    config = ExperimentConfig("exp_A", 1, parse_buckets("control:2,treatment:98"))
    corpus = CorpusSpec(1_000_000, REPRO_PATTERN, 0)
    report = run_srm_check(1, corpus, config)
    assert report.reject and report.p_value < 1e-6
    counts = harness.srm_report(1, corpus, config).payload["bucket_counts"]
    n = sum(counts.values())
    share = counts["control"] / n
    se = math.sqrt(0.04 * 0.96 / n)
    assert share == 0 or abs(share - 0.04) < 3 * se
    # the single-hash scheme shows no mismatch on the same configuration
    assert not run_srm_check(3, corpus, config, alpha=0.001).reject


def test_bench_shape():
    rep = run_latency_bench([1], CorpusSpec(2000, REPRO_PATTERN, 0), iterations=1)
    assert list(rep.ns_per_assignment) == ["algo1"]
    assert rep.ns_per_assignment["algo1"] > 0
    assert rep.speedups() == {}
    rep = run_latency_bench([1, 2], CorpusSpec(2000, REPRO_PATTERN, 0), iterations=2)
    assert set(rep.to_dict()["speedup_vs_algo1"]) == {"algo2"}
    assert "algo2" in rep.table()


def test_bench_python_backend_restores_state():
    from bucketeer import _purepy, assignment

    before = assignment.backend
    rep = run_latency_bench([2], CorpusSpec(500, REPRO_PATTERN, 0), iterations=1, backend=_purepy)
    assert rep.backend == "python"
    assert assignment.backend is before


def test_bench_validation():
    from bucketeer.errors import InputError

    with pytest.raises(InputError):
        run_latency_bench([1], CorpusSpec(10), iterations=0)
    with pytest.raises(InputError):
        run_latency_bench([], CorpusSpec(10), iterations=1)
