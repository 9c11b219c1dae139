"""Validation scenarios for the assignment schemes.

Each ``run_*`` function is a pure function of its arguments (except for
benchmark timings): it synthesizes a user corpus, assigns every user, and
runs the matching chi-square test. Reports embed the scenario that produced
them so any statistic can be recomputed from the JSON alone.
"""
from __future__ import annotations

import csv
import enum
import functools
import json
import random
import statistics
import string
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from bucketeer import assignment
from bucketeer._kernels import BACKEND_NAME
from bucketeer.assignment import ORIGINAL, BucketSpec, ExperimentConfig
from bucketeer.errors import ConfigError, InputError, SampleSizeError
from bucketeer.hashing import HashKind
from bucketeer.stats import (
    DEFAULT_ALPHA,
    MIN_EXPECTED,
    ContingencyTable,
    Histogram100,
    TestReport,
    gof_proportions,
    gof_uniform,
    independence_test,
)

DEFAULT_EXPERIMENTS = ("exp_A", "exp_B")
DEFAULT_USERS = 1_000_000
SCATTER_SIZE = 1000
HALF_SPLIT = (BucketSpec("control", 50), BucketSpec("treatment", 50))

# Corpus used by `repro` and the acceptance suite: a sequence number plus 64
# random bits, so IDs are distinct by construction yet not purely sequential.
REPRO_PATTERN = "u{index}_{hex}"


class AlgoVariant(enum.IntEnum):
    ALGO1 = 1  # original two-step scheme, FNV
    ALGO2 = 2  # single-hash scheme, FNV
    ALGO3 = 3  # single-hash scheme, MD5
    ALGO4 = 4  # single-hash scheme, SpookyHash

    @property
    def algorithm(self):
        return _ALGORITHMS[self]

    @property
    def label(self) -> str:
        return f"algo{int(self)}"

    @classmethod
    def parse(cls, value) -> AlgoVariant:
        if isinstance(value, cls):
            return value
        text = str(value).lower().removeprefix("algo")
        try:
            return cls(int(text))
        except ValueError:
            raise ConfigError(f"unknown algorithm variant {value!r} (expected 1-4)") from None


_ALGORITHMS = {
    AlgoVariant.ALGO1: ORIGINAL,
    AlgoVariant.ALGO2: HashKind.FNV1A64,
    AlgoVariant.ALGO3: HashKind.MD5_64,
    AlgoVariant.ALGO4: HashKind.SPOOKY64,
}


@dataclass(frozen=True)
class CorpusSpec:
    """Synthetic user IDs.

    ``id_pattern`` is a ``str.format`` template. ``{index}`` is the user's
    position; ``{hex}`` is 16 hex digits drawn from a PRNG seeded with
    ``seed``. The index placeholder is mandatory for more than one user so
    that IDs are distinct by construction.
    """

    n_users: int = DEFAULT_USERS
    id_pattern: str = "user_{index}"
    seed: int = 0

    def to_dict(self) -> dict:
        return {"n_users": self.n_users, "id_pattern": self.id_pattern, "seed": self.seed}

    @classmethod
    def from_dict(cls, doc: dict) -> CorpusSpec:
        return cls(doc["n_users"], doc["id_pattern"], doc["seed"])


def _pattern_fields(pattern: str) -> set[str]:
    try:
        parsed = list(string.Formatter().parse(pattern))
    except ValueError as exc:
        raise ConfigError(f"bad id_pattern {pattern!r}: {exc}") from None
    names = {name for _, name, _, _ in parsed if name is not None}
    unknown = names - {"index", "hex"}
    if unknown:
        raise ConfigError(f"id_pattern {pattern!r} uses unknown placeholders {sorted(unknown)}")
    return names


def generate_corpus(spec: CorpusSpec) -> list[str]:
    return list(_corpus(spec))


@functools.lru_cache(maxsize=4)
def _corpus(spec: CorpusSpec) -> tuple[str, ...]:
    if isinstance(spec.n_users, bool) or not isinstance(spec.n_users, int) or spec.n_users < 1:
        raise ConfigError(f"n_users must be a positive integer, got {spec.n_users!r}")
    if not 0 <= spec.seed < 2**64:
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {spec.seed}")
    names = _pattern_fields(spec.id_pattern)
    if "index" not in names and spec.n_users > 1:
        raise ConfigError(f"id_pattern {spec.id_pattern!r} needs an {{index}} placeholder for n_users > 1")
    fmt = spec.id_pattern.format
    if "hex" in names:
        rng = random.Random(spec.seed)
        ids = tuple(fmt(index=i, hex=f"{rng.getrandbits(64):016x}") for i in range(spec.n_users))
    else:
        ids = tuple(fmt(index=i) for i in range(spec.n_users))
    if not ids[0]:
        raise ConfigError("id_pattern produces empty user IDs")
    if len(set(ids)) != len(ids):
        raise ConfigError(f"id_pattern {spec.id_pattern!r} produces duplicate IDs")
    return ids


@functools.lru_cache(maxsize=4)
def _encoded(spec: CorpusSpec) -> list[bytes]:
    return [u.encode("utf-8") for u in _corpus(spec)]


def _assign(variant: AlgoVariant, corpus: CorpusSpec, config: ExperimentConfig):
    name = assignment._algorithm_name(variant.algorithm)
    return assignment._assign_encoded(config, _encoded(corpus), name)


@dataclass
class ValidationReport:
    variant: AlgoVariant
    scenario: dict
    tests: dict[str, TestReport]
    payload: dict = field(default_factory=dict)

    @property
    def reject(self) -> bool:
        return any(t.reject for t in self.tests.values())

    def to_dict(self) -> dict:
        return {
            "variant": self.variant.label,
            "scenario": self.scenario,
            "tests": {k: v.to_dict() for k, v in self.tests.items()},
            **self.payload,
        }

    def to_json(self, indent: int | None = None) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)

    @property
    def test(self) -> TestReport:
        (only,) = self.tests.values()
        return only


def _condition_mask(r_e: np.ndarray, condition: str, y: int) -> np.ndarray:
    if condition == "lt":
        if not 1 <= y <= 100:
            raise ConfigError(f"condition R_e < y needs y in [1, 100], got {y}")
        return r_e < y
    if condition == "eq":
        if not 0 <= y <= 99:
            raise ConfigError(f"condition R_e == y needs y in [0, 99], got {y}")
        return r_e == y
    raise ConfigError(f"condition must be 'lt' or 'eq', got {condition!r}")


def run_uniformity(
    variant,
    corpus: CorpusSpec,
    exposure_percent: int,
    condition: str = "lt",
    y: int | None = None,
    experiment_id: str = DEFAULT_EXPERIMENTS[0],
    alpha: float = DEFAULT_ALPHA,
) -> ValidationReport:
    """Histogram of R_b among users meeting the R_e condition, tested for uniformity.

    ``y`` defaults to the exposure rate, i.e. the histogram covers exactly
    the exposed users.
    """
    variant = AlgoVariant.parse(variant)
    y = exposure_percent if y is None else y
    config = ExperimentConfig(experiment_id, exposure_percent, HALF_SPLIT)
    res = _assign(variant, corpus, config)
    mask = _condition_mask(res.r_e, condition, y)
    hist = Histogram100.from_values(res.r_b[mask])
    try:
        report = gof_uniform(hist, alpha)
    except SampleSizeError as exc:
        raise SampleSizeError(f"{exc}; increase n_users (currently {corpus.n_users})") from None
    scenario = {
        "kind": "uniformity",
        "variant": int(variant),
        "corpus": corpus.to_dict(),
        "experiment": config.to_dict(),
        "condition": condition,
        "y": y,
        "alpha": alpha,
    }
    payload = {"histogram": hist.counts.tolist(), "n_conditioned": hist.total}
    return ValidationReport(variant, scenario, {"gof_uniform": report}, payload)


def run_independence(
    variant,
    corpus: CorpusSpec,
    experiment_ids: tuple[str, str] = DEFAULT_EXPERIMENTS,
    alpha: float = DEFAULT_ALPHA,
) -> ValidationReport:
    """2x2 bucket-vs-bucket table for two experiments at full exposure."""
    variant = AlgoVariant.parse(variant)
    first, second = experiment_ids
    if first == second:
        raise ConfigError("independence test needs two distinct experiment IDs")
    configs = [ExperimentConfig(e, 100, HALF_SPLIT) for e in (first, second)]
    res_i, res_j = (_assign(variant, corpus, c) for c in configs)
    table = ContingencyTable.from_labels(res_i.bucket_index, res_j.bucket_index, (2, 2))
    report = independence_test(table, alpha)
    k = min(SCATTER_SIZE, len(res_i))
    scatter = np.stack([res_i.r_b[:k], res_j.r_b[:k]], axis=1).tolist()
    scenario = {
        "kind": "independence",
        "variant": int(variant),
        "corpus": corpus.to_dict(),
        "experiments": [c.to_dict() for c in configs],
        "alpha": alpha,
    }
    payload = {"contingency": table.counts.tolist(), "scatter": scatter}
    return ValidationReport(variant, scenario, {"independence": report}, payload)


def run_srm_check(variant, corpus: CorpusSpec, config: ExperimentConfig, alpha: float = DEFAULT_ALPHA) -> TestReport:
    """Sample-ratio-mismatch test of exposed bucket counts against the configured split."""
    variant = AlgoVariant.parse(variant)
    res = _assign(variant, corpus, config)
    idx = res.bucket_index[res.exposed]
    counts = np.bincount(idx, minlength=len(config.buckets))
    return gof_proportions(counts, [b.percentage for b in config.buckets], alpha)


def srm_report(variant, corpus: CorpusSpec, config: ExperimentConfig, alpha: float = DEFAULT_ALPHA) -> ValidationReport:
    variant = AlgoVariant.parse(variant)
    res = _assign(variant, corpus, config)
    counts = np.bincount(res.bucket_index[res.exposed], minlength=len(config.buckets))
    report = gof_proportions(counts, [b.percentage for b in config.buckets], alpha)
    scenario = {
        "kind": "srm",
        "variant": int(variant),
        "corpus": corpus.to_dict(),
        "experiment": config.to_dict(),
        "alpha": alpha,
    }
    payload = {"bucket_counts": {b.name: int(n) for b, n in zip(config.buckets, counts)}}
    return ValidationReport(variant, scenario, {"srm": report}, payload)


def replay(scenario: dict) -> ValidationReport:
    """Re-run a report from its embedded scenario descriptor."""
    corpus = CorpusSpec.from_dict(scenario["corpus"])
    kind = scenario["kind"]
    if kind == "uniformity":
        exp = scenario["experiment"]
        return run_uniformity(
            scenario["variant"], corpus, exp["exposure_rate_percent"],
            scenario["condition"], scenario["y"], exp["experiment_id"], scenario["alpha"],
        )
    if kind == "independence":
        ids = tuple(e["experiment_id"] for e in scenario["experiments"])
        return run_independence(scenario["variant"], corpus, ids, scenario["alpha"])
    if kind == "srm":
        config = ExperimentConfig.from_dict(scenario["experiment"])
        return srm_report(scenario["variant"], corpus, config, scenario["alpha"])
    raise ConfigError(f"unknown scenario kind {kind!r}")


# -- latency -----------------------------------------------------------------

@dataclass
class BenchReport:
    backend: str
    n_users: int
    iterations: int
    ns_per_assignment: dict[str, float]

    def speedups(self, baseline: str = "algo1") -> dict[str, float]:
        """Baseline time divided by each variant's time (>1 means faster)."""
        base = self.ns_per_assignment.get(baseline)
        if base is None:
            return {}
        return {k: base / v for k, v in self.ns_per_assignment.items() if k != baseline}

    def to_dict(self) -> dict:
        return {
            "backend": self.backend,
            "n_users": self.n_users,
            "iterations": self.iterations,
            "ns_per_assignment": self.ns_per_assignment,
            "speedup_vs_algo1": self.speedups(),
        }

    def table(self) -> str:
        speed = self.speedups()
        lines = [f"backend={self.backend} users={self.n_users} iterations={self.iterations}",
                 f"{'variant':<8} {'ns/assign':>10} {'vs algo1':>9}"]
        for name, ns in self.ns_per_assignment.items():
            ratio = f"{speed[name]:.2f}x" if name in speed else "-"
            lines.append(f"{name:<8} {ns:>10.1f} {ratio:>9}")
        return "\n".join(lines)


def run_latency_bench(variants, corpus: CorpusSpec, iterations: int = 5, chunks: int = 10, backend=None) -> BenchReport:
    """Time full assignment (hashing plus bucket decision) per variant.

    Each iteration times the corpus in ``chunks`` slices; the reported figure
    is the median over iterations of the per-iteration median ns/assignment.
    """
    if iterations < 1:
        raise InputError("iterations must be >= 1")
    variants = [AlgoVariant.parse(v) for v in variants]
    if not variants:
        raise InputError("at least one variant is required")
    users = _encoded(corpus)
    config = ExperimentConfig(DEFAULT_EXPERIMENTS[0], 100, HALF_SPLIT)
    step = max(1, len(users) // max(1, chunks))
    slices = [users[i:i + step] for i in range(0, len(users), step)]
    assign = assignment._assign_encoded
    backend_name = BACKEND_NAME
    if backend is not None:
        backend_name = "compiled" if backend.__name__.endswith("_core") else "python"
    out = {}
    for variant in variants:
        name = assignment._algorithm_name(variant.algorithm)
        medians = []
        for _ in range(iterations):
            per_chunk = []
            for chunk in slices:
                with _backend_override(backend):
                    t0 = time.perf_counter_ns()
                    assign(config, chunk, name)
                    elapsed = time.perf_counter_ns() - t0
                per_chunk.append(elapsed / len(chunk))
            medians.append(statistics.median(per_chunk))
        out[variant.label] = statistics.median(medians)
    return BenchReport(backend_name, len(users), iterations, out)


class _backend_override:
    def __init__(self, backend):
        self.backend = backend

    def __enter__(self):
        self.saved = assignment.backend
        if self.backend is not None:
            assignment.backend = self.backend

    def __exit__(self, *exc):
        assignment.backend = self.saved


# -- full reproduction ---------------------------------------------------------

# verdicts the paper reports: True means the null hypothesis is rejected
EXPECTED_UNIFORMITY_REJECT = {
    (AlgoVariant.ALGO1, 10): True,
    (AlgoVariant.ALGO1, 100): False,
    **{(v, e): False for v in list(AlgoVariant)[1:] for e in (10, 100)},
}
EXPECTED_INDEPENDENCE_REJECT = {
    AlgoVariant.ALGO1: True,
    AlgoVariant.ALGO2: True,
    AlgoVariant.ALGO3: False,
    AlgoVariant.ALGO4: False,
}


def _write_csv(path: Path, header: list[str], rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def write_histogram_csv(path: Path, counts) -> None:
    _write_csv(Path(path), ["cell", "count"], enumerate(int(c) for c in counts))


def write_scatter_csv(path: Path, pairs) -> None:
    _write_csv(Path(path), ["rb_i", "rb_j"], pairs)


def repro(out_dir, corpus: CorpusSpec | None = None, alpha: float = DEFAULT_ALPHA) -> dict:
    """Write table1.json, table2.json and fig1-3.csv; return a verdict summary."""
    corpus = corpus or CorpusSpec(DEFAULT_USERS, REPRO_PATTERN, 0)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    table1 = []
    mismatches = []
    for variant in AlgoVariant:
        for exposure in (10, 100):
            rep = run_uniformity(variant, corpus, exposure, alpha=alpha)
            want = EXPECTED_UNIFORMITY_REJECT[(variant, exposure)]
            row = {"variant": variant.label, "exposure_percent": exposure,
                   **rep.test.to_dict(), "paper_reject": want, "scenario": rep.scenario}
            table1.append(row)
            if rep.test.reject != want:
                mismatches.append(f"table1 {variant.label} exposure {exposure}")
    table2 = []
    scatter_rows = []
    for variant in AlgoVariant:
        rep = run_independence(variant, corpus, alpha=alpha)
        want = EXPECTED_INDEPENDENCE_REJECT[variant]
        table2.append({"variant": variant.label, **rep.test.to_dict(), "paper_reject": want,
                       "contingency": rep.payload["contingency"], "scenario": rep.scenario})
        if rep.test.reject != want:
            mismatches.append(f"table2 {variant.label}")
        scatter_rows.extend([variant.label, a, b] for a, b in rep.payload["scatter"])

    fig1_rows = []
    for y in (50, 100):
        rep = run_uniformity(AlgoVariant.ALGO1, corpus, y, alpha=alpha)
        fig1_rows.extend([AlgoVariant.ALGO1.label, y, cell, n] for cell, n in enumerate(rep.payload["histogram"]))
    fig2_rows = []
    for variant in list(AlgoVariant)[1:]:
        for y in (10, 100):
            rep = run_uniformity(variant, corpus, y, alpha=alpha)
            fig2_rows.extend([variant.label, y, cell, n] for cell, n in enumerate(rep.payload["histogram"]))

    def dump(name, obj):
        (out / name).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    dump("table1.json", {"corpus": corpus.to_dict(), "rows": table1})
    dump("table2.json", {"corpus": corpus.to_dict(), "rows": table2})
    _write_csv(out / "fig1.csv", ["variant", "y", "cell", "count"], fig1_rows)
    _write_csv(out / "fig2.csv", ["variant", "y", "cell", "count"], fig2_rows)
    _write_csv(out / "fig3.csv", ["variant", "rb_i", "rb_j"], scatter_rows)
    return {"out_dir": str(out), "mismatches": mismatches, "ok": not mismatches}
