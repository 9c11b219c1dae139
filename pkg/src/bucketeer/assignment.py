"""Deterministic user-to-bucket assignment.

Two schemes are provided:

``assign_original``
    The two-step scheme: one FNV-1a hash of ``salt + user + "Exposure"``
    decides exposure, a second hash of ``salt + user + "Bucket"`` picks the
    bucket. Both use ``hash mod 100``.

``assign_new``
    The single-hash scheme: hash ``experiment_id + user`` once, scale the
    64-bit value to Z in [0, 9999], and split Z into an exposure digit pair
    ``Z // 100`` and a bucket digit pair ``Z % 100``.

Because the bucket digits do not depend on the exposure rate, raising the
exposure of a running experiment only adds users; nobody already exposed
changes bucket.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from bucketeer._kernels import backend
from bucketeer._purepy import z_from_hash
from bucketeer.errors import ConfigError, InputError
from bucketeer.hashing import HashKind, hash64

ORIGINAL = "original"

__all__ = [
    "ORIGINAL",
    "Assignment",
    "AssignmentTrace",
    "BatchResult",
    "BucketSpec",
    "ExperimentConfig",
    "assign_arrays",
    "assign_batch",
    "assign_new",
    "assign_original",
    "parse_buckets",
    "z_from_hash",
]


@dataclass(frozen=True)
class BucketSpec:
    name: str
    percentage: int

    def __post_init__(self):
        if not self.name:
            raise ConfigError("bucket name must be non-empty")
        if isinstance(self.percentage, bool) or not isinstance(self.percentage, int):
            raise ConfigError(f"bucket {self.name!r}: percentage must be an integer")
        if not 0 <= self.percentage <= 100:
            raise ConfigError(f"bucket {self.name!r}: percentage {self.percentage} outside [0, 100]")


@dataclass(frozen=True)
class ExperimentConfig:
    """Identity and allocation of one experiment.

    ``salt`` is only read by the original two-step scheme. When omitted it
    defaults to ``experiment_id``.
    """

    experiment_id: str
    exposure_rate_percent: int
    buckets: tuple[BucketSpec, ...]
    salt: str = ""

    def __post_init__(self):
        if not self.experiment_id:
            raise ConfigError("experiment_id must be non-empty")
        if not self.salt:
            object.__setattr__(self, "salt", self.experiment_id)
        rate = self.exposure_rate_percent
        if isinstance(rate, bool) or not isinstance(rate, int) or not 0 <= rate <= 100:
            raise ConfigError(f"exposure_rate_percent must be an integer in [0, 100], got {rate!r}")
        buckets = tuple(
            b if isinstance(b, BucketSpec) else BucketSpec(*b) for b in self.buckets
        )
        object.__setattr__(self, "buckets", buckets)
        if not buckets:
            raise ConfigError("at least one bucket is required")
        names = [b.name for b in buckets]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate bucket names in {names}")
        total = sum(b.percentage for b in buckets)
        if total != 100:
            raise ConfigError(f"bucket percentages sum to {total}, expected 100")

    @property
    def cumulative_bounds(self) -> np.ndarray:
        return np.cumsum([b.percentage for b in self.buckets])

    def bucket_for(self, r_b: int) -> str:
        upper = 0
        for bucket in self.buckets:
            upper += bucket.percentage
            if r_b < upper:
                return bucket.name
        raise AssertionError(f"r_b={r_b} outside [0, 100)")

    def to_dict(self) -> dict:
        return {
            "experiment_id": self.experiment_id,
            "salt": self.salt,
            "exposure_rate_percent": self.exposure_rate_percent,
            "buckets": [{"name": b.name, "percentage": b.percentage} for b in self.buckets],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> ExperimentConfig:
        try:
            return cls(
                experiment_id=doc["experiment_id"],
                salt=doc.get("salt", ""),
                exposure_rate_percent=doc["exposure_rate_percent"],
                buckets=tuple(BucketSpec(b["name"], b["percentage"]) for b in doc["buckets"]),
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed experiment config: {exc!r}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> ExperimentConfig:
        return cls.from_dict(json.loads(text))


def parse_buckets(text: str) -> tuple[BucketSpec, ...]:
    """Parse ``"control:20,treatment:80"`` into bucket specs."""
    buckets = []
    for item in text.split(","):
        name, sep, pct = item.strip().partition(":")
        if not sep or not name:
            raise ConfigError(f"malformed bucket {item!r}; expected name:percentage")
        try:
            value = int(pct)
        except ValueError:
            raise ConfigError(f"bucket {name!r}: percentage {pct!r} is not an integer") from None
        buckets.append(BucketSpec(name, value))
    return tuple(buckets)


@dataclass(frozen=True)
class Assignment:
    bucket: str | None = None

    @property
    def ignored(self) -> bool:
        return self.bucket is None

    def to_dict(self) -> dict:
        if self.bucket is None:
            return {"verdict": "ignore"}
        return {"verdict": "bucket", "bucket": self.bucket}

    def __str__(self) -> str:
        return "ignore" if self.bucket is None else self.bucket


IGNORED = Assignment()


@dataclass(frozen=True)
class AssignmentTrace:
    """Verdict plus the intermediate values that produced it.

    For the single-hash scheme ``hash`` is H and ``z`` is set. For the
    two-step scheme ``hash`` is the exposure hash, ``bucket_hash`` the
    bucket hash, and ``r_b``/``bucket_hash`` are None for ignored users
    because the second step never runs.
    """

    algorithm: str
    hash: int
    r_e: int
    assignment: Assignment
    r_b: int | None = None
    z: int | None = None
    bucket_hash: int | None = None

    def to_dict(self) -> dict:
        out = {
            "algorithm": self.algorithm,
            "hash": self.hash,
            "z": self.z,
            "r_e": self.r_e,
            "r_b": self.r_b,
            "assignment": self.assignment.to_dict(),
        }
        if self.algorithm == ORIGINAL:
            out["bucket_hash"] = self.bucket_hash
            del out["z"]
        return out


def _check_user(user_id: str) -> bytes:
    if not isinstance(user_id, str):
        raise InputError(f"user_id must be a string, got {type(user_id).__name__}")
    if not user_id:
        raise InputError("user_id must be non-empty")
    return user_id.encode("utf-8")


def assign_new(config: ExperimentConfig, user_id: str, kind: HashKind | str) -> AssignmentTrace:
    kind = HashKind.parse(kind)
    user = _check_user(user_id)
    h = hash64(kind, config.experiment_id.encode("utf-8") + user)
    z = z_from_hash(h)
    r_e, r_b = divmod(z, 100)
    if r_e >= config.exposure_rate_percent:
        verdict = IGNORED
    else:
        verdict = Assignment(config.bucket_for(r_b))
    return AssignmentTrace(kind.value, h, r_e, verdict, r_b=r_b, z=z)


def assign_original(config: ExperimentConfig, user_id: str) -> AssignmentTrace:
    user = _check_user(user_id)
    salt = config.salt.encode("utf-8")
    h_e = hash64(HashKind.FNV1A64, salt + user + b"Exposure")
    r_e = h_e % 100
    # ">=" rather than ">": a rate of E% exposes exactly the digits 0..E-1
    if r_e >= config.exposure_rate_percent:
        return AssignmentTrace(ORIGINAL, h_e, r_e, IGNORED)
    h_b = hash64(HashKind.FNV1A64, salt + user + b"Bucket")
    r_b = h_b % 100
    return AssignmentTrace(
        ORIGINAL, h_e, r_e, Assignment(config.bucket_for(r_b)), r_b=r_b, bucket_hash=h_b
    )


def _algorithm_name(algorithm) -> str:
    if algorithm == ORIGINAL:
        return ORIGINAL
    return HashKind.parse(algorithm).value


@dataclass
class BatchResult:
    """Column-wise assignment results for a list of users.

    ``bucket_index`` is -1 for ignored users. For the two-step scheme
    ``r_b`` is filled for every user (the second hash is computed anyway
    so that conditional histograms can be built); only the verdict
    honours the exposure check.
    """

    algorithm: str
    hash: np.ndarray
    r_e: np.ndarray
    r_b: np.ndarray
    bucket_index: np.ndarray
    z: np.ndarray | None = None
    bucket_hash: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.r_e)

    @property
    def exposed(self) -> np.ndarray:
        return self.bucket_index >= 0


def _encode_users(user_ids: Sequence[str]) -> list[bytes]:
    encoded = []
    for i, user_id in enumerate(user_ids):
        try:
            encoded.append(_check_user(user_id))
        except InputError as exc:
            raise InputError(f"user_ids[{i}]: {exc}") from None
    return encoded


def assign_arrays(config: ExperimentConfig, user_ids: Sequence[str], algorithm) -> BatchResult:
    """Vectorised assignment; ``algorithm`` is ``"original"`` or a hash kind."""
    name = _algorithm_name(algorithm)
    users = _encode_users(user_ids)
    return _assign_encoded(config, users, name)


def _assign_encoded(config: ExperimentConfig, users: list[bytes], name: str) -> BatchResult:
    if name == ORIGINAL:
        h_e, h_b = backend.original_batch(config.salt.encode("utf-8"), users)
        r_e = (h_e % np.uint64(100)).astype(np.int16)
        r_b = (h_b % np.uint64(100)).astype(np.int16)
        z = None
    else:
        h_e, z = backend.new_batch(HashKind(name).code, config.experiment_id.encode("utf-8"), users)
        h_b = None
        r_e = (z // 100).astype(np.int16)
        r_b = (z % 100).astype(np.int16)
    index = np.searchsorted(config.cumulative_bounds, r_b, side="right").astype(np.int16)
    index[r_e >= config.exposure_rate_percent] = -1
    return BatchResult(name, h_e, r_e, r_b, index, z=z, bucket_hash=h_b)


def assign_batch(config: ExperimentConfig, user_ids: Sequence[str], algorithm) -> list[AssignmentTrace]:
    """Assign every user; element i equals the single-call trace for user i."""
    res = assign_arrays(config, user_ids, algorithm)
    names = [b.name for b in config.buckets]
    hashes = res.hash.tolist()
    r_e = res.r_e.tolist()
    r_b = res.r_b.tolist()
    index = res.bucket_index.tolist()
    out = []
    if res.algorithm == ORIGINAL:
        bucket_hashes = res.bucket_hash.tolist()
        for i in range(len(res)):
            if index[i] < 0:
                out.append(AssignmentTrace(ORIGINAL, hashes[i], r_e[i], IGNORED))
            else:
                out.append(AssignmentTrace(
                    ORIGINAL, hashes[i], r_e[i], Assignment(names[index[i]]),
                    r_b=r_b[i], bucket_hash=bucket_hashes[i],
                ))
    else:
        zs = res.z.tolist()
        for i in range(len(res)):
            verdict = IGNORED if index[i] < 0 else Assignment(names[index[i]])
            out.append(AssignmentTrace(res.algorithm, hashes[i], r_e[i], verdict, r_b=r_b[i], z=zs[i]))
    return out
