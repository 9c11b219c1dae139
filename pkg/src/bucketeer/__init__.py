"""Deterministic hash-based assignment of users to experiment buckets."""
from bucketeer._kernels import BACKEND_NAME
from bucketeer.assignment import (
    ORIGINAL,
    Assignment,
    AssignmentTrace,
    BucketSpec,
    ExperimentConfig,
    assign_batch,
    assign_new,
    assign_original,
)
from bucketeer.errors import BucketeerError, ConfigError, InputError, NumericalError, SampleSizeError
from bucketeer.hashing import HashKind, hash64

__version__ = "0.1.0"
