"""64-bit hash backends used for assignment.

All three functions take raw bytes and return an unsigned 64-bit int:

* ``fnv``: FNV-1a, 64-bit offset basis and prime.
* ``md5``: first 8 bytes of the MD5 digest, read big-endian.
* ``spooky``: SpookyHash V2 ``Hash64`` with seed 0.
"""
from __future__ import annotations

import enum

from bucketeer._kernels import backend


class HashKind(enum.Enum):
    FNV1A64 = "fnv"
    MD5_64 = "md5"
    SPOOKY64 = "spooky"

    @property
    def code(self) -> int:
        """Integer code understood by the batch kernels."""
        return _CODES[self]

    @classmethod
    def parse(cls, name: str | HashKind) -> HashKind:
        if isinstance(name, cls):
            return name
        try:
            return cls(name)
        except ValueError:
            valid = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown hash kind {name!r} (expected one of {valid})") from None


_CODES = {HashKind.FNV1A64: 0, HashKind.MD5_64: 1, HashKind.SPOOKY64: 2}


def fnv1a64(data: bytes) -> int:
    return backend.fnv1a64(data)


def md5_64(data: bytes) -> int:
    return backend.md5_64(data)


def spooky64(data: bytes) -> int:
    return backend.spooky64(data)


_DISPATCH = {
    HashKind.FNV1A64: fnv1a64,
    HashKind.MD5_64: md5_64,
    HashKind.SPOOKY64: spooky64,
}


def hash64(kind: HashKind | str, data: bytes | str) -> int:
    """Hash ``data`` with the selected backend.

    Strings are encoded as UTF-8 with no normalization.
    """
    if isinstance(data, str):
        data = data.encode("utf-8")
    return _DISPATCH[HashKind.parse(kind)](bytes(data))
