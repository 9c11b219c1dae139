"""Pure-Python hash and assignment kernels.

Used when the compiled ``_core`` extension is unavailable, and as the
reference the compiled kernels are tested against.
"""
from __future__ import annotations

import hashlib
import math

import numpy as np

M64 = 0xFFFFFFFFFFFFFFFF

FNV64_OFFSET = 14695981039346656037
FNV64_PRIME = 1099511628211

SC_CONST = 0xDEADBEEFDEADBEEF
_NUM_VARS = 12
_BLOCK = _NUM_VARS * 8
_BUF = 2 * _BLOCK

# float(0xFFFFFFFFFFFFFFFF) rounds to 2**64 in double precision.
HASH_MAX_F = float(M64)
Z_CELLS = 10000


def fnv1a64(data: bytes) -> int:
    h = FNV64_OFFSET
    for byte in data:
        h = ((h ^ byte) * FNV64_PRIME) & M64
    return h


def md5_64(data: bytes) -> int:
    return int.from_bytes(hashlib.md5(data).digest()[:8], "big")


def _rot(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & M64


def _short_mix(h0, h1, h2, h3):
    h2 = _rot(h2, 50); h2 = (h2 + h3) & M64; h0 ^= h2
    h3 = _rot(h3, 52); h3 = (h3 + h0) & M64; h1 ^= h3
    h0 = _rot(h0, 30); h0 = (h0 + h1) & M64; h2 ^= h0
    h1 = _rot(h1, 41); h1 = (h1 + h2) & M64; h3 ^= h1
    h2 = _rot(h2, 54); h2 = (h2 + h3) & M64; h0 ^= h2
    h3 = _rot(h3, 48); h3 = (h3 + h0) & M64; h1 ^= h3
    h0 = _rot(h0, 38); h0 = (h0 + h1) & M64; h2 ^= h0
    h1 = _rot(h1, 37); h1 = (h1 + h2) & M64; h3 ^= h1
    h2 = _rot(h2, 62); h2 = (h2 + h3) & M64; h0 ^= h2
    h3 = _rot(h3, 34); h3 = (h3 + h0) & M64; h1 ^= h3
    h0 = _rot(h0, 5); h0 = (h0 + h1) & M64; h2 ^= h0
    h1 = _rot(h1, 36); h1 = (h1 + h2) & M64; h3 ^= h1
    return h0, h1, h2, h3


def _short_end(h0, h1, h2, h3):
    h3 ^= h2; h2 = _rot(h2, 15); h3 = (h3 + h2) & M64
    h0 ^= h3; h3 = _rot(h3, 52); h0 = (h0 + h3) & M64
    h1 ^= h0; h0 = _rot(h0, 26); h1 = (h1 + h0) & M64
    h2 ^= h1; h1 = _rot(h1, 51); h2 = (h2 + h1) & M64
    h3 ^= h2; h2 = _rot(h2, 28); h3 = (h3 + h2) & M64
    h0 ^= h3; h3 = _rot(h3, 9); h0 = (h0 + h3) & M64
    h1 ^= h0; h0 = _rot(h0, 47); h1 = (h1 + h0) & M64
    h2 ^= h1; h1 = _rot(h1, 54); h2 = (h2 + h1) & M64
    h3 ^= h2; h2 = _rot(h2, 32); h3 = (h3 + h2) & M64
    h0 ^= h3; h3 = _rot(h3, 25); h0 = (h0 + h3) & M64
    h1 ^= h0; h0 = _rot(h0, 63); h1 = (h1 + h0) & M64
    return h0, h1, h2, h3


def _le(data: bytes, start: int, stop: int) -> int:
    return int.from_bytes(data[start:stop], "little")


def _spooky_short(data: bytes, seed1: int, seed2: int) -> tuple[int, int]:
    length = len(data)
    remainder = length % 32
    a, b, c, d = seed1, seed2, SC_CONST, SC_CONST
    pos = 0
    if length > 15:
        for pos in range(0, (length // 32) * 32, 32):
            c = (c + _le(data, pos, pos + 8)) & M64
            d = (d + _le(data, pos + 8, pos + 16)) & M64
            a, b, c, d = _short_mix(a, b, c, d)
            a = (a + _le(data, pos + 16, pos + 24)) & M64
            b = (b + _le(data, pos + 24, pos + 32)) & M64
        pos = (length // 32) * 32
        if remainder >= 16:
            c = (c + _le(data, pos, pos + 8)) & M64
            d = (d + _le(data, pos + 8, pos + 16)) & M64
            a, b, c, d = _short_mix(a, b, c, d)
            pos += 16
            remainder -= 16
    d = (d + (length << 56)) & M64
    if remainder == 0:
        c = (c + SC_CONST) & M64
        d = (d + SC_CONST) & M64
    else:
        # the reference's fall-through switch is a zero-padded little-endian read
        c = (c + _le(data, pos, pos + min(remainder, 8))) & M64
        if remainder > 8:
            d = (d + _le(data, pos + 8, pos + remainder)) & M64
    a, b, c, d = _short_end(a, b, c, d)
    return a, b


_MIX_ROTS = (11, 32, 43, 31, 17, 28, 39, 57, 55, 54, 22, 46)
_END_ROTS = (44, 15, 34, 21, 38, 33, 10, 13, 38, 53, 42, 54)


def _mix(words, h):
    for i in range(12):
        h[i] = (h[i] + words[i]) & M64
        h[(i + 2) % 12] ^= h[(i + 10) % 12]
        h[(i + 11) % 12] ^= h[i]
        h[i] = _rot(h[i], _MIX_ROTS[i])
        h[(i + 11) % 12] = (h[(i + 11) % 12] + h[(i + 1) % 12]) & M64


def _end_partial(h):
    for i in range(12):
        j = (i + 11) % 12
        h[j] = (h[j] + h[(i + 1) % 12]) & M64
        h[(i + 2) % 12] ^= h[j]
        h[(i + 1) % 12] = _rot(h[(i + 1) % 12], _END_ROTS[i])


def _spooky128(data: bytes, seed1: int, seed2: int) -> tuple[int, int]:
    length = len(data)
    if length < _BUF:
        return _spooky_short(data, seed1, seed2)
    h = [seed1, seed2, SC_CONST] * 4
    full = (length // _BLOCK) * _BLOCK
    for pos in range(0, full, _BLOCK):
        words = [_le(data, pos + 8 * i, pos + 8 * i + 8) for i in range(12)]
        _mix(words, h)
    remainder = length - full
    tail = bytearray(data[full:]) + bytearray(_BLOCK - remainder)
    tail[_BLOCK - 1] = remainder
    words = [_le(tail, 8 * i, 8 * i + 8) for i in range(12)]
    for i in range(12):
        h[i] = (h[i] + words[i]) & M64
    for _ in range(3):
        _end_partial(h)
    return h[0], h[1]


def spooky64(data: bytes, seed: int = 0) -> int:
    return _spooky128(data, seed, seed)[0]


def z_from_hash(h: int) -> int:
    z = math.floor(float(h) * 10000.0 / HASH_MAX_F)
    return min(z, Z_CELLS - 1)


_HASHERS = (fnv1a64, md5_64, spooky64)


def new_batch(kind: int, prefix: bytes, users: list[bytes]):
    """Return (H, Z) arrays for the single-hash scheme over ``prefix + user``."""

    if kind not in (0, 1, 2):
        raise ValueError(f"unknown hash kind code {kind}")
    fn = _HASHERS[kind]
    hashes = np.fromiter((fn(prefix + u) for u in users), dtype=np.uint64, count=len(users))
    zs = np.fromiter((z_from_hash(int(h)) for h in hashes.tolist()), dtype=np.int32, count=len(users))
    return hashes, zs


def original_batch(salt: bytes, users: list[bytes]):
    """Return (H^e, H^b) arrays for the two-step FNV scheme."""

    n = len(users)
    he = np.fromiter((fnv1a64(salt + u + b"Exposure") for u in users), dtype=np.uint64, count=n)
    hb = np.fromiter((fnv1a64(salt + u + b"Bucket") for u in users), dtype=np.uint64, count=n)
    return he, hb
