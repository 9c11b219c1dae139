# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hash and assignment kernels.

Mirrors ``bucketeer._purepy`` bit for bit. Floating-point steps must not be
built with -ffast-math or the Z mapping can drift from the fallback.
"""
import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint8_t, uint32_t, uint64_t
from libc.stdlib cimport free, malloc
from libc.string cimport memcpy, memset
from libc.math cimport floor

cnp.import_array()

cdef uint64_t FNV64_OFFSET = 14695981039346656037ULL
cdef uint64_t FNV64_PRIME = 1099511628211ULL
cdef uint64_t SC_CONST = 0xDEADBEEFDEADBEEFULL
cdef double HASH_MAX_F = <double>0xFFFFFFFFFFFFFFFFULL

DEF BLOCK = 96
DEF BUF = 192

cdef enum:
    KIND_FNV = 0
    KIND_MD5 = 1
    KIND_SPOOKY = 2


cdef inline uint64_t _fnv_update(uint64_t h, const uint8_t* p, Py_ssize_t n) nogil:
    cdef Py_ssize_t i
    for i in range(n):
        h = (h ^ p[i]) * FNV64_PRIME
    return h


cdef inline uint64_t _rot(uint64_t x, int k) nogil:
    return (x << k) | (x >> (64 - k))


cdef inline uint64_t _load64(const uint8_t* p) nogil:
    cdef uint64_t v
    memcpy(&v, p, 8)
    return v


cdef inline uint64_t _load_partial(const uint8_t* p, Py_ssize_t n) nogil:
    # little-endian, zero-padded
    cdef uint64_t v = 0
    cdef Py_ssize_t i
    for i in range(n):
        v |= (<uint64_t>p[i]) << (8 * i)
    return v


cdef inline void _short_mix(uint64_t* h0, uint64_t* h1, uint64_t* h2, uint64_t* h3) nogil:
    h2[0] = _rot(h2[0], 50); h2[0] += h3[0]; h0[0] ^= h2[0]
    h3[0] = _rot(h3[0], 52); h3[0] += h0[0]; h1[0] ^= h3[0]
    h0[0] = _rot(h0[0], 30); h0[0] += h1[0]; h2[0] ^= h0[0]
    h1[0] = _rot(h1[0], 41); h1[0] += h2[0]; h3[0] ^= h1[0]
    h2[0] = _rot(h2[0], 54); h2[0] += h3[0]; h0[0] ^= h2[0]
    h3[0] = _rot(h3[0], 48); h3[0] += h0[0]; h1[0] ^= h3[0]
    h0[0] = _rot(h0[0], 38); h0[0] += h1[0]; h2[0] ^= h0[0]
    h1[0] = _rot(h1[0], 37); h1[0] += h2[0]; h3[0] ^= h1[0]
    h2[0] = _rot(h2[0], 62); h2[0] += h3[0]; h0[0] ^= h2[0]
    h3[0] = _rot(h3[0], 34); h3[0] += h0[0]; h1[0] ^= h3[0]
    h0[0] = _rot(h0[0], 5); h0[0] += h1[0]; h2[0] ^= h0[0]
    h1[0] = _rot(h1[0], 36); h1[0] += h2[0]; h3[0] ^= h1[0]


cdef inline void _short_end(uint64_t* h0, uint64_t* h1, uint64_t* h2, uint64_t* h3) nogil:
    h3[0] ^= h2[0]; h2[0] = _rot(h2[0], 15); h3[0] += h2[0]
    h0[0] ^= h3[0]; h3[0] = _rot(h3[0], 52); h0[0] += h3[0]
    h1[0] ^= h0[0]; h0[0] = _rot(h0[0], 26); h1[0] += h0[0]
    h2[0] ^= h1[0]; h1[0] = _rot(h1[0], 51); h2[0] += h1[0]
    h3[0] ^= h2[0]; h2[0] = _rot(h2[0], 28); h3[0] += h2[0]
    h0[0] ^= h3[0]; h3[0] = _rot(h3[0], 9); h0[0] += h3[0]
    h1[0] ^= h0[0]; h0[0] = _rot(h0[0], 47); h1[0] += h0[0]
    h2[0] ^= h1[0]; h1[0] = _rot(h1[0], 54); h2[0] += h1[0]
    h3[0] ^= h2[0]; h2[0] = _rot(h2[0], 32); h3[0] += h2[0]
    h0[0] ^= h3[0]; h3[0] = _rot(h3[0], 25); h0[0] += h3[0]
    h1[0] ^= h0[0]; h0[0] = _rot(h0[0], 63); h1[0] += h0[0]


cdef uint64_t _spooky_short(const uint8_t* p, Py_ssize_t length, uint64_t seed) nogil:
    cdef uint64_t a = seed, b = seed, c = SC_CONST, d = SC_CONST
    cdef Py_ssize_t remainder = length % 32
    cdef Py_ssize_t pos = 0
    cdef Py_ssize_t full = (length // 32) * 32
    if length > 15:
        while pos < full:
            c += _load64(p + pos)
            d += _load64(p + pos + 8)
            _short_mix(&a, &b, &c, &d)
            a += _load64(p + pos + 16)
            b += _load64(p + pos + 24)
            pos += 32
        if remainder >= 16:
            c += _load64(p + pos)
            d += _load64(p + pos + 8)
            _short_mix(&a, &b, &c, &d)
            pos += 16
            remainder -= 16
    d += (<uint64_t>length) << 56
    if remainder == 0:
        c += SC_CONST
        d += SC_CONST
    elif remainder <= 8:
        c += _load_partial(p + pos, remainder)
    else:
        c += _load64(p + pos)
        d += _load_partial(p + pos + 8, remainder - 8)
    _short_end(&a, &b, &c, &d)
    return a


cdef inline void _mix(const uint8_t* p, uint64_t* s) nogil:
    s[0] += _load64(p); s[2] ^= s[10]; s[11] ^= s[0]; s[0] = _rot(s[0], 11); s[11] += s[1]
    s[1] += _load64(p + 8); s[3] ^= s[11]; s[0] ^= s[1]; s[1] = _rot(s[1], 32); s[0] += s[2]
    s[2] += _load64(p + 16); s[4] ^= s[0]; s[1] ^= s[2]; s[2] = _rot(s[2], 43); s[1] += s[3]
    s[3] += _load64(p + 24); s[5] ^= s[1]; s[2] ^= s[3]; s[3] = _rot(s[3], 31); s[2] += s[4]
    s[4] += _load64(p + 32); s[6] ^= s[2]; s[3] ^= s[4]; s[4] = _rot(s[4], 17); s[3] += s[5]
    s[5] += _load64(p + 40); s[7] ^= s[3]; s[4] ^= s[5]; s[5] = _rot(s[5], 28); s[4] += s[6]
    s[6] += _load64(p + 48); s[8] ^= s[4]; s[5] ^= s[6]; s[6] = _rot(s[6], 39); s[5] += s[7]
    s[7] += _load64(p + 56); s[9] ^= s[5]; s[6] ^= s[7]; s[7] = _rot(s[7], 57); s[6] += s[8]
    s[8] += _load64(p + 64); s[10] ^= s[6]; s[7] ^= s[8]; s[8] = _rot(s[8], 55); s[7] += s[9]
    s[9] += _load64(p + 72); s[11] ^= s[7]; s[8] ^= s[9]; s[9] = _rot(s[9], 54); s[8] += s[10]
    s[10] += _load64(p + 80); s[0] ^= s[8]; s[9] ^= s[10]; s[10] = _rot(s[10], 22); s[9] += s[11]
    s[11] += _load64(p + 88); s[1] ^= s[9]; s[10] ^= s[11]; s[11] = _rot(s[11], 46); s[10] += s[0]


cdef inline void _end_partial(uint64_t* h) nogil:
    h[11] += h[1]; h[2] ^= h[11]; h[1] = _rot(h[1], 44)
    h[0] += h[2]; h[3] ^= h[0]; h[2] = _rot(h[2], 15)
    h[1] += h[3]; h[4] ^= h[1]; h[3] = _rot(h[3], 34)
    h[2] += h[4]; h[5] ^= h[2]; h[4] = _rot(h[4], 21)
    h[3] += h[5]; h[6] ^= h[3]; h[5] = _rot(h[5], 38)
    h[4] += h[6]; h[7] ^= h[4]; h[6] = _rot(h[6], 33)
    h[5] += h[7]; h[8] ^= h[5]; h[7] = _rot(h[7], 10)
    h[6] += h[8]; h[9] ^= h[6]; h[8] = _rot(h[8], 13)
    h[7] += h[9]; h[10] ^= h[7]; h[9] = _rot(h[9], 38)
    h[8] += h[10]; h[11] ^= h[8]; h[10] = _rot(h[10], 53)
    h[9] += h[11]; h[0] ^= h[9]; h[11] = _rot(h[11], 42)
    h[10] += h[0]; h[1] ^= h[10]; h[0] = _rot(h[0], 54)


cdef uint64_t _spooky64(const uint8_t* p, Py_ssize_t length, uint64_t seed) nogil:
    cdef uint64_t h[12]
    cdef uint8_t tail[BLOCK]
    cdef Py_ssize_t i, full, remainder
    if length < BUF:
        return _spooky_short(p, length, seed)
    for i in range(0, 12, 3):
        h[i] = seed
        h[i + 1] = seed
        h[i + 2] = SC_CONST
    full = (length // BLOCK) * BLOCK
    i = 0
    while i < full:
        _mix(p + i, h)
        i += BLOCK
    remainder = length - full
    memcpy(tail, p + full, remainder)
    memset(tail + remainder, 0, BLOCK - remainder)
    tail[BLOCK - 1] = <uint8_t>remainder
    for i in range(12):
        h[i] += _load64(tail + 8 * i)
    _end_partial(h)
    _end_partial(h)
    _end_partial(h)
    return h[0]


cdef uint32_t _MD5_K[64]
cdef int _MD5_S[64]
for _i in range(64):
    _MD5_K[_i] = <uint32_t>int(abs(__import__("math").sin(_i + 1)) * 4294967296.0)
    _MD5_S[_i] = (7, 12, 17, 22, 5, 9, 14, 20, 4, 11, 16, 23, 6, 10, 15, 21)[(_i // 16) * 4 + _i % 4]


cdef inline uint32_t _rotl32(uint32_t x, int k) nogil:
    return (x << k) | (x >> (32 - k))


cdef inline uint32_t _load32(const uint8_t* p) nogil:
    return (<uint32_t>p[0]) | (<uint32_t>p[1] << 8) | (<uint32_t>p[2] << 16) | (<uint32_t>p[3] << 24)


cdef inline uint32_t _bswap32(uint32_t x) nogil:
    return ((x & 0xFF) << 24) | ((x & 0xFF00) << 8) | ((x >> 8) & 0xFF00) | (x >> 24)


cdef void _md5_block(uint32_t* state, const uint8_t* block) nogil:
    cdef uint32_t m[16]
    cdef uint32_t a = state[0], b = state[1], c = state[2], d = state[3], f, tmp
    cdef int i, g
    for i in range(16):
        m[i] = _load32(block + 4 * i)
    for i in range(64):
        if i < 16:
            f = (b & c) | (~b & d)
            g = i
        elif i < 32:
            f = (d & b) | (~d & c)
            g = (5 * i + 1) % 16
        elif i < 48:
            f = b ^ c ^ d
            g = (3 * i + 5) % 16
        else:
            f = c ^ (b | ~d)
            g = (7 * i) % 16
        f = f + a + _MD5_K[i] + m[g]
        a = d
        d = c
        c = b
        b = b + _rotl32(f, _MD5_S[i])
    state[0] += a
    state[1] += b
    state[2] += c
    state[3] += d


cdef uint64_t _md5_64(const uint8_t* p, Py_ssize_t length) nogil:
    cdef uint32_t state[4]
    cdef uint8_t tail[128]
    cdef Py_ssize_t full = (length // 64) * 64, rem = length - full, pos = 0, padded, i
    cdef uint64_t bits = (<uint64_t>length) * 8
    state[0] = 0x67452301
    state[1] = 0xEFCDAB89
    state[2] = 0x98BADCFE
    state[3] = 0x10325476
    while pos < full:
        _md5_block(state, p + pos)
        pos += 64
    memcpy(tail, p + full, rem)
    tail[rem] = 0x80
    padded = 64 if rem < 56 else 128
    memset(tail + rem + 1, 0, padded - rem - 1)
    for i in range(8):
        tail[padded - 8 + i] = <uint8_t>(bits >> (8 * i))
    _md5_block(state, tail)
    if padded == 128:
        _md5_block(state, tail + 64)
    # digest bytes 0..7 are state[0], state[1] little-endian; read them big-endian
    return ((<uint64_t>_bswap32(state[0])) << 32) | _bswap32(state[1])


cdef inline int _z_from_hash(uint64_t h) nogil:
    cdef double z = floor(<double>h * 10000.0 / HASH_MAX_F)
    if z > 9999.0:
        return 9999
    return <int>z


def fnv1a64(const uint8_t[::1] data):
    return _fnv_update(FNV64_OFFSET, &data[0] if data.shape[0] else NULL, data.shape[0])


def md5_64(const uint8_t[::1] data):
    return _md5_64(&data[0] if data.shape[0] else NULL, data.shape[0])


def spooky64(const uint8_t[::1] data, uint64_t seed=0):
    return _spooky64(&data[0] if data.shape[0] else NULL, data.shape[0], seed)


def z_from_hash(uint64_t h):
    return _z_from_hash(h)


cdef inline uint8_t* _join(uint8_t* stack, const uint8_t* a, Py_ssize_t na,
                           const uint8_t* b, Py_ssize_t nb,
                           const uint8_t* c, Py_ssize_t nc) except NULL:
    cdef uint8_t* out = stack
    if na + nb + nc > BUF:
        out = <uint8_t*>malloc(na + nb + nc)
        if out == NULL:
            raise MemoryError()
    memcpy(out, a, na)
    memcpy(out + na, b, nb)
    memcpy(out + na + nb, c, nc)
    return out


def new_batch(int kind, bytes prefix, list users):
    """Return (H, Z) arrays for the single-hash scheme over ``prefix + user``."""
    cdef Py_ssize_t n = len(users), i, nu, total
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] hashes = np.empty(n, dtype=np.uint64)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] zs = np.empty(n, dtype=np.int32)
    cdef const uint8_t* pp = <const uint8_t*>(<char*>prefix)
    cdef Py_ssize_t np_ = len(prefix)
    cdef uint64_t h
    cdef bytes user
    cdef uint8_t stack[BUF]
    cdef uint8_t* s
    if kind != KIND_FNV and kind != KIND_SPOOKY and kind != KIND_MD5:
        raise ValueError(f"unknown hash kind code {kind}")
    for i in range(n):
        user = <bytes>users[i]
        nu = len(user)
        total = np_ + nu
        s = _join(stack, pp, np_, <const uint8_t*>(<char*>user), nu, NULL, 0)
        if kind == KIND_FNV:
            h = _fnv_update(FNV64_OFFSET, s, total)
        elif kind == KIND_SPOOKY:
            h = _spooky64(s, total, 0)
        else:
            h = _md5_64(s, total)
        if s != stack:
            free(s)
        hashes[i] = h
        zs[i] = _z_from_hash(h)
    return hashes, zs


def original_batch(bytes salt, list users):
    """Return (H^e, H^b) arrays for the two-step FNV scheme."""
    cdef Py_ssize_t n = len(users), i, nu
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] he = np.empty(n, dtype=np.uint64)
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] hb = np.empty(n, dtype=np.uint64)
    cdef const uint8_t* sp = <const uint8_t*>(<char*>salt)
    cdef Py_ssize_t ns = len(salt)
    cdef bytes user
    cdef const uint8_t* up
    cdef uint8_t stack[BUF]
    cdef uint8_t* s
    for i in range(n):
        user = <bytes>users[i]
        up = <const uint8_t*>(<char*>user)
        nu = len(user)
        s = _join(stack, sp, ns, up, nu, <const uint8_t*>b"Exposure", 8)
        he[i] = _fnv_update(FNV64_OFFSET, s, ns + nu + 8)
        if s != stack:
            free(s)
        s = _join(stack, sp, ns, up, nu, <const uint8_t*>b"Bucket", 6)
        hb[i] = _fnv_update(FNV64_OFFSET, s, ns + nu + 6)
        if s != stack:
            free(s)
    return he, hb
