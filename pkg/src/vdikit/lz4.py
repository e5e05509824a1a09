"""LZ4 block-format codec (lossless byte-oriented LZ77 with 64 KiB window).

Standard block layout: each sequence is a token byte (literal-length nibble,
match-length nibble), optional length extension bytes (255-run encoding),
the literals, a 2-byte little-endian match offset, and optional match-length
extensions. Matches are at least 4 bytes; the final sequence is literals only.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_HASH_LOG = 16
_MIN_MATCH = 4
# spec-mandated tail: last 5 bytes are literals, no match closer than 12 to the end
_LAST_LITERALS = 5
_MFLIMIT = 12


class DecompressFailure(ValueError):
    pass


def max_compressed_len(n: int) -> int:
    return n + n // 255 + 16


@njit(cache=True)
def _hash32(v):
    return ((v * np.uint32(2654435761)) >> np.uint32(32 - _HASH_LOG)) & np.uint32(
        (1 << _HASH_LOG) - 1)


@njit(cache=True)
def _read32(src, i):
    return (np.uint32(src[i]) | (np.uint32(src[i + 1]) << np.uint32(8))
            | (np.uint32(src[i + 2]) << np.uint32(16))
            | (np.uint32(src[i + 3]) << np.uint32(24)))


@njit(cache=True)
def _write_length(dst, do, length):
    while length >= 255:
        dst[do] = 255
        do += 1
        length -= 255
    dst[do] = length
    return do + 1


@njit(cache=True)
def _compress_kernel(src, dst):
    n = src.shape[0]
    do = 0
    if n == 0:
        return 0
    table = np.zeros(1 << _HASH_LOG, dtype=np.int64) - 1
    anchor = 0
    i = 0
    limit = n - _MFLIMIT
    while i < limit:
        h = _hash32(_read32(src, i))
        cand = table[h]
        table[h] = i
        if (cand >= 0 and i - cand <= 65535
                and _read32(src, cand) == _read32(src, i)):
            # extend the match forward
            mlen = _MIN_MATCH
            mmax = n - _LAST_LITERALS - i
            while mlen < mmax and src[cand + mlen] == src[i + mlen]:
                mlen += 1
            lit = i - anchor
            # token
            tok_pos = do
            do += 1
            lcode = 15 if lit >= 15 else lit
            if lit >= 15:
                do = _write_length(dst, do, lit - 15)
            for k in range(lit):
                dst[do] = src[anchor + k]
                do += 1
            off = i - cand
            dst[do] = off & 0xFF
            dst[do + 1] = (off >> 8) & 0xFF
            do += 2
            mcode = mlen - _MIN_MATCH
            if mcode >= 15:
                dst[tok_pos] = (lcode << 4) | 15
                do = _write_length(dst, do, mcode - 15)
            else:
                dst[tok_pos] = (lcode << 4) | mcode
            i += mlen
            anchor = i
            if i < limit:
                table[_hash32(_read32(src, i - 2))] = i - 2
        else:
            i += 1
    # final literal run
    lit = n - anchor
    tok_pos = do
    do += 1
    if lit >= 15:
        dst[tok_pos] = 15 << 4
        do = _write_length(dst, do, lit - 15)
    else:
        dst[tok_pos] = lit << 4
    for k in range(lit):
        dst[do] = src[anchor + k]
        do += 1
    return do


@njit(cache=True)
def _decompress_kernel(src, dst):
    """Returns bytes written, or -1 on malformed input."""
    n = src.shape[0]
    out_n = dst.shape[0]
    si = 0
    di = 0
    while si < n:
        token = src[si]
        si += 1
        lit = token >> 4
        if lit == 15:
            while True:
                if si >= n:
                    return -1
                b = src[si]
                si += 1
                lit += b
                if b != 255:
                    break
        if si + lit > n or di + lit > out_n:
            return -1
        for k in range(lit):
            dst[di + k] = src[si + k]
        si += lit
        di += lit
        if si >= n:
            break  # last sequence has no match part
        if si + 2 > n:
            return -1
        off = np.int64(src[si]) | (np.int64(src[si + 1]) << 8)
        si += 2
        if off == 0 or off > di:
            return -1
        mlen = token & 15
        if mlen == 15:
            while True:
                if si >= n:
                    return -1
                b = src[si]
                si += 1
                mlen += b
                if b != 255:
                    break
        mlen += _MIN_MATCH
        if di + mlen > out_n:
            return -1
        mp = di - off
        for k in range(mlen):
            dst[di + k] = dst[mp + k]
        di += mlen
    return di


def compress(data: bytes) -> bytes:
    src = np.frombuffer(data, dtype=np.uint8)
    dst = np.empty(max_compressed_len(len(data)), dtype=np.uint8)
    n = _compress_kernel(src, dst)
    return dst[:n].tobytes()


def decompress(data: bytes, uncompressed_len: int) -> bytes:
    if uncompressed_len == 0:
        if len(data) != 0 and data != b"\x00":
            raise DecompressFailure("nonempty block for empty payload")
        return b""
    src = np.frombuffer(data, dtype=np.uint8)
    dst = np.empty(uncompressed_len, dtype=np.uint8)
    n = _decompress_kernel(src, dst)
    if n != uncompressed_len:
        raise DecompressFailure(
            f"decoded {n} bytes, expected {uncompressed_len}")
    return dst.tobytes()
