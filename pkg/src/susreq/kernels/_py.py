"""Pure-Python fallback for the similarity kernels.

Mirrors susreq.kernels._ck operation for operation, in the same summation
order, so both backends produce bit-identical floats.
"""

from __future__ import annotations

import math
from array import array

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def token_buckets(text: str, dim: int) -> list[int]:
    """Hash every token of `text` to a bucket in [0, dim).

    Tokens are maximal runs of ASCII [a-z0-9] after lowercasing; when the
    text contains no such run, the whole stripped text counts as one token
    so non-empty input never embeds to a zero vector.
    """
    buckets: list[int] = []
    h = FNV_OFFSET
    in_token = False
    for ch in text.lower():
        if ("a" <= ch <= "z") or ("0" <= ch <= "9"):
            h = ((h ^ ord(ch)) * FNV_PRIME) & _MASK64
            in_token = True
        elif in_token:
            buckets.append(h % dim)
            h = FNV_OFFSET
            in_token = False
    if in_token:
        buckets.append(h % dim)
    if not buckets:
        stripped = text.strip().lower()
        if stripped:
            h = FNV_OFFSET
            for b in stripped.encode("utf-8"):
                h = ((h ^ b) * FNV_PRIME) & _MASK64
            buckets.append(h % dim)
    return buckets


def hash_embed(text: str, dim: int) -> array:
    """Token-hash bag-of-words embedding, L2-normalized."""
    vec = array("d", bytes(8 * dim))
    for bucket in token_buckets(text, dim):
        vec[bucket] += 1.0
    norm = math.sqrt(dot(vec, vec))
    if norm > 0.0:
        for i in range(dim):
            vec[i] = vec[i] / norm
    return vec


def dot(a, b) -> float:
    s = 0.0
    for i in range(len(a)):
        s += a[i] * b[i]
    return s


def cosine_from_dots(ab: float, aa: float, bb: float) -> float:
    """Cosine from precomputed dot products, clamped to [-1, 1].

    For bitwise-equal vectors ab == aa == bb, and sqrt(s * s) == s exactly
    under IEEE-754, so self-similarity is exactly 1.0.
    """
    denom = math.sqrt(aa * bb)
    if denom == 0.0:
        return 0.0
    c = ab / denom
    if c > 1.0:
        return 1.0
    if c < -1.0:
        return -1.0
    return c


def score_all(query, query_self: float, flat, n: int, dim: int, self_dots) -> array:
    """Cosine of `query` against each of the `n` rows of the flat matrix."""
    out = array("d", bytes(8 * n))
    for r in range(n):
        base = r * dim
        s = 0.0
        for i in range(dim):
            s += flat[base + i] * query[i]
        out[r] = cosine_from_dots(s, query_self, self_dots[r])
    return out
