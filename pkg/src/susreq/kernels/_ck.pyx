# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled similarity kernels (the hot path).

Keep every loop in the same order as susreq.kernels._py: the two backends
must produce bit-identical floats.
"""

from array import array

from libc.math cimport sqrt

cdef unsigned long long FNV_OFFSET = 0xCBF29CE484222325ULL
cdef unsigned long long FNV_PRIME = 0x100000001B3ULL


def token_buckets(text: str, int dim):
    cdef list buckets = []
    cdef unsigned long long h = FNV_OFFSET
    cdef bint in_token = False
    cdef Py_UCS4 ch
    cdef unsigned char b
    for ch in text.lower():
        if (u"a" <= ch <= u"z") or (u"0" <= ch <= u"9"):
            h = (h ^ <unsigned long long> ch) * FNV_PRIME
            in_token = True
        elif in_token:
            buckets.append(h % <unsigned long long> dim)
            h = FNV_OFFSET
            in_token = False
    if in_token:
        buckets.append(h % <unsigned long long> dim)
    if not buckets:
        stripped = text.strip().lower()
        if stripped:
            h = FNV_OFFSET
            for b in stripped.encode("utf-8"):
                h = (h ^ <unsigned long long> b) * FNV_PRIME
            buckets.append(h % <unsigned long long> dim)
    return buckets


def hash_embed(text: str, int dim):
    vec = array("d", bytes(8 * dim))
    cdef double[::1] v = vec
    cdef Py_ssize_t bucket
    for bucket in token_buckets(text, dim):
        v[bucket] += 1.0
    cdef double s = 0.0
    cdef Py_ssize_t i
    for i in range(dim):
        s += v[i] * v[i]
    cdef double norm = sqrt(s)
    if norm > 0.0:
        for i in range(dim):
            v[i] = v[i] / norm
    return vec


def dot(a, b) -> float:
    cdef double[::1] av = a if isinstance(a, array) else array("d", a)
    cdef double[::1] bv = b if isinstance(b, array) else array("d", b)
    cdef double s = 0.0
    cdef Py_ssize_t i
    for i in range(av.shape[0]):
        s += av[i] * bv[i]
    return s


cdef inline double _cosine_from_dots(double ab, double aa, double bb) nogil:
    cdef double denom = sqrt(aa * bb)
    cdef double c
    if denom == 0.0:
        return 0.0
    c = ab / denom
    if c > 1.0:
        return 1.0
    if c < -1.0:
        return -1.0
    return c


def cosine_from_dots(double ab, double aa, double bb) -> float:
    return _cosine_from_dots(ab, aa, bb)


def score_all(query, double query_self, flat, Py_ssize_t n, Py_ssize_t dim, self_dots):
    out = array("d", bytes(8 * n))
    cdef double[::1] q = query if isinstance(query, array) else array("d", query)
    cdef double[::1] m = flat
    cdef double[::1] sd = self_dots
    cdef double[::1] o = out
    cdef Py_ssize_t r, i, base
    cdef double s
    with nogil:
        for r in range(n):
            base = r * dim
            s = 0.0
            for i in range(dim):
                s += m[base + i] * q[i]
            o[r] = _cosine_from_dots(s, query_self, sd[r])
    return out
