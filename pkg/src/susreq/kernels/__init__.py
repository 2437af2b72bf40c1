"""Similarity kernels: compiled core with a pure-Python fallback.

The compiled backend (susreq.kernels._ck, built from _ck.pyx) is selected
at import when available; set SUSREQ_PURE_KERNELS=1 to force the fallback.
Both backends run the same operations in the same order and produce
bit-identical floats, so artifacts do not depend on which one is active.
"""

from __future__ import annotations

import os

if os.environ.get("SUSREQ_PURE_KERNELS") == "1":
    from susreq.kernels import _py as _impl

    BACKEND = "pure"
else:
    try:
        from susreq.kernels import _ck as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        from susreq.kernels import _py as _impl  # type: ignore[no-redef]

        BACKEND = "pure"

token_buckets = _impl.token_buckets
hash_embed = _impl.hash_embed
dot = _impl.dot
cosine_from_dots = _impl.cosine_from_dots
score_all = _impl.score_all

__all__ = [
    "BACKEND",
    "token_buckets",
    "hash_embed",
    "dot",
    "cosine_from_dots",
    "score_all",
]
