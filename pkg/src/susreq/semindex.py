"""In-process vector index with single-file persistence.

One index instance backs each of the pipeline stores: product-scope chunks,
taxonomy entries, generated context, knowledge catalogs, and related pairs.
Similarity is cosine everywhere. Many readers may query concurrently;
writes are single-writer.
"""

from __future__ import annotations

import hashlib
import json
import struct
import threading
from array import array
from dataclasses import dataclass, field
from pathlib import Path

from susreq import kernels
from susreq.corpus import Chunk
from susreq.embeddings import EmbeddingProvider, EmbeddingVector
from susreq.errors import (
    CorruptIndexFile,
    DimensionMismatch,
    DuplicateRecord,
    IndexClosed,
    ProviderMismatch,
    VersionMismatch,
    ZeroVector,
)

_MAGIC = b"SRIX"
FORMAT_VERSION = 1


def cosine(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Cosine similarity of two vectors, in [-1, 1].

    Exact 1.0 for bitwise-equal vectors (the denominator reduces to the
    numerator), which keeps self-retrieval scores crisp.
    """
    if a.dimension != b.dimension:
        raise DimensionMismatch(f"{a.dimension} != {b.dimension}")
    av, bv = a.as_array(), b.as_array()
    aa = kernels.dot(av, av)
    bb = kernels.dot(bv, bv)
    if aa == 0.0 or bb == 0.0:
        raise ZeroVector("cosine undefined for a zero vector")
    return kernels.cosine_from_dots(kernels.dot(av, bv), aa, bb)


@dataclass(frozen=True)
class IndexRecord:
    record_id: str
    text: str
    vector: EmbeddingVector
    metadata: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class QueryHit:
    record_id: str
    score: float
    record: IndexRecord


class SemanticIndex:
    """Exact-scan cosine index over embedded records."""

    def __init__(
        self,
        embedder: EmbeddingProvider | None = None,
        *,
        provider_id: str | None = None,
        dimension: int | None = None,
    ) -> None:
        if embedder is not None:
            provider_id = embedder.provider_id
            dimension = embedder.dimension
        if provider_id is None or dimension is None:
            raise ValueError("either an embedder or provider_id+dimension is required")
        self.embedder = embedder
        self.provider_id = provider_id
        self.dimension = dimension
        self._records: list[IndexRecord] = []
        self._by_id: dict[str, int] = {}
        self._flat = array("d")
        self._self_dots = array("d")
        self._closed = False
        self._write_lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._records)

    @property
    def closed(self) -> bool:
        return self._closed

    def close(self) -> None:
        self._closed = True

    def _check_open(self) -> None:
        if self._closed:
            raise IndexClosed("index is closed")

    def records(self) -> list[IndexRecord]:
        return list(self._records)

    def get(self, record_id: str) -> IndexRecord:
        try:
            return self._records[self._by_id[record_id]]
        except KeyError:
            raise KeyError(f"no record {record_id!r}") from None

    def __contains__(self, record_id: str) -> bool:
        return record_id in self._by_id

    def add_record(
        self,
        record_id: str,
        text: str,
        metadata: dict[str, str] | None = None,
        vector: EmbeddingVector | None = None,
    ) -> str:
        """Add one record; embeds `text` when no vector is supplied."""
        self._check_open()
        with self._write_lock:
            if record_id in self._by_id:
                raise DuplicateRecord(f"record {record_id!r} already indexed")
            if vector is None:
                if self.embedder is None:
                    raise ValueError("index has no embedder; pass a vector")
                vector = self.embedder.embed(text)
            if vector.dimension != self.dimension:
                raise DimensionMismatch(
                    f"vector dimension {vector.dimension} != index dimension {self.dimension}"
                )
            record = IndexRecord(record_id, text, vector, dict(metadata or {}))
            self._by_id[record_id] = len(self._records)
            self._records.append(record)
            arr = vector.as_array()
            self._flat.extend(arr)
            self._self_dots.append(kernels.dot(arr, arr))
            return record_id

    def add(self, chunk: Chunk) -> str:
        """Index a corpus chunk under its chunk_id."""
        metadata = dict(chunk.metadata)
        metadata["source"] = chunk.source.value
        return self.add_record(chunk.chunk_id, chunk.text, metadata)

    def query_vector(
        self, vector: EmbeddingVector, k: int, min_score: float | None = None
    ) -> list[QueryHit]:
        self._check_open()
        if k < 1:
            raise ValueError("k must be >= 1")
        if vector.dimension != self.dimension:
            raise DimensionMismatch(
                f"query dimension {vector.dimension} != index dimension {self.dimension}"
            )
        n = len(self._records)
        if n == 0:
            return []
        qarr = vector.as_array()
        qself = kernels.dot(qarr, qarr)
        scores = kernels.score_all(qarr, qself, self._flat, n, self.dimension, self._self_dots)
        hits = [
            QueryHit(rec.record_id, scores[i], rec)
            for i, rec in enumerate(self._records)
            if min_score is None or scores[i] >= min_score
        ]
        hits.sort(key=lambda h: (-h.score, h.record_id))
        return hits[:k]

    def query(self, query_text: str, k: int, min_score: float | None = None) -> list[QueryHit]:
        """Top-k records by cosine against the embedded query text.

        Hits come back sorted by descending score, ties broken by ascending
        record_id, and are always a prefix of the full ranking.
        """
        if self.embedder is None:
            raise ValueError("index has no embedder; use query_vector")
        return self.query_vector(self.embedder.embed(query_text), k, min_score)

    # --- persistence -------------------------------------------------

    def _record_blob(self) -> bytes:
        parts = []
        for rec in self._records:
            payload = json.dumps(
                {
                    "record_id": rec.record_id,
                    "text": rec.text,
                    "metadata": rec.metadata,
                    "vector": list(rec.vector.values),
                },
                sort_keys=True,
                separators=(",", ":"),
            ).encode("utf-8")
            parts.append(struct.pack(">I", len(payload)))
            parts.append(payload)
        return b"".join(parts)

    def persist(self, path: str | Path) -> None:
        """Write the index to a single file (header + length-prefixed records)."""
        blob = self._record_blob()
        header = json.dumps(
            {
                "format_version": FORMAT_VERSION,
                "provider_id": self.provider_id,
                "dimension": self.dimension,
                "record_count": len(self._records),
                "checksum": hashlib.sha256(blob).hexdigest(),
            },
            sort_keys=True,
            separators=(",", ":"),
        ).encode("utf-8")
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack(">I", len(header)))
            fh.write(header)
            fh.write(blob)

    @classmethod
    def load(cls, path: str | Path, embedder: EmbeddingProvider | None = None) -> "SemanticIndex":
        """Load a persisted index; record-for-record equal to what was saved."""
        data = Path(path).read_bytes()
        if len(data) < 8 or data[:4] != _MAGIC:
            raise CorruptIndexFile(f"{path}: bad magic")
        (header_len,) = struct.unpack(">I", data[4:8])
        if len(data) < 8 + header_len:
            raise CorruptIndexFile(f"{path}: truncated header")
        try:
            header = json.loads(data[8 : 8 + header_len])
        except ValueError as exc:
            raise CorruptIndexFile(f"{path}: unreadable header: {exc}") from exc
        if header.get("format_version") != FORMAT_VERSION:
            raise VersionMismatch(
                f"{path}: format_version {header.get('format_version')} not supported"
            )
        blob = data[8 + header_len :]
        if hashlib.sha256(blob).hexdigest() != header["checksum"]:
            raise CorruptIndexFile(f"{path}: checksum mismatch")
        if embedder is not None:
            if embedder.dimension != header["dimension"]:
                raise DimensionMismatch(
                    f"{path}: index dimension {header['dimension']} != "
                    f"embedder dimension {embedder.dimension}"
                )
            if embedder.provider_id != header["provider_id"]:
                raise ProviderMismatch(
                    f"{path}: built with provider {header['provider_id']!r}, "
                    f"got {embedder.provider_id!r}"
                )
        index = cls(
            embedder, provider_id=header["provider_id"], dimension=header["dimension"]
        )
        offset = 0
        for _ in range(header["record_count"]):
            if offset + 4 > len(blob):
                raise CorruptIndexFile(f"{path}: truncated records")
            (rec_len,) = struct.unpack(">I", blob[offset : offset + 4])
            offset += 4
            raw = blob[offset : offset + rec_len]
            offset += rec_len
            rec = json.loads(raw)
            index.add_record(
                rec["record_id"],
                rec["text"],
                rec["metadata"],
                EmbeddingVector(tuple(rec["vector"])),
            )
        return index

    def export_json(self, path: str | Path) -> None:
        """Debug export: the full record list as readable JSON."""
        Path(path).write_text(
            json.dumps(
                {
                    "provider_id": self.provider_id,
                    "dimension": self.dimension,
                    "records": [
                        {
                            "record_id": r.record_id,
                            "text": r.text,
                            "metadata": r.metadata,
                            "vector": list(r.vector.values),
                        }
                        for r in self._records
                    ],
                },
                indent=2,
                sort_keys=True,
            ),
            encoding="utf-8",
        )


def index_equal(a: SemanticIndex, b: SemanticIndex) -> bool:
    """Record-for-record equality including vectors and metadata."""
    if (a.provider_id, a.dimension, len(a)) != (b.provider_id, b.dimension, len(b)):
        return False
    return a.records() == b.records()
