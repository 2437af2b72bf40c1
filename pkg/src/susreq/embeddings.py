"""Embedding providers.

Two interchangeable providers sit behind one contract: the deterministic
hash embedder used by all fixture-driven tests, and an HTTP client for any
hosted embeddings API. A provider is identified by ``provider_id`` which is
recorded in every index file and artifact, so a provider swap is always
detectable.
"""

from __future__ import annotations

import math
import os
import time
from array import array
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Protocol, Sequence, runtime_checkable

import httpx

from susreq import kernels
from susreq.errors import DimensionMismatch, EmptyText, ProviderUnavailable


@dataclass(frozen=True)
class EmbeddingVector:
    """A fixed-length embedding; values are always finite."""

    values: tuple[float, ...]

    def __post_init__(self) -> None:
        for v in self.values:
            if not math.isfinite(v):
                raise ValueError("embedding values must be finite")

    @property
    def dimension(self) -> int:
        return len(self.values)

    def as_array(self) -> array:
        return array("d", self.values)


@runtime_checkable
class EmbeddingProvider(Protocol):
    provider_id: str
    dimension: int

    def embed(self, text: str) -> EmbeddingVector: ...

    def embed_many(self, texts: Sequence[str]) -> list[EmbeddingVector]: ...


def _require_text(text: str) -> None:
    if not text or not text.strip():
        raise EmptyText("cannot embed an empty string")


class HashEmbedder:
    """Deterministic token-hash bag-of-words embedder.

    Tokens (lowercased ASCII alphanumeric runs) are hashed into ``dimension``
    buckets and the count vector is L2-normalized. Deterministic across
    processes and platforms; used as the reference provider by the test
    fixtures and as an offline default.
    """

    def __init__(self, dimension: int = 64) -> None:
        if dimension < 1:
            raise ValueError("dimension must be >= 1")
        self.dimension = dimension
        self.provider_id = f"hash-bag/{dimension}"

    def embed(self, text: str) -> EmbeddingVector:
        _require_text(text)
        return EmbeddingVector(tuple(kernels.hash_embed(text, self.dimension)))

    def embed_many(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        return [self.embed(t) for t in texts]


class HTTPEmbedder:
    """Client for a remote embeddings endpoint.

    POSTs ``{"model": ..., "input": [texts]}`` and expects
    ``{"vectors": [[...], ...]}`` back. Transport failures are retried a
    bounded number of times before ProviderUnavailable; batches may be
    issued concurrently but results are reassembled in input order.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        dimension: int,
        *,
        api_key_env: str = "SUSREQ_EMBED_API_KEY",
        timeout: float = 30.0,
        max_retries: int = 3,
        batch_size: int = 64,
        max_concurrency: int = 4,
    ) -> None:
        self.endpoint = endpoint
        self.model = model
        self.dimension = dimension
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.max_retries = max_retries
        self.batch_size = batch_size
        self.max_concurrency = max_concurrency
        self.provider_id = f"http/{model}/{dimension}"

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _post_batch(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        last_error: Exception | None = None
        for attempt in range(self.max_retries):
            try:
                response = httpx.post(
                    self.endpoint,
                    json={"model": self.model, "input": list(texts)},
                    headers=self._headers(),
                    timeout=self.timeout,
                )
                response.raise_for_status()
                vectors = response.json()["vectors"]
            except (httpx.HTTPError, KeyError, ValueError) as exc:
                last_error = exc
                time.sleep(0.2 * (attempt + 1))
                continue
            if len(vectors) != len(texts):
                raise ProviderUnavailable(
                    f"provider returned {len(vectors)} vectors for {len(texts)} inputs"
                )
            out = []
            for vec in vectors:
                if len(vec) != self.dimension:
                    raise DimensionMismatch(
                        f"provider returned dimension {len(vec)}, expected {self.dimension}"
                    )
                out.append(EmbeddingVector(tuple(float(v) for v in vec)))
            return out
        raise ProviderUnavailable(
            f"embedding endpoint {self.endpoint} unreachable after "
            f"{self.max_retries} attempts: {last_error}"
        )

    def embed(self, text: str) -> EmbeddingVector:
        _require_text(text)
        return self._post_batch([text])[0]

    def embed_many(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        for t in texts:
            _require_text(t)
        batches = [
            texts[i : i + self.batch_size] for i in range(0, len(texts), self.batch_size)
        ]
        if len(batches) <= 1:
            return self._post_batch(texts) if texts else []
        with ThreadPoolExecutor(max_workers=self.max_concurrency) as pool:
            results = list(pool.map(self._post_batch, batches))
        return [vec for batch in results for vec in batch]
