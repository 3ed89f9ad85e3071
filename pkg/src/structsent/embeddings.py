"""Sentence embedding providers behind one small interface.

The offline provider is a deterministic hashed term-frequency encoder
(fixed dimension 512) so that cosine scoring works with no model and no
network; it is the test and default provider. The remote provider calls
an embedding HTTP endpoint (POST {"texts": [...]} returning
{"vectors": [[...]]}) and is how a real sentence-transformer model is
reached when one is served.
"""

from __future__ import annotations

import hashlib
import unicodedata
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .providers import PostFn, ProviderUnavailableError, requests_post, resolve_credential

OFFLINE_DIM = 512


@dataclass(eq=False)
class EmbeddingVector:
    values: np.ndarray
    provider_id: str


def _tf_tokens(text: str) -> list[str]:
    return unicodedata.normalize("NFC", text).lower().split()


def _bucket(token: str, dim: int) -> int:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") % dim


class OfflineHashEmbedder:
    """Hashed term-frequency vectors; deterministic across runs and hosts."""

    def __init__(self, dim: int = OFFLINE_DIM):
        self.dim = dim
        self.provider_id = f"offline-hash-{dim}"

    def embed(self, text: str) -> EmbeddingVector:
        values = np.zeros(self.dim, dtype=float)
        for token in _tf_tokens(text):
            values[_bucket(token, self.dim)] += 1.0
        return EmbeddingVector(values=values, provider_id=self.provider_id)

    def embed_batch(self, texts: list[str]) -> list[EmbeddingVector]:
        return [self.embed(t) for t in texts]


class RemoteEmbedder:
    """Client for a remote embedding endpoint; no silent fallback.

    Requests are batched (``batch_size`` texts per POST) with at most
    ``max_concurrency`` requests in flight and a per-request timeout.
    """

    def __init__(
        self,
        endpoint: str,
        credential_env: str | None = None,
        timeout_s: float = 60.0,
        max_concurrency: int = 4,
        batch_size: int = 32,
        post_fn: PostFn = requests_post,
    ):
        self.endpoint = endpoint
        self.credential_env = credential_env
        self.timeout_s = timeout_s
        self.max_concurrency = max_concurrency
        self.batch_size = batch_size
        self.post_fn = post_fn
        self.provider_id = f"remote:{endpoint}"
        self._dim: int | None = None

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        credential = resolve_credential(self.credential_env)
        if credential:
            headers["Authorization"] = f"Bearer {credential}"
        return headers

    def _post_chunk(self, texts: list[str]) -> list[np.ndarray]:
        status, body = self.post_fn(self.endpoint, {"texts": texts}, self._headers(), self.timeout_s)
        if status != 200:
            raise ProviderUnavailableError(f"embedding endpoint returned HTTP {status}")
        if not isinstance(body, dict) or "vectors" not in body:
            raise ProviderUnavailableError("embedding endpoint response missing 'vectors'")
        vectors = body["vectors"]
        if len(vectors) != len(texts):
            raise ProviderUnavailableError(
                f"embedding endpoint returned {len(vectors)} vectors for {len(texts)} texts"
            )
        arrays = [np.asarray(v, dtype=float) for v in vectors]
        for arr in arrays:
            if self._dim is None:
                self._dim = arr.shape[0]
            elif arr.shape[0] != self._dim:
                raise ProviderUnavailableError(
                    f"embedding dimension changed from {self._dim} to {arr.shape[0]}"
                )
        return arrays

    def embed_batch(self, texts: list[str]) -> list[EmbeddingVector]:
        chunks = [texts[i : i + self.batch_size] for i in range(0, len(texts), self.batch_size)]
        with ThreadPoolExecutor(max_workers=self.max_concurrency) as pool:
            results = list(pool.map(self._post_chunk, chunks))
        return [
            EmbeddingVector(values=arr, provider_id=self.provider_id)
            for chunk in results
            for arr in chunk
        ]

    def embed(self, text: str) -> EmbeddingVector:
        return self.embed_batch([text])[0]
