"""Embedding providers and cosine similarity.

Vectors are 1-D ``float64`` numpy arrays. Two providers ship:

* :class:`HashingEmbedder` -- deterministic bag-of-tokens hashing, no model needed.
* :class:`RemoteEmbedder` -- OpenAI-compatible ``POST {base_url}/embeddings``.
"""

from __future__ import annotations

import hashlib
import math
import os
import re
from concurrent.futures import ThreadPoolExecutor
from typing import Protocol, Sequence, runtime_checkable

import httpx
import numpy as np

from ._http import post_json
from .errors import DimensionMismatch, EmptyText, ProviderFailure, ZeroVector

HASH_SEED = b"reflectmem-hash-v1"
DEFAULT_DIM = 256
EMBED_API_KEY_ENV = "REFLECTMEM_EMBED_API_KEY"

_TOKEN_RE = re.compile(r"[^\W_]+")


@runtime_checkable
class EmbeddingProvider(Protocol):
    name: str
    dim: int

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]: ...


def tokenize(text: str) -> list[str]:
    """Lowercased alphanumeric runs; whitespace, punctuation and underscores separate."""
    return _TOKEN_RE.findall(text.lower())


def _check_text(text: str) -> None:
    if not text or not text.strip():
        raise EmptyText("cannot embed empty text")


def _check_vector(vec: np.ndarray, dim: int) -> np.ndarray:
    if vec.ndim != 1 or vec.shape[0] != dim:
        raise DimensionMismatch(f"expected a vector of length {dim}, got shape {vec.shape}")
    if not np.all(np.isfinite(vec)):
        raise ProviderFailure("provider returned non-finite embedding values")
    return vec


class HashingEmbedder:
    """Hash each token into one of ``dim`` buckets, count, then L2-normalize.

    The bucket of a token is ``blake2b(token, key=HASH_SEED) mod dim``, so the
    output is stable across processes and platforms.
    """

    def __init__(self, dim: int = DEFAULT_DIM):
        if dim < 1:
            raise ValueError("dim must be positive")
        self.dim = dim
        self.name = f"hashing-{dim}"

    def bucket(self, token: str) -> int:
        digest = hashlib.blake2b(token.encode("utf-8"), key=HASH_SEED, digest_size=8).digest()
        return int.from_bytes(digest, "little") % self.dim

    def embed_one(self, text: str) -> np.ndarray:
        _check_text(text)
        tokens = tokenize(text)
        if not tokens:
            raise EmptyText(f"no tokens in {text!r}")
        vec = np.zeros(self.dim, dtype=np.float64)
        for tok in tokens:
            vec[self.bucket(tok)] += 1.0
        return vec / np.linalg.norm(vec)

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        return [self.embed_one(t) for t in texts]

    def __repr__(self) -> str:
        return f"HashingEmbedder(dim={self.dim})"


class RemoteEmbedder:
    """Client for an OpenAI-compatible embeddings endpoint.

    Request: ``{"model": ..., "input": [text, ...]}``.
    Response: ``{"data": [{"index": i, "embedding": [...]}, ...]}``.
    The API key is read from ``$REFLECTMEM_EMBED_API_KEY`` (optional).
    """

    def __init__(
        self,
        base_url: str,
        model: str,
        dim: int,
        *,
        timeout_s: float = 30.0,
        batch_size: int = 32,
        max_parallel: int = 4,
        max_attempts: int = 3,
        backoff_s: float = 0.5,
        api_key_env: str = EMBED_API_KEY_ENV,
        transport: httpx.BaseTransport | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.dim = dim
        self.name = f"remote:{model}"
        self.batch_size = batch_size
        self.max_parallel = max_parallel
        self.max_attempts = max_attempts
        self.backoff_s = backoff_s
        self.api_key_env = api_key_env
        self._client = httpx.Client(timeout=timeout_s, transport=transport)

    def _headers(self) -> dict[str, str]:
        key = os.environ.get(self.api_key_env)
        return {"Authorization": f"Bearer {key}"} if key else {}

    def _embed_batch(self, batch: Sequence[str]) -> list[np.ndarray]:
        body = post_json(
            self._client,
            f"{self.base_url}/embeddings",
            {"model": self.model, "input": list(batch)},
            headers=self._headers(),
            max_attempts=self.max_attempts,
            backoff_s=self.backoff_s,
        )
        try:
            items = sorted(body["data"], key=lambda d: d.get("index", 0))
            vecs = [np.asarray(d["embedding"], dtype=np.float64) for d in items]
        except (KeyError, TypeError, ValueError) as exc:
            raise ProviderFailure(f"malformed embeddings response: {exc}") from exc
        if len(vecs) != len(batch):
            raise ProviderFailure(f"expected {len(batch)} embeddings, got {len(vecs)}")
        try:
            return [_check_vector(v, self.dim) for v in vecs]
        except DimensionMismatch as exc:
            raise ProviderFailure(f"malformed embeddings response: {exc}") from exc

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        for t in texts:
            _check_text(t)
        batches = [texts[i : i + self.batch_size] for i in range(0, len(texts), self.batch_size)]
        if len(batches) <= 1 or self.max_parallel <= 1:
            out = [self._embed_batch(b) for b in batches]
        else:
            with ThreadPoolExecutor(max_workers=self.max_parallel) as pool:
                out = list(pool.map(self._embed_batch, batches))
        return [v for batch in out for v in batch]

    def close(self) -> None:
        self._client.close()


def embed_text(provider: EmbeddingProvider, text: str) -> np.ndarray:
    _check_text(text)
    return _check_vector(np.asarray(provider.embed([text])[0], dtype=np.float64), provider.dim)


def cosine_similarity(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes differ: {a.shape} vs {b.shape}")
    na = math.sqrt(float(np.dot(a, a)))
    nb = math.sqrt(float(np.dot(b, b)))
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("cosine similarity is undefined for a zero vector")
    sim = float(np.dot(a, b)) / (na * nb)
    return min(1.0, max(-1.0, sim))
