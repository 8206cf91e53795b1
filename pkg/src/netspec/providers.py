"""Embedding and text-generation providers behind swappable interfaces.

Ships a deterministic hash-based bag-of-words embedder and a scripted generator
so that the whole pipeline runs offline and reproducibly; remote HTTP providers
speak the de-facto JSON wire format of hosted embedding/completion endpoints.
"""

from __future__ import annotations

import logging
import math
import os
import re
import threading
import time
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Literal, Protocol, Sequence

import httpx
from pydantic import BaseModel, ConfigDict, Field

from .hashing import fnv1a_64

logger = logging.getLogger(__name__)

DEFAULT_DIMENSION = 256
REQUEST_TIMEOUT_S = 30.0
RETRY_BACKOFF_S = (1.0, 4.0)
DEFAULT_MAX_INFLIGHT = 4

# Unicode alphanumeric runs; underscore is a separator.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


class ProviderError(Exception):
    pass


class EmptyInput(ProviderError):
    pass


class DimensionMismatch(ProviderError):
    pass


class RemoteUnavailable(ProviderError):
    """Transport or status failure from a remote provider."""

    def __init__(self, message: str, retry_after_s: float | None = None, elapsed_ms: float | None = None):
        super().__init__(message)
        self.retry_after_s = retry_after_s
        self.elapsed_ms = elapsed_ms


class NoScriptMatch(ProviderError):
    """The scripted generator had no rule for this prompt; a test-fixture gap."""


class EmbeddingProviderConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["deterministic_local", "remote_http"] = "deterministic_local"
    dimension: int = Field(default=DEFAULT_DIMENSION, ge=8)
    endpoint_url: str | None = None
    model_name: str | None = None
    auth_token_env_var: str | None = None
    max_inflight: int = Field(default=DEFAULT_MAX_INFLIGHT, ge=1)


class GenerationProviderConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["scripted", "remote_http"] = "scripted"
    script_path: str | None = None
    endpoint_url: str | None = None
    model_name: str | None = None
    auth_token_env_var: str | None = None
    temperature: float = Field(default=0.0, ge=0.0)
    max_inflight: int = Field(default=DEFAULT_MAX_INFLIGHT, ge=1)


@dataclass(frozen=True)
class GenerationRequest:
    prompt: str
    max_output_chars: int = 16000
    temperature: float = 0.0


@dataclass(frozen=True)
class GenerationResponse:
    text: str
    provider_id: str
    latency_ms: float


class EmbeddingProvider(Protocol):
    provider_id: str

    @property
    def dimension(self) -> int: ...

    def embed(self, text: str) -> list[float]: ...

    def embed_batch(self, texts: Sequence[str]) -> list[list[float]]: ...


class GenerationProvider(Protocol):
    provider_id: str

    def generate(self, request: GenerationRequest) -> GenerationResponse: ...


@lru_cache(maxsize=65536)
def _token_bucket_sign(token: str, dimension: int) -> tuple[int, int]:
    h = fnv1a_64(token.encode("utf-8"))
    return h % dimension, 1 if (h >> 63) == 0 else -1


def deterministic_embed(text: str, dimension: int = DEFAULT_DIMENSION) -> list[float]:
    """Hash-based bag-of-words embedding.

    Lowercase, split on non-alphanumeric; each token FNV-1a-hashed to a bucket
    (hash mod dimension) with sign from bit 63; occurrences accumulate; the
    result is L2-normalized. Pure function of (text, dimension).
    """
    tokens = _TOKEN_RE.findall(text.lower())
    if not tokens:
        raise EmptyInput("text has no alphanumeric tokens")
    acc: dict[int, int] = {}
    for token in tokens:
        bucket, sign = _token_bucket_sign(token, dimension)
        acc[bucket] = acc.get(bucket, 0) + sign
    norm_sq = sum(count * count for count in acc.values())
    if norm_sq == 0:
        raise EmptyInput("token signs cancelled to a zero vector")
    norm = math.sqrt(norm_sq)
    vector = [0.0] * dimension
    for bucket, count in acc.items():
        vector[bucket] = count / norm
    return vector


class DeterministicLocalEmbedder:
    """Offline embedding provider; same text always yields the same unit vector."""

    provider_id = "deterministic-local"

    def __init__(self, dimension: int = DEFAULT_DIMENSION):
        if dimension < 8:
            raise ValueError("embedding dimension must be at least 8")
        self._dimension = dimension

    @property
    def dimension(self) -> int:
        return self._dimension

    def embed(self, text: str) -> list[float]:
        return deterministic_embed(text, self._dimension)

    def embed_batch(self, texts: Sequence[str]) -> list[list[float]]:
        vectors = []
        for i, text in enumerate(texts):
            try:
                vectors.append(self.embed(text))
            except EmptyInput as exc:
                raise EmptyInput(f"batch item {i}: {exc}") from exc
        return vectors


def _bearer_headers(env_var: str | None) -> dict[str, str]:
    if not env_var:
        return {}
    token = os.environ.get(env_var)
    if not token:
        return {}
    return {"Authorization": f"Bearer {token}"}


def _post_with_retries(
    client: httpx.Client,
    url: str,
    payload: dict,
    headers: dict[str, str],
) -> httpx.Response:
    """POST with 2 retries (1 s, 4 s backoff) on transport errors, 5xx and 429."""
    start = time.monotonic()
    last_error: str = "unknown failure"
    retry_after: float | None = None
    for attempt in range(1 + len(RETRY_BACKOFF_S)):
        if attempt > 0:
            time.sleep(RETRY_BACKOFF_S[attempt - 1])
        try:
            response = client.post(url, json=payload, headers=headers, timeout=REQUEST_TIMEOUT_S)
        except httpx.HTTPError as exc:
            last_error = f"transport failure: {exc}"
            continue
        if response.status_code < 400:
            return response
        retry_after = _parse_retry_after(response)
        last_error = f"status {response.status_code}"
        if response.status_code < 500 and response.status_code != 429:
            break  # client errors are not transient
    elapsed_ms = (time.monotonic() - start) * 1000.0
    raise RemoteUnavailable(last_error, retry_after_s=retry_after, elapsed_ms=elapsed_ms)


def _parse_retry_after(response: httpx.Response) -> float | None:
    value = response.headers.get("retry-after")
    if value is None:
        return None
    try:
        return float(value)
    except ValueError:
        return None


class RemoteHttpEmbedder:
    """Embedding client for hosted endpoints: {"model", "input": [...]} in, {"data": [...]} out."""

    def __init__(self, config: EmbeddingProviderConfig, transport: httpx.BaseTransport | None = None):
        if not config.endpoint_url:
            raise ValueError("remote_http embedder requires endpoint_url")
        self._config = config
        self._client = httpx.Client(transport=transport)
        self._inflight = threading.Semaphore(config.max_inflight)
        self.provider_id = f"remote-embed:{config.model_name or 'default'}"

    @property
    def dimension(self) -> int:
        return self._config.dimension

    def embed(self, text: str) -> list[float]:
        return self.embed_batch([text])[0]

    def embed_batch(self, texts: Sequence[str]) -> list[list[float]]:
        if not texts:
            return []
        for i, text in enumerate(texts):
            if not text.strip():
                raise EmptyInput(f"batch item {i}: text is empty")
        payload = {"model": self._config.model_name or "", "input": list(texts)}
        with self._inflight:
            response = _post_with_retries(
                self._client,
                self._config.endpoint_url,
                payload,
                _bearer_headers(self._config.auth_token_env_var),
            )
        try:
            rows = sorted(response.json()["data"], key=lambda row: row["index"])
            vectors = [[float(x) for x in row["embedding"]] for row in rows]
        except (KeyError, TypeError, ValueError) as exc:
            raise RemoteUnavailable(f"malformed embedding response: {exc}") from exc
        if len(vectors) != len(texts):
            raise DimensionMismatch(f"expected {len(texts)} embeddings, got {len(vectors)}")
        return [self._normalized(v) for v in vectors]

    def _normalized(self, vector: list[float]) -> list[float]:
        if len(vector) != self._config.dimension:
            raise DimensionMismatch(
                f"provider returned dimension {len(vector)}, configured {self._config.dimension}"
            )
        norm = math.sqrt(sum(x * x for x in vector))
        if norm == 0 or not math.isfinite(norm):
            raise RemoteUnavailable("provider returned a zero or non-finite vector")
        return [x / norm for x in vector]

    def close(self) -> None:
        self._client.close()


class ScriptedGenerator:
    """Generator whose replies come from an ordered (substring -> canned text) table.

    Rules are checked in order against the prompt; the first match wins, which
    lets a fixture return different text on retry prompts (they contain the
    appended correction instruction).
    """

    provider_id = "scripted"

    def __init__(self, rules: Sequence[tuple[str, str]]):
        self._rules = list(rules)

    @classmethod
    def from_script_file(cls, path: str | Path) -> "ScriptedGenerator":
        """Load rules from a JSON array of {"match", "response_file"} (or inline "response")."""
        import json as _json

        script_path = Path(path)
        entries = _json.loads(script_path.read_text(encoding="utf-8"))
        rules: list[tuple[str, str]] = []
        for entry in entries:
            if "response_file" in entry:
                text = (script_path.parent / entry["response_file"]).read_text(encoding="utf-8")
            else:
                text = entry["response"]
            rules.append((entry["match"], text))
        return cls(rules)

    def generate(self, request: GenerationRequest) -> GenerationResponse:
        if not request.prompt.strip():
            raise EmptyInput("prompt is empty")
        start = time.monotonic()
        for pattern, text in self._rules:
            if pattern in request.prompt:
                return GenerationResponse(
                    text=text[: request.max_output_chars],
                    provider_id=self.provider_id,
                    latency_ms=(time.monotonic() - start) * 1000.0,
                )
        raise NoScriptMatch("no scripted rule matches the prompt")


class RemoteHttpGenerator:
    """Chat-completion client: {"model", "messages", "temperature"} in, {"choices": [...]} out."""

    def __init__(self, config: GenerationProviderConfig, transport: httpx.BaseTransport | None = None):
        if not config.endpoint_url:
            raise ValueError("remote_http generator requires endpoint_url")
        self._config = config
        self._client = httpx.Client(transport=transport)
        self._inflight = threading.Semaphore(config.max_inflight)
        self.provider_id = f"remote-gen:{config.model_name or 'default'}"

    def generate(self, request: GenerationRequest) -> GenerationResponse:
        if not request.prompt.strip():
            raise EmptyInput("prompt is empty")
        payload = {
            "model": self._config.model_name or "",
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
        }
        start = time.monotonic()
        with self._inflight:
            response = _post_with_retries(
                self._client,
                self._config.endpoint_url,
                payload,
                _bearer_headers(self._config.auth_token_env_var),
            )
        try:
            text = response.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise RemoteUnavailable(f"malformed generation response: {exc}") from exc
        return GenerationResponse(
            text=str(text)[: request.max_output_chars],
            provider_id=self.provider_id,
            latency_ms=(time.monotonic() - start) * 1000.0,
        )

    def close(self) -> None:
        self._client.close()


def build_embedder(
    config: EmbeddingProviderConfig, transport: httpx.BaseTransport | None = None
) -> EmbeddingProvider:
    if config.kind == "deterministic_local":
        return DeterministicLocalEmbedder(config.dimension)
    return RemoteHttpEmbedder(config, transport=transport)


def build_generator(
    config: GenerationProviderConfig, transport: httpx.BaseTransport | None = None
) -> GenerationProvider:
    if config.kind == "scripted":
        if not config.script_path:
            raise ValueError("scripted generator requires script_path")
        return ScriptedGenerator.from_script_file(config.script_path)
    return RemoteHttpGenerator(config, transport=transport)
