"""Completion backends: a live chat-completions HTTP client with retries and
bounded concurrency, deterministic mock backends for offline runs, and an
append-only JSONL response cache keyed by canonical request digest.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import random
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Sequence

import requests

from msr_audit.prompting import GeneratedCompletion, Transcript

logger = logging.getLogger(__name__)

RETRY_STATUS = frozenset({429}) | frozenset(range(500, 600))


class BackendError(Exception):
    """Raised when a backend cannot produce a completion."""


@dataclass(frozen=True)
class GenerationParams:
    """Request parameters shared by all backends.

    ``max_tokens=None`` means auto: ceil(1.5 x reference token count), long
    enough to contain a fully regurgitated reference while bounding cost.
    ``seed`` only affects the mock backends.
    """

    model: str = "mock"
    temperature: float = 0.1
    max_tokens: int | None = None
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")
        if self.max_tokens is not None and self.max_tokens < 1:
            raise ValueError(f"max_tokens must be >= 1, got {self.max_tokens}")


@dataclass(frozen=True)
class GenerationRecord:
    """One completion with enough request context to reproduce or cache it."""

    doc_id: str
    request_key: str
    output_text: str
    backend_name: str
    params: GenerationParams | None
    created_at: str
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def _utcnow() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def transcript_messages(transcript: Transcript) -> list[dict[str, str]]:
    """Wire-format message list: system prompt followed by the faux turns."""
    messages = [{"role": "system", "content": transcript.system_prompt}]
    messages.extend({"role": t.role, "content": t.text} for t in transcript.turns)
    return messages


def resolve_max_tokens(transcript: Transcript, params: GenerationParams) -> int:
    if params.max_tokens is not None:
        return params.max_tokens
    return math.ceil(1.5 * len(transcript.reference_tokens))


def request_key(backend: Backend, transcript: Transcript, params: GenerationParams) -> str:
    """Hex digest of the canonical request.

    Covers the backend name, the output-relevant parameters, and the full
    transcript content. The seed participates only for backends that use it.
    """
    payload: dict = {
        "backend": backend.name,
        "model": params.model,
        "temperature": params.temperature,
        "max_tokens": resolve_max_tokens(transcript, params),
        "messages": transcript_messages(transcript),
    }
    if backend.uses_seed:
        payload["seed"] = params.seed if params.seed is not None else 0
    canonical = json.dumps(payload, sort_keys=True, ensure_ascii=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class Backend:
    """Produces completion text for a transcript."""

    name = "backend"
    uses_seed = False

    def complete(self, transcript: Transcript, params: GenerationParams) -> str:
        raise NotImplementedError


class VerbatimBackend(Backend):
    """Returns the held-out reference exactly; models a fully memorized source."""

    name = "verbatim"

    def complete(self, transcript: Transcript, params: GenerationParams) -> str:
        return transcript.reference_text


_SYLLABLES = (
    "ba", "ce", "di", "fo", "gu", "hy", "ja", "ko", "lu", "me",
    "ni", "po", "qua", "re", "si", "tu", "ve", "wo", "xa", "zy",
)


def _call_rng(seed: int | None, reference_text: str) -> random.Random:
    """RNG derived from (seed, reference) so output is independent of call order."""
    digest = hashlib.sha256(f"{seed or 0}|{reference_text}".encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def _fresh_tokens(count: int, forbidden: frozenset[str], rng: random.Random) -> list[str]:
    """Synthetic nonsense words guaranteed absent from ``forbidden``."""
    out = []
    for _ in range(count):
        word = "".join(rng.choice(_SYLLABLES) for _ in range(3))
        while word in forbidden:
            word += rng.choice(_SYLLABLES)
        out.append(word)
    return out


class ObliviousBackend(Backend):
    """Emits a seeded synthetic word sequence sharing no token with the
    reference; models a source the backend never saw."""

    name = "oblivious"
    uses_seed = True

    def complete(self, transcript: Transcript, params: GenerationParams) -> str:
        rng = _call_rng(params.seed, transcript.reference_text)
        forbidden = frozenset(transcript.reference_tokens)
        return " ".join(_fresh_tokens(len(transcript.reference_tokens), forbidden, rng))


class PartialCopyBackend(Backend):
    """Copies each reference chunk with probability ``p``, otherwise
    substitutes synthetic words of the same length.

    A synthetic separator word follows every chunk, so each copied chunk
    surfaces as one isolated maximal match of the chunk's length rather than
    merging with a copied neighbor.
    """

    uses_seed = True

    def __init__(self, p: float, chunk_words: int = 8) -> None:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"copy probability must be in [0, 1], got {p}")
        if chunk_words < 1:
            raise ValueError(f"chunk_words must be >= 1, got {chunk_words}")
        self.p = p
        self.chunk_words = chunk_words
        self.name = f"partial:{p:g}"

    def complete(self, transcript: Transcript, params: GenerationParams) -> str:
        rng = _call_rng(params.seed, transcript.reference_text)
        ref = transcript.reference_tokens
        forbidden = frozenset(ref)
        out: list[str] = []
        for start in range(0, len(ref), self.chunk_words):
            chunk = ref[start : start + self.chunk_words]
            if rng.random() < self.p:
                out.extend(chunk)
            else:
                out.extend(_fresh_tokens(len(chunk), forbidden, rng))
            out.extend(_fresh_tokens(1, forbidden, rng))
        return " ".join(out)


class LiveBackend(Backend):
    """Chat-completions HTTP client with exponential backoff and jitter.

    Retries transient failures (timeouts, connection errors, 429, 5xx) up to
    ``max_attempts`` times; other client errors surface immediately.
    """

    name = "live"

    def __init__(
        self,
        base_url: str,
        api_key: str | None = None,
        timeout: float = 60.0,
        max_attempts: int = 5,
        backoff_base: float = 1.0,
        sleep: Callable[[float], None] = time.sleep,
        session: requests.Session | None = None,
    ) -> None:
        if not base_url:
            raise ValueError("live backend requires a base URL")
        self.url = base_url.rstrip("/") + "/chat/completions"
        self.api_key = api_key
        self.timeout = timeout
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self._sleep = sleep
        self._session = session or requests.Session()

    def complete(self, transcript: Transcript, params: GenerationParams) -> str:
        body = {
            "model": params.model,
            "messages": transcript_messages(transcript),
            "temperature": params.temperature,
            "max_tokens": resolve_max_tokens(transcript, params),
        }
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"

        last_error = "no attempts made"
        for attempt in range(self.max_attempts):
            if attempt:
                delay = self.backoff_base * 2 ** (attempt - 1) * (0.5 + random.random())
                logger.warning("retrying after %s (attempt %d): %s", last_error, attempt + 1, self.url)
                self._sleep(delay)
            try:
                resp = self._session.post(self.url, json=body, headers=headers, timeout=self.timeout)
            except (requests.Timeout, requests.ConnectionError) as exc:
                last_error = f"network error: {exc}"
                continue
            if resp.status_code in RETRY_STATUS:
                last_error = f"HTTP {resp.status_code}"
                continue
            if resp.status_code != 200:
                raise BackendError(f"HTTP {resp.status_code} from {self.url}: {resp.text[:200]}")
            return self._extract_content(resp)
        raise BackendError(f"request to {self.url} failed after {self.max_attempts} attempts: {last_error}")

    @staticmethod
    def _extract_content(resp: requests.Response) -> str:
        try:
            data = resp.json()
        except ValueError as exc:
            raise BackendError(f"malformed response body: {exc}") from exc
        try:
            content = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise BackendError(f"malformed response body: {str(data)[:200]}") from None
        if not isinstance(content, str):
            raise BackendError(f"completion content is not a string: {content!r}")
        return content


def backend_from_spec(spec: str, base_url: str | None = None, api_key: str | None = None) -> Backend:
    """Build a backend from its CLI spec: live | verbatim | oblivious | partial:P.

    For the live backend the base URL falls back to the MSR_BASE_URL
    environment variable and the bearer token to MSR_API_KEY.
    """
    if spec == "verbatim":
        return VerbatimBackend()
    if spec == "oblivious":
        return ObliviousBackend()
    if spec.startswith("partial:"):
        try:
            p = float(spec.split(":", 1)[1])
        except ValueError:
            raise ValueError(f"bad partial backend spec {spec!r}; expected partial:P") from None
        return PartialCopyBackend(p)
    if spec == "live":
        url = base_url or os.environ.get("MSR_BASE_URL")
        if not url:
            raise ValueError("live backend requires --base-url or MSR_BASE_URL")
        return LiveBackend(url, api_key=api_key or os.environ.get("MSR_API_KEY"))
    raise ValueError(f"unknown backend {spec!r}; expected live, verbatim, oblivious, or partial:P")


class GenerationCache:
    """First-write-wins response cache, optionally persisted as JSON lines.

    Each line holds {"key", "output", "backend", "model", "temperature",
    "created_at"}. Corrupt lines are skipped with a warning. Writes are
    serialized; lookups may run concurrently.
    """

    def __init__(self, path: str | Path | None = None) -> None:
        self.path = Path(path) if path is not None else None
        self._records: dict[str, GenerationRecord] = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            self._load()

    def _load(self) -> None:
        assert self.path is not None
        with self.path.open("r", encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                try:
                    raw = json.loads(line)
                    record = GenerationRecord(
                        doc_id="",
                        request_key=raw["key"],
                        output_text=raw["output"],
                        backend_name=raw["backend"],
                        params=GenerationParams(model=raw["model"], temperature=raw["temperature"]),
                        created_at=raw["created_at"],
                    )
                except (ValueError, KeyError, TypeError) as exc:
                    logger.warning("%s: skipping corrupt cache line %d: %s", self.path, lineno, exc)
                    continue
                self._records.setdefault(record.request_key, record)

    def lookup(self, key: str) -> GenerationRecord | None:
        with self._lock:
            return self._records.get(key)

    def store(self, record: GenerationRecord) -> GenerationRecord:
        """Store a record; if the key already exists the first record wins."""
        with self._lock:
            existing = self._records.get(record.request_key)
            if existing is not None:
                return existing
            self._records[record.request_key] = record
            if self.path is not None:
                line = json.dumps(
                    {
                        "key": record.request_key,
                        "output": record.output_text,
                        "backend": record.backend_name,
                        "model": record.params.model if record.params else "",
                        "temperature": record.params.temperature if record.params else 0.0,
                        "created_at": record.created_at,
                    },
                    ensure_ascii=False,
                )
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with self.path.open("a", encoding="utf-8") as handle:
                    handle.write(line + "\n")
            return record

    def __len__(self) -> int:
        with self._lock:
            return len(self._records)


def generate_record(
    backend: Backend,
    transcript: Transcript,
    params: GenerationParams,
    cache: GenerationCache | None = None,
    doc_id: str = "",
) -> GenerationRecord:
    """Produce one completion record, consulting the cache first.

    Raises BackendError on failure; empty completions are reported and kept
    (they count as zero-match downstream).
    """
    key = request_key(backend, transcript, params)
    if cache is not None:
        hit = cache.lookup(key)
        if hit is not None:
            return replace(hit, doc_id=doc_id)
    text = backend.complete(transcript, params)
    if not text:
        logger.warning("empty completion for document %r; will count as zero-match", doc_id)
    record = GenerationRecord(
        doc_id=doc_id,
        request_key=key,
        output_text=text,
        backend_name=backend.name,
        params=params,
        created_at=_utcnow(),
    )
    if cache is not None:
        record = replace(cache.store(record), doc_id=doc_id)
    return record


def generate(
    backend: Backend,
    transcript: Transcript,
    params: GenerationParams,
    cache: GenerationCache | None = None,
    doc_id: str = "",
) -> GeneratedCompletion:
    """Produce the completion for one transcript."""
    record = generate_record(backend, transcript, params, cache=cache, doc_id=doc_id)
    return GeneratedCompletion.from_text(record.output_text)


def generate_batch(
    backend: Backend,
    transcripts: Sequence[Transcript],
    params: GenerationParams,
    max_in_flight: int = 4,
    cache: GenerationCache | None = None,
    doc_ids: Sequence[str] | None = None,
) -> list[GenerationRecord]:
    """Complete many transcripts with at most ``max_in_flight`` outstanding.

    Outputs align index-wise with the inputs regardless of completion order.
    Per-item failures are captured on the record (``error`` set) and never
    abort the batch; cached entries are not re-requested.
    """
    if max_in_flight < 1:
        raise ValueError(f"max_in_flight must be >= 1, got {max_in_flight}")
    if doc_ids is not None and len(doc_ids) != len(transcripts):
        raise ValueError("doc_ids must align with transcripts")
    ids = list(doc_ids) if doc_ids is not None else [""] * len(transcripts)

    def one(index: int) -> GenerationRecord:
        transcript = transcripts[index]
        doc_id = ids[index]
        try:
            return generate_record(backend, transcript, params, cache=cache, doc_id=doc_id)
        except BackendError as exc:
            logger.warning("generation failed for document %r: %s", doc_id, exc)
            return GenerationRecord(
                doc_id=doc_id,
                request_key=request_key(backend, transcript, params),
                output_text="",
                backend_name=backend.name,
                params=params,
                created_at=_utcnow(),
                error=str(exc),
            )

    if not transcripts:
        return []
    with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
        return list(pool.map(one, range(len(transcripts))))
