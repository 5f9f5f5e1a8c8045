"""Prompt-driven rephrasing of raw documents through an LLM provider.

Two prompt schemes are built in. Replies are cached in an append-only
JSONL file keyed by (doc id, scheme, provider id, sha256 of the original
text), so a warm cache replays a run without any network traffic.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Mapping, Optional, Protocol

import httpx

logger = logging.getLogger(__name__)

GENERAL_PROMPT = (
    "Rephrase the following tweet to improve grammar, clarity, and tone, while keeping the meaning exactly the same.\n"
    "Do not alter or remove any named entities, hashtags, usernames, or specific terms.\n"
    "Return only the rephrased tweet — no explanation, no formatting."
)
COLLOQUIAL_TO_FORMAL_PROMPT = (
    "Convert the following tweet into formal, professional, and standard English suitable for inclusion "
    "in a public health report or professional summary.\n"
    "Preserve the original meaning and do not change or remove any named entities, hashtags, usernames, "
    "or specific terms.\n"
    "Avoid slang, contractions, or overly casual language. Use complete sentences and proper grammar.\n"
    "Return only the rephrased tweet — no explanation or formatting."
)

SCHEMES: dict[str, str] = {
    "general": GENERAL_PROMPT,
    "colloquial_to_formal": COLLOQUIAL_TO_FORMAL_PROMPT,
}

_QUOTE_PAIRS = {'"': '"', "'": "'", "“": "”", "‘": "’"}


class ProviderError(RuntimeError):
    """Transport or protocol failure talking to an LLM endpoint."""


def render_prompt(scheme: str, text: str) -> str:
    if scheme not in SCHEMES:
        raise ValueError(f"unknown rephrase scheme {scheme!r}; expected one of {sorted(SCHEMES)}")
    if not text:
        raise ValueError("cannot render a prompt for empty text")
    return SCHEMES[scheme] + "\n" + text


def clean_reply(reply: str) -> str:
    """Strip whitespace and at most one layer of wrapping quotes."""
    reply = reply.strip()
    if len(reply) >= 2 and _QUOTE_PAIRS.get(reply[0]) == reply[-1]:
        reply = reply[1:-1].strip()
    return reply


def text_digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class RephraseRecord:
    doc_id: str
    scheme: str
    provider_id: str
    original: str
    rephrased: Optional[str]
    from_cache: bool = False
    requested_at: Optional[str] = None
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None and bool(self.rephrased)

    @property
    def key(self) -> tuple:
        return (self.doc_id, self.scheme, self.provider_id, text_digest(self.original))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["original_sha256"] = text_digest(self.original)
        return out

    @classmethod
    def from_dict(cls, rec: dict) -> "RephraseRecord":
        return cls(
            doc_id=rec["doc_id"],
            scheme=rec["scheme"],
            provider_id=rec["provider_id"],
            original=rec["original"],
            rephrased=rec.get("rephrased"),
            from_cache=bool(rec.get("from_cache", False)),
            requested_at=rec.get("requested_at"),
            error=rec.get("error"),
        )


class RephraseCache:
    """Append-only JSONL store of successful records.

    ``path=None`` keeps the cache in memory only. Writes go through one
    lock so concurrent workers never interleave lines.
    """

    def __init__(self, path=None):
        self.path = Path(path) if path is not None else None
        self._records: dict[tuple, RephraseRecord] = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            with open(self.path, encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, start=1):
                    if not line.strip():
                        continue
                    try:
                        rec = RephraseRecord.from_dict(json.loads(line))
                    except (json.JSONDecodeError, KeyError) as exc:
                        raise ValueError(f"{self.path}:{lineno}: corrupt cache record ({exc})") from exc
                    self._records.setdefault(rec.key, replace(rec, from_cache=False))

    def __len__(self) -> int:
        return len(self._records)

    def get(self, key: tuple) -> Optional[RephraseRecord]:
        rec = self._records.get(key)
        return replace(rec, from_cache=True) if rec is not None else None

    def put(self, record: RephraseRecord) -> None:
        if not record.ok:
            return
        with self._lock:
            if record.key in self._records:
                return
            self._records[record.key] = record
            if self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with open(self.path, "a", encoding="utf-8", newline="\n") as fh:
                    fh.write(json.dumps(record.to_dict(), ensure_ascii=False, sort_keys=True) + "\n")


class Provider(Protocol):
    provider_id: str

    def complete(self, prompt: str) -> str: ...


def _document_from_prompt(prompt: str) -> str:
    for template in SCHEMES.values():
        if prompt.startswith(template + "\n"):
            return prompt[len(template) + 1:]
    raise ProviderError("prompt does not start with a known template")


class IdentityProvider:
    """Offline provider that echoes the document back unchanged."""

    def __init__(self, provider_id: str = "identity"):
        self.provider_id = provider_id
        self.calls = 0
        self._lock = threading.Lock()

    def complete(self, prompt: str) -> str:
        with self._lock:
            self.calls += 1
        return _document_from_prompt(prompt)


class MappingProvider:
    """Offline provider answering from a fixed original-text -> reply mapping.

    Useful for recorded fixtures; unknown texts raise :class:`ProviderError`.
    """

    def __init__(self, replies: Mapping[str, str], provider_id: str = "mapping"):
        self.replies = dict(replies)
        self.provider_id = provider_id
        self.calls = 0
        self._lock = threading.Lock()

    def complete(self, prompt: str) -> str:
        with self._lock:
            self.calls += 1
        doc = _document_from_prompt(prompt)
        if doc not in self.replies:
            raise ProviderError("no recorded reply for document")
        return self.replies[doc]


class ReplayProvider:
    """Serves nothing itself: every call fails, so only cache hits succeed."""

    def __init__(self, provider_id: str):
        self.provider_id = provider_id
        self.calls = 0

    def complete(self, prompt: str) -> str:
        self.calls += 1
        raise ProviderError("cache miss in replay mode")


@dataclass(frozen=True)
class ProviderConfig:
    kind: str = "openai"  # "openai" (chat/completions) or "gemini" (generateContent)
    endpoint: str = "https://api.openai.com/v1/chat/completions"
    model: str = "gpt-4o-mini"
    api_key_env: str = "OPENAI_API_KEY"
    temperature: float = 0.0
    max_retries: int = 3
    requests_per_minute: int = 0  # 0 disables throttling
    max_in_flight: int = 4
    timeout: float = 60.0

    def __post_init__(self):
        if self.kind not in ("openai", "gemini"):
            raise ValueError(f"unknown provider kind {self.kind!r}")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")

    @classmethod
    def from_mapping(cls, values: Mapping[str, object]) -> "ProviderConfig":
        casts = {"temperature": float, "max_retries": int, "requests_per_minute": int,
                 "max_in_flight": int, "timeout": float}
        known = cls.__dataclass_fields__
        kwargs = {}
        for key, value in values.items():
            if key not in known:
                raise ValueError(f"unknown provider setting {key!r}")
            kwargs[key] = casts[key](value) if key in casts else value
        return cls(**kwargs)


class HttpProvider:
    """JSON-over-HTTPS adapter for OpenAI-style chat endpoints and Gemini.

    The API key is read from the environment variable named in the config
    at call time and is never persisted.
    """

    def __init__(self, config: ProviderConfig, client: Optional[httpx.Client] = None,
                 sleep: Callable[[float], None] = time.sleep):
        self.config = config
        self.provider_id = config.model
        self._client = client or httpx.Client(timeout=config.timeout)
        self._sleep = sleep

    def _request(self, prompt: str) -> httpx.Request:
        cfg = self.config
        key = os.environ.get(cfg.api_key_env)
        if not key:
            raise ProviderError(f"environment variable {cfg.api_key_env} is not set")
        if cfg.kind == "openai":
            body = {"model": cfg.model, "messages": [{"role": "user", "content": prompt}],
                    "temperature": cfg.temperature}
            headers = {"Authorization": f"Bearer {key}"}
            url = cfg.endpoint
        else:
            body = {"contents": [{"role": "user", "parts": [{"text": prompt}]}],
                    "generationConfig": {"temperature": cfg.temperature}}
            headers = {"x-goog-api-key": key}
            url = f"{cfg.endpoint.rstrip('/')}/models/{cfg.model}:generateContent"
        return self._client.build_request("POST", url, json=body, headers=headers)

    def _parse(self, payload: dict) -> str:
        try:
            if self.config.kind == "openai":
                return payload["choices"][0]["message"]["content"] or ""
            parts = payload["candidates"][0]["content"]["parts"]
            return "".join(p.get("text", "") for p in parts)
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderError(f"unexpected response shape: {exc!r}") from exc

    def complete(self, prompt: str) -> str:
        last: Exception | None = None
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                self._sleep(min(2.0 ** attempt, 30.0))
            try:
                resp = self._client.send(self._request(prompt))
            except httpx.TransportError as exc:
                last = exc
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last = ProviderError(f"HTTP {resp.status_code}")
                continue
            if resp.status_code >= 400:
                raise ProviderError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            return self._parse(resp.json())
        raise ProviderError(f"giving up after {self.config.max_retries + 1} attempts: {last}")


class RateLimiter:
    """Spaces call starts at least ``60 / rpm`` seconds apart."""

    def __init__(self, requests_per_minute: int, clock=time.monotonic, sleep=time.sleep):
        self.interval = 60.0 / requests_per_minute if requests_per_minute > 0 else 0.0
        self._clock, self._sleep = clock, sleep
        self._next = 0.0
        self._lock = threading.Lock()

    def wait(self) -> None:
        if not self.interval:
            return
        with self._lock:
            now = self._clock()
            start = max(now, self._next)
            self._next = start + self.interval
        if start > now:
            self._sleep(start - now)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def rephrase_one(doc, scheme: str, provider: Provider, cache: Optional[RephraseCache] = None,
                 limiter: Optional[RateLimiter] = None) -> RephraseRecord:
    """Rephrase one RawDocument, serving from ``cache`` when possible.

    Provider failures and empty replies yield a record with ``error`` set
    instead of raising, so a corpus run always completes.
    """
    base = RephraseRecord(doc.id, scheme, provider.provider_id, doc.text, None)
    if cache is not None:
        hit = cache.get(base.key)
        if hit is not None:
            return hit
    prompt = render_prompt(scheme, doc.text)
    if limiter is not None:
        limiter.wait()
    requested_at = _now()
    try:
        reply = clean_reply(provider.complete(prompt))
    except Exception as exc:  # noqa: BLE001 - every provider failure marks the document
        logger.warning("rephrase failed for %s: %s", doc.id, exc)
        return replace(base, requested_at=requested_at, error=f"{type(exc).__name__}: {exc}")
    if not reply:
        return replace(base, requested_at=requested_at, error="empty reply")
    record = replace(base, rephrased=reply, requested_at=requested_at)
    if cache is not None:
        cache.put(record)
    return record


def rephrase_corpus(docs, scheme: str, provider: Provider, cache: Optional[RephraseCache] = None,
                    max_in_flight: int = 4, requests_per_minute: int = 0) -> list[RephraseRecord]:
    """One record per document, in input order; at most ``max_in_flight`` calls outstanding."""
    if max_in_flight < 1:
        raise ValueError("max_in_flight must be >= 1")
    limiter = RateLimiter(requests_per_minute)
    docs = list(docs)
    with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
        records = list(pool.map(lambda d: rephrase_one(d, scheme, provider, cache, limiter), docs))
    failed = failed_ids(records)
    if failed:
        logger.warning("%d of %d documents failed to rephrase: %s", len(failed), len(records),
                       ", ".join(failed[:20]))
    return records


def failed_ids(records) -> list[str]:
    return [r.doc_id for r in records if not r.ok]


def write_records(records, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_dict(), ensure_ascii=False, sort_keys=True) + "\n")


def read_records(path) -> list[RephraseRecord]:
    with open(path, encoding="utf-8") as fh:
        return [RephraseRecord.from_dict(json.loads(line)) for line in fh if line.strip()]
