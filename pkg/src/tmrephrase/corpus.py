"""Ingestion of raw short-text datasets and descriptive word-count statistics."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import unicodedata
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

logger = logging.getLogger(__name__)


class IngestError(ValueError):
    """Raised for unreadable files and malformed records."""


@dataclass(frozen=True)
class RawDocument:
    id: str
    text: str
    reply_to_id: Optional[str] = None
    timestamp: Optional[str] = None

    def to_dict(self) -> dict:
        out = {"id": self.id, "text": self.text}
        if self.reply_to_id is not None:
            out["reply_to_id"] = self.reply_to_id
        if self.timestamp is not None:
            out["timestamp"] = self.timestamp
        return out


@dataclass(frozen=True)
class Rejection:
    line: int
    id: Optional[str]
    reason: str


@dataclass(frozen=True)
class CorpusStats:
    total_docs: int
    mean_words: float
    std_words: float
    min_words: int
    p25: int
    median: int
    p75: int
    max_words: int

    def to_dict(self) -> dict:
        return asdict(self)


def _detect_format(path: Path) -> str:
    suffix = path.suffix.lower()
    if suffix in (".jsonl", ".ndjson", ".json"):
        return "jsonl"
    if suffix == ".csv":
        return "csv"
    raise IngestError(f"cannot infer format from extension {suffix!r}; pass format='jsonl' or 'csv'")


def _read_text(path: Path) -> str:
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise IngestError(f"unreadable file {path}: {exc}") from exc
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise IngestError(f"{path} is not valid UTF-8 (byte {exc.start})") from exc
    return text[1:] if text.startswith("\ufeff") else text


def _jsonl_records(text: str):
    for lineno, line in enumerate(text.split("\n"), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise IngestError(f"line {lineno}: invalid JSON ({exc.msg})") from exc
        if not isinstance(rec, dict):
            raise IngestError(f"line {lineno}: expected a JSON object")
        yield lineno, rec


def _csv_records(text: str):
    reader = csv.DictReader(io.StringIO(text, newline=""))
    if reader.fieldnames is None:
        raise IngestError("CSV file has no header row")
    missing = {"id", "text"} - set(reader.fieldnames)
    if missing:
        raise IngestError(f"CSV header lacks required column(s): {sorted(missing)}")
    for rec in reader:
        # line_num is the last physical line consumed, which handles quoted newlines
        yield reader.line_num, rec


def _optional(rec: dict, key: str, lineno: int) -> Optional[str]:
    value = rec.get(key)
    if value is None or value == "":
        return None
    if not isinstance(value, str):
        raise IngestError(f"line {lineno}: field {key!r} must be a string")
    return value


def ingest(path, format: Optional[str] = None) -> tuple[list[RawDocument], list[Rejection]]:
    """Read a JSONL or CSV dataset into RawDocuments.

    Returns ``(documents, rejections)``. Documents keep file order. Records
    with whitespace-only text and records repeating an earlier id are
    skipped and listed in ``rejections``; structurally malformed records
    raise :class:`IngestError` naming the line.
    """
    path = Path(path)
    fmt = format or _detect_format(path)
    if fmt not in ("jsonl", "csv"):
        raise IngestError(f"unsupported format {fmt!r}")
    text = _read_text(path)
    records = _jsonl_records(text) if fmt == "jsonl" else _csv_records(text)

    docs: list[RawDocument] = []
    rejections: list[Rejection] = []
    seen: set[str] = set()
    for lineno, rec in records:
        if "id" not in rec or "text" not in rec:
            raise IngestError(f"line {lineno}: record lacks 'id' or 'text'")
        doc_id, body = rec["id"], rec["text"]
        if isinstance(doc_id, int) and not isinstance(doc_id, bool):
            doc_id = str(doc_id)
        if not isinstance(doc_id, str) or not isinstance(body, str):
            raise IngestError(f"line {lineno}: 'id' and 'text' must be strings")
        if not doc_id:
            rejections.append(Rejection(lineno, None, "empty id"))
            continue
        if doc_id in seen:
            rejections.append(Rejection(lineno, doc_id, "duplicate id"))
            continue
        if not unicodedata.normalize("NFKC", body).strip():
            rejections.append(Rejection(lineno, doc_id, "empty text"))
            continue
        seen.add(doc_id)
        docs.append(
            RawDocument(
                id=doc_id,
                text=body,
                reply_to_id=_optional(rec, "reply_to_id", lineno),
                timestamp=_optional(rec, "timestamp", lineno),
            )
        )
    for rej in rejections:
        logger.info("skipped line %d (id=%s): %s", rej.line, rej.id, rej.reason)
    return docs, rejections


def write_jsonl(docs: Iterable[RawDocument], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for doc in docs:
            fh.write(json.dumps(doc.to_dict(), ensure_ascii=False) + "\n")


def _nearest_rank(sorted_values: np.ndarray, pct: float) -> int:
    rank = max(1, math.ceil(pct / 100.0 * len(sorted_values)))
    return int(sorted_values[rank - 1])


def stats(corpus: list[RawDocument]) -> CorpusStats:
    """Word-count statistics over raw whitespace tokens.

    Percentiles use the nearest-rank convention, so every reported
    quantile is an observed count. The standard deviation is the
    population one (ddof=0).
    """
    if not corpus:
        raise ValueError("stats() needs a non-empty corpus")
    counts = np.sort(np.array([len(doc.text.split()) for doc in corpus], dtype=np.int64))
    return CorpusStats(
        total_docs=len(corpus),
        mean_words=float(counts.mean()),
        std_words=float(counts.std()),
        min_words=int(counts[0]),
        p25=_nearest_rank(counts, 25),
        median=_nearest_rank(counts, 50),
        p75=_nearest_rank(counts, 75),
        max_words=int(counts[-1]),
    )
