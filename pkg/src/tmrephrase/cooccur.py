"""Boolean sliding-window word and pair counts over a reference corpus.

Binary file layout (little endian)::

    magic      8 bytes  b"TMRCOOC\\0"
    version    u16
    window     u32
    epsilon    f64
    windows    u64      total window count
    source     u32 len, ascii hex digest of the tokenized reference stream
    has_filter u8
    [filter]   u32 n, then n x (u32 len, utf-8 bytes)   only if has_filter
    words      u32 n, then n x (u32 len, utf-8 bytes, u64 count), sorted by word
    pairs      u64 n, then n x (u32 i, u32 j, u64 count), i < j indexing the word table, sorted
"""
from __future__ import annotations

import hashlib
import io
import itertools
import struct
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

MAGIC = b"TMRCOOC\x00"
VERSION = 1
DEFAULT_WINDOW = 110
DEFAULT_EPSILON = 1e-12


class IndexFormatError(ValueError):
    pass


def _pair(a: str, b: str) -> tuple:
    return (a, b) if a <= b else (b, a)


@dataclass
class CooccurrenceIndex:
    window_size: int
    total_windows: int = 0
    word_window_counts: Counter = field(default_factory=Counter)
    pair_window_counts: Counter = field(default_factory=Counter)
    epsilon: float = DEFAULT_EPSILON
    vocabulary_filter: Optional[frozenset] = None
    source_digest: str = ""

    def __post_init__(self):
        if self.window_size < 1:
            raise ValueError("window_size must be >= 1")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")

    def count(self, a: str, b: Optional[str] = None) -> int:
        if b is None or a == b:
            return self.word_window_counts.get(a, 0)
        return self.pair_window_counts.get(_pair(a, b), 0)

    def covers(self, word: str) -> bool:
        """Whether ``word`` was eligible for counting (always true without a filter)."""
        return self.vocabulary_filter is None or word in self.vocabulary_filter

    def add_document(self, tokens: Sequence) -> None:
        """Count every stride-1 window of one document; short documents form a single window."""
        if not tokens:
            return
        keep = self.vocabulary_filter
        size = self.window_size
        toks = [t if keep is None or t in keep else None for t in tokens]
        live: Counter = Counter(toks[:size])
        self._count_window(live)
        for i in range(size, len(toks)):
            out = toks[i - size]
            live[out] -= 1
            if not live[out]:
                del live[out]
            live[toks[i]] += 1
            self._count_window(live)

    def _count_window(self, live: Counter) -> None:
        self.total_windows += 1
        present = sorted(w for w in live if w is not None)
        self.word_window_counts.update(present)
        self.pair_window_counts.update(itertools.combinations(present, 2))

    def merge(self, other: "CooccurrenceIndex") -> "CooccurrenceIndex":
        """Combine indexes built on disjoint document shards with the same configuration."""
        if (self.window_size, self.epsilon, self.vocabulary_filter) != (
            other.window_size, other.epsilon, other.vocabulary_filter
        ):
            raise ValueError("cannot merge indexes with different configurations")
        return CooccurrenceIndex(
            self.window_size,
            self.total_windows + other.total_windows,
            self.word_window_counts + other.word_window_counts,
            self.pair_window_counts + other.pair_window_counts,
            self.epsilon,
            self.vocabulary_filter,
            hashlib.sha256((self.source_digest + other.source_digest).encode()).hexdigest(),
        )

    def to_bytes(self) -> bytes:
        buf = io.BytesIO()
        buf.write(MAGIC)
        buf.write(struct.pack("<HIdQ", VERSION, self.window_size, self.epsilon, self.total_windows))
        _write_strings(buf, [self.source_digest], count=False)
        buf.write(struct.pack("<B", self.vocabulary_filter is not None))
        if self.vocabulary_filter is not None:
            _write_strings(buf, sorted(self.vocabulary_filter))
        words = sorted(w for w, c in self.word_window_counts.items() if c)
        position = {w: i for i, w in enumerate(words)}
        buf.write(struct.pack("<I", len(words)))
        for w in words:
            raw = w.encode("utf-8")
            buf.write(struct.pack("<I", len(raw)) + raw + struct.pack("<Q", self.word_window_counts[w]))
        pairs = sorted((position[a], position[b], c) for (a, b), c in self.pair_window_counts.items() if c)
        buf.write(struct.pack("<Q", len(pairs)))
        for i, j, c in pairs:
            buf.write(struct.pack("<IIQ", i, j, c))
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "CooccurrenceIndex":
        buf = io.BytesIO(data)
        if buf.read(8) != MAGIC:
            raise IndexFormatError("not a co-occurrence index (bad magic bytes)")
        version, window, eps, total = _unpack(buf, "<HIdQ")
        if version != VERSION:
            raise IndexFormatError(f"unsupported index version {version}")
        (source,) = _read_strings(buf, n=1)
        (has_filter,) = _unpack(buf, "<B")
        vocab_filter = frozenset(_read_strings(buf)) if has_filter else None
        (n_words,) = _unpack(buf, "<I")
        words, counts = [], Counter()
        for _ in range(n_words):
            (n,) = _unpack(buf, "<I")
            w = buf.read(n).decode("utf-8")
            (c,) = _unpack(buf, "<Q")
            words.append(w)
            counts[w] = c
        (n_pairs,) = _unpack(buf, "<Q")
        pairs = Counter()
        for _ in range(n_pairs):
            i, j, c = _unpack(buf, "<IIQ")
            pairs[(words[i], words[j])] = c
        if buf.read(1):
            raise IndexFormatError("trailing bytes after pair table")
        return cls(window, total, counts, pairs, eps, vocab_filter, source)

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "CooccurrenceIndex":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())

    @property
    def config_id(self) -> str:
        """Window, epsilon and reference corpus; independent of the vocabulary filter."""
        return f"win{self.window_size}-eps{self.epsilon:g}-ref{self.source_digest[:12]}"


def _unpack(buf, fmt):
    size = struct.calcsize(fmt)
    raw = buf.read(size)
    if len(raw) != size:
        raise IndexFormatError("truncated index file")
    return struct.unpack(fmt, raw)


def _write_strings(buf, items, count=True) -> None:
    if count:
        buf.write(struct.pack("<I", len(items)))
    for s in items:
        raw = s.encode("utf-8")
        buf.write(struct.pack("<I", len(raw)) + raw)


def _read_strings(buf, n=None) -> list:
    if n is None:
        (n,) = _unpack(buf, "<I")
    out = []
    for _ in range(n):
        (k,) = _unpack(buf, "<I")
        out.append(buf.read(k).decode("utf-8"))
    return out


def build_index(reference_corpus: Iterable[Sequence], window_size: int = DEFAULT_WINDOW,
                vocabulary_filter: Optional[Iterable[str]] = None,
                epsilon: float = DEFAULT_EPSILON) -> CooccurrenceIndex:
    """Count boolean windows over tokenized reference documents.

    With ``vocabulary_filter`` only those words (and pairs among them) are
    counted, though every window still counts toward ``total_windows``.
    """
    index = CooccurrenceIndex(
        window_size,
        epsilon=epsilon,
        vocabulary_filter=frozenset(vocabulary_filter) if vocabulary_filter is not None else None,
    )
    source = hashlib.sha256()
    for tokens in reference_corpus:
        tokens = list(tokens)
        source.update((" ".join(tokens) + "\n").encode("utf-8"))
        index.add_document(tokens)
    index.source_digest = source.hexdigest()
    if index.total_windows == 0:
        raise ValueError("reference corpus produced no windows (empty corpus?)")
    return index


def probability(index: CooccurrenceIndex, word: str, other: Optional[str] = None) -> float:
    """Fraction of windows containing ``word`` (and ``other``, when given).

    ``word`` may also be a ``(w1, w2)`` tuple.
    """
    if isinstance(word, tuple):
        word, other = word
    if index.total_windows == 0:
        return 0.0
    return index.count(word, other) / index.total_windows
