"""Topic quality: NPMI-based C_v coherence, uniqueness, redundancy, diversity."""
from __future__ import annotations

import json
import logging
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .cooccur import CooccurrenceIndex, probability
from .lda import TopicSet

logger = logging.getLogger(__name__)


def npmi(index: CooccurrenceIndex, wi: str, wj: str) -> float:
    """Epsilon-smoothed normalised PMI of two words; the self-pair uses P(w, w) = P(w)."""
    eps = index.epsilon
    joint = probability(index, wi, wj) + eps
    numerator = math.log(joint / (probability(index, wi) * probability(index, wj) + eps))
    denominator = -math.log(joint)
    if denominator == 0.0:
        return 0.0
    return numerator / denominator


def _cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu, nv = float(np.linalg.norm(u)), float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


def npmi_matrix(index: CooccurrenceIndex, words: Sequence[str]) -> np.ndarray:
    T = len(words)
    m = np.empty((T, T))
    for i in range(T):
        for j in range(i, T):
            m[i, j] = m[j, i] = npmi(index, words[i], words[j])
    return m


def topic_cv(words: Sequence[str], index: CooccurrenceIndex) -> float:
    """Mean cosine between each word's NPMI vector and the topic's summed NPMI vector."""
    m = npmi_matrix(index, words)
    aggregate = m.sum(axis=0)
    return sum(_cosine(row, aggregate) for row in m) / len(words)


def cv(topics: TopicSet, index: CooccurrenceIndex) -> float:
    topics.validate()
    missing = uncovered_words(topics, index)
    if missing:
        logger.warning("%d topic word(s) outside the index vocabulary filter: %s", len(missing),
                       ", ".join(missing[:20]))
    return sum(topic_cv(t, index) for t in topics.words) / topics.K


def uncovered_words(topics: TopicSet, index: CooccurrenceIndex) -> list[str]:
    return sorted({w for t in topics.words for w in t if not index.covers(w)})


def occurrence_counts(topics: TopicSet) -> Counter:
    """#(x): number of topic lists containing each word."""
    topics.validate()
    return Counter(w for t in topics.words for w in t)


# Sums run over exact rationals and round once, so results are correctly
# rounded floats (e.g. exactly 1/K for K identical topics) in any word order.

def tu(topics: TopicSet) -> float:
    counts = occurrence_counts(topics)
    N = topics.N
    return float(sum(sum(Fraction(1, counts[x]) for x in t) / N for t in topics.words) / topics.K)


def tr(topics: TopicSet) -> float:
    """Mean normalised excess occurrence; defined as 0 when K == 1."""
    counts = occurrence_counts(topics)
    K, N = topics.K, topics.N
    if K == 1:
        logger.warning("TR is undefined for a single topic; reporting 0")
        return 0.0
    return float(sum(sum(Fraction(counts[x] - 1, K - 1) for x in t) / N for t in topics.words) / K)


def td(topics: TopicSet) -> float:
    """Share of top-word slots whose word appears in exactly one topic."""
    counts = occurrence_counts(topics)
    N = topics.N
    return float(sum(Fraction(sum(1 for x in t if counts[x] == 1), N) for t in topics.words) / topics.K)


def distinct_word_ratio(topics: TopicSet) -> float:
    """|distinct top words| / (K * N). Diagnostic only, not one of the four reported metrics."""
    return len(occurrence_counts(topics)) / (topics.K * topics.N)


@dataclass(frozen=True)
class MetricReport:
    cv: Optional[float]
    tu: float
    tr: float
    td: float
    K: int
    N: int
    index_id: Optional[str] = None
    model_id: Optional[str] = None
    variant: Optional[str] = None
    cv_negative: bool = False
    uncovered_words: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "MetricReport":
        known = cls.__dataclass_fields__
        return cls(**{k: v for k, v in d.items() if k in known})

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def evaluate(topics: TopicSet, index: Optional[CooccurrenceIndex] = None, *, model_id: Optional[str] = None,
             variant: Optional[str] = None) -> MetricReport:
    """All four metrics for one topic set; C_v is ``None`` when no index is supplied."""
    topics.validate()
    coherence = cv(topics, index) if index is not None else None
    return MetricReport(
        cv=coherence,
        tu=tu(topics),
        tr=tr(topics),
        td=td(topics),
        K=topics.K,
        N=topics.N,
        index_id=index.config_id if index is not None else None,
        model_id=model_id,
        variant=variant,
        cv_negative=coherence is not None and coherence < 0,
        uncovered_words=uncovered_words(topics, index) if index is not None else [],
    )


_COLUMNS = (("cv", "C_v (0-1) ↑"), ("tu", "TU ↑"), ("tr", "TR (0-1) ↓"), ("td", "TD (0-1) ↑"))
_HIGHER_IS_BETTER = {"cv": True, "tu": True, "tr": False, "td": True}


def _fmt(value) -> str:
    if value is None:
        return "n/a"
    return f"{value:.4f}"


def render_table(rows: Sequence[tuple[str, MetricReport]], groups: Optional[Sequence[Sequence[int]]] = None) -> str:
    """Plain-text comparison table; the best value per column within each group is starred."""
    groups = groups or [list(range(len(rows)))]
    best: dict[tuple, set] = {}
    for g in groups:
        for key, _ in _COLUMNS:
            vals = [(i, getattr(rows[i][1], key)) for i in g if getattr(rows[i][1], key) is not None]
            if not vals:
                continue
            target = (max if _HIGHER_IS_BETTER[key] else min)(v for _, v in vals)
            best[key, tuple(g)] = {i for i, v in vals if v == target}

    label_w = max([len("run")] + [len(r[0]) for r in rows])
    widths = [max(len(h), 9) for _, h in _COLUMNS]
    head = "run".ljust(label_w) + "  " + "  ".join(h.rjust(w) for (_, h), w in zip(_COLUMNS, widths))
    lines = [head, "-" * len(head)]
    for g in groups:
        for i in g:
            label, rep = rows[i]
            cells = []
            for (key, _), w in zip(_COLUMNS, widths):
                mark = "*" if len(g) > 1 and i in best.get((key, tuple(g)), ()) else " "
                cells.append((_fmt(getattr(rep, key)) + mark).rjust(w))
            lines.append(label.ljust(label_w) + "  " + "  ".join(cells))
        lines.append("-" * len(head))
    if any(len(g) > 1 for g in groups):
        lines.append("* best value within the group")
    return "\n".join(lines) + "\n"
