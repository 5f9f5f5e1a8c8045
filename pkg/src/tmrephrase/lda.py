"""Latent Dirichlet allocation fitted by collapsed Gibbs sampling.

Every document owns a random stream derived from ``(seed, doc id)`` and
documents are swept in sorted-id order, so a fit depends only on the set
of documents and the seed, never on input order.
"""
from __future__ import annotations

import hashlib
import json
import logging
from collections import Counter
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numba import njit
from scipy.special import gammaln

logger = logging.getLogger(__name__)


class Vocabulary:
    """Bijection between tokens and contiguous ids ``0..V-1``."""

    def __init__(self, tokens: Sequence[str]):
        self.tokens = list(tokens)
        self.index = {tok: i for i, tok in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise ValueError("vocabulary tokens must be distinct")

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token) -> bool:
        return token in self.index

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.tokens == other.tokens

    def encode(self, tokens) -> list[int]:
        return [self.index[t] for t in tokens if t in self.index]


def build_vocabulary(corpus, min_doc_freq: int = 2) -> Vocabulary:
    """Keep tokens found in at least ``min_doc_freq`` documents.

    Ids are assigned by descending corpus frequency, then token.
    """
    if not corpus:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    doc_freq: Counter = Counter()
    term_freq: Counter = Counter()
    for doc in corpus:
        doc_freq.update(set(doc.tokens))
        term_freq.update(doc.tokens)
    kept = [t for t, df in doc_freq.items() if df >= min_doc_freq]
    if not kept:
        raise ValueError(f"no token occurs in >= {min_doc_freq} documents")
    kept.sort(key=lambda t: (-term_freq[t], t))
    return Vocabulary(kept)


def doc_seed(seed: int, doc_id: str) -> np.random.SeedSequence:
    digest = hashlib.blake2b(doc_id.encode("utf-8"), digest_size=8).digest()
    return np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, int.from_bytes(digest, "little")])


@njit(cache=True)
def _draw(p, u):
    # p holds cumulative unnormalised weights; u in [0, 1)
    target = u * p[p.shape[0] - 1]
    k = 0
    while k < p.shape[0] - 1 and p[k] <= target:
        k += 1
    return k


@njit(cache=True)
def _sweep(words, offsets, z, nkw, ndk, nk, alpha, beta, vbeta, uniforms):
    n_topics = nk.shape[0]
    p = np.empty(n_topics)
    for d in range(offsets.shape[0] - 1):
        for i in range(offsets[d], offsets[d + 1]):
            w = words[i]
            k = z[i]
            nkw[k, w] -= 1
            ndk[d, k] -= 1
            nk[k] -= 1
            acc = 0.0
            for t in range(n_topics):
                acc += (ndk[d, t] + alpha) * (nkw[t, w] + beta) / (nk[t] + vbeta)
                p[t] = acc
            k = _draw(p, uniforms[i])
            z[i] = k
            nkw[k, w] += 1
            ndk[d, k] += 1
            nk[k] += 1


@njit(cache=True)
def _fold_in_sweep(words, z, ndk, phi, alpha, uniforms):
    n_topics = phi.shape[0]
    p = np.empty(n_topics)
    for i in range(words.shape[0]):
        w = words[i]
        ndk[z[i]] -= 1
        acc = 0.0
        for t in range(n_topics):
            acc += (ndk[t] + alpha) * phi[t, w]
            p[t] = acc
        k = _draw(p, uniforms[i])
        z[i] = k
        ndk[k] += 1


@dataclass
class LdaModel:
    K: int
    alpha: float
    beta: float
    vocabulary: Vocabulary
    topic_word_counts: np.ndarray  # K x V
    doc_topic_counts: np.ndarray  # D x K, rows in input order
    doc_ids: list
    seed: int
    iterations: int
    log_likelihood: float = float("nan")

    @property
    def V(self) -> int:
        return len(self.vocabulary)

    @property
    def topic_totals(self) -> np.ndarray:
        return self.topic_word_counts.sum(axis=1)

    def topic_word_probs(self) -> np.ndarray:
        totals = self.topic_totals[:, None]
        return (self.topic_word_counts + self.beta) / (totals + self.V * self.beta)

    @property
    def model_id(self) -> str:
        h = hashlib.sha256()
        h.update(json.dumps([self.K, self.alpha, self.beta, self.seed, self.iterations]).encode())
        h.update("\n".join(self.vocabulary.tokens).encode("utf-8"))
        h.update(np.ascontiguousarray(self.topic_word_counts, dtype=np.int64).tobytes())
        return f"lda-K{self.K}-{h.hexdigest()[:12]}"

    def to_dict(self) -> dict:
        return {
            "format": "tmrephrase-lda",
            "version": 1,
            "K": self.K,
            "alpha": self.alpha,
            "beta": self.beta,
            "seed": self.seed,
            "iterations": self.iterations,
            "log_likelihood": self.log_likelihood,
            "vocabulary": self.vocabulary.tokens,
            "doc_ids": self.doc_ids,
            "topic_word_counts": self.topic_word_counts.tolist(),
            "doc_topic_counts": self.doc_topic_counts.tolist(),
        }

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "LdaModel":
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
        if d.get("format") != "tmrephrase-lda":
            raise ValueError(f"{path} is not a saved LDA model")
        K, V = d["K"], len(d["vocabulary"])
        return cls(
            K=K,
            alpha=d["alpha"],
            beta=d["beta"],
            vocabulary=Vocabulary(d["vocabulary"]),
            topic_word_counts=np.array(d["topic_word_counts"], dtype=np.int64).reshape(K, V),
            doc_topic_counts=np.array(d["doc_topic_counts"], dtype=np.int64).reshape(-1, K),
            doc_ids=list(d["doc_ids"]),
            seed=d["seed"],
            iterations=d["iterations"],
            log_likelihood=d.get("log_likelihood", float("nan")),
        )


def _log_likelihood(nkw: np.ndarray, beta: float) -> float:
    """log p(words | assignments) with topic-word distributions integrated out."""
    K, V = nkw.shape
    nk = nkw.sum(axis=1)
    return float(
        K * (gammaln(V * beta) - V * gammaln(beta))
        + gammaln(nkw + beta).sum()
        - gammaln(nk + V * beta).sum()
    )


def fit(corpus, K: int = 8, alpha: Optional[float] = None, beta: float = 0.01, iterations: int = 1000,
        seed: int = 0, vocabulary: Optional[Vocabulary] = None, min_doc_freq: int = 2) -> LdaModel:
    """Fit LDA to ProcessedDocuments.

    ``alpha`` defaults to ``50 / K``. Out-of-vocabulary tokens are dropped;
    documents left empty keep a zero row in ``doc_topic_counts``.
    """
    if not corpus:
        raise ValueError("cannot fit an empty corpus")
    if K < 2:
        raise ValueError("K must be >= 2")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    alpha = 50.0 / K if alpha is None else float(alpha)
    if alpha <= 0 or beta <= 0:
        raise ValueError("alpha and beta must be positive")
    ids = [doc.id for doc in corpus]
    if len(set(ids)) != len(ids):
        raise ValueError("document ids must be unique")
    vocab = vocabulary if vocabulary is not None else build_vocabulary(corpus, min_doc_freq)
    V = len(vocab)

    order = sorted(range(len(corpus)), key=lambda i: ids[i])
    encoded = [np.array(vocab.encode(corpus[i].tokens), dtype=np.int64) for i in order]
    nonempty = sum(1 for e in encoded if e.size)
    if nonempty < K:
        raise ValueError(f"need at least K={K} documents with in-vocabulary tokens, got {nonempty}")

    lengths = np.array([e.size for e in encoded], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
    words = np.concatenate(encoded) if encoded else np.empty(0, dtype=np.int64)
    rngs = [np.random.default_rng(doc_seed(seed, ids[i])) for i in order]

    z = np.empty(words.size, dtype=np.int64)
    for d, rng in enumerate(rngs):
        z[offsets[d]:offsets[d + 1]] = rng.integers(0, K, size=lengths[d])
    nkw = np.zeros((K, V), dtype=np.int64)
    ndk = np.zeros((len(order), K), dtype=np.int64)
    np.add.at(nkw, (z, words), 1)
    np.add.at(ndk, (np.repeat(np.arange(len(order)), lengths), z), 1)
    nk = nkw.sum(axis=1)

    uniforms = np.empty(words.size)
    trace = logger.isEnabledFor(logging.DEBUG)
    for it in range(iterations):
        for d, rng in enumerate(rngs):
            if lengths[d]:
                uniforms[offsets[d]:offsets[d + 1]] = rng.random(lengths[d])
        _sweep(words, offsets, z, nkw, ndk, nk, alpha, beta, V * beta, uniforms)
        if trace:
            logger.debug("sweep %d log-likelihood %.4f", it + 1, _log_likelihood(nkw, beta))

    inverse = np.empty(len(order), dtype=np.int64)
    inverse[np.array(order, dtype=np.int64)] = np.arange(len(order))
    model = LdaModel(
        K=K, alpha=alpha, beta=beta, vocabulary=vocab, topic_word_counts=nkw,
        doc_topic_counts=ndk[inverse], doc_ids=ids, seed=seed, iterations=iterations,
        log_likelihood=_log_likelihood(nkw, beta),
    )
    logger.info("fitted %s: D=%d V=%d tokens=%d loglik=%.2f", model.model_id, len(ids), V,
                words.size, model.log_likelihood)
    return model


@dataclass(frozen=True)
class TopicSet:
    """K ordered top-word lists, optionally with per-word weights."""

    words: tuple
    weights: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "words", tuple(tuple(t) for t in self.words))
        if self.weights is not None:
            object.__setattr__(self, "weights", tuple(tuple(float(x) for x in t) for t in self.weights))
            if [len(t) for t in self.weights] != [len(t) for t in self.words]:
                raise ValueError("weights must align with words")

    @property
    def K(self) -> int:
        return len(self.words)

    @property
    def N(self) -> int:
        return len(self.words[0]) if self.words else 0

    def validate(self) -> None:
        if not self.words:
            raise ValueError("TopicSet has no topics")
        n = len(self.words[0])
        for k, topic in enumerate(self.words):
            if len(topic) != n or n == 0:
                raise ValueError(f"topic {k} has {len(topic)} words; expected {n} (> 0)")
            if len(set(topic)) != len(topic):
                dup = sorted(w for w, c in Counter(topic).items() if c > 1)
                raise ValueError(f"topic {k} repeats word(s) {dup}")

    def to_dict(self) -> dict:
        if self.weights is None:
            return {"topics": [[{"word": w} for w in t] for t in self.words]}
        return {"topics": [[{"word": w, "weight": x} for w, x in zip(t, ws)]
                           for t, ws in zip(self.words, self.weights)]}

    @classmethod
    def from_dict(cls, data: dict) -> "TopicSet":
        """Accept ``{"topics": [[{"word", "weight"}...]...]}``; bare strings are allowed as entries."""
        words, weights, weighted = [], [], True
        for topic in data["topics"]:
            ws, xs = [], []
            for entry in topic:
                if isinstance(entry, str):
                    ws.append(entry)
                    weighted = False
                else:
                    ws.append(entry["word"])
                    if entry.get("weight") is None:
                        weighted = False
                    else:
                        xs.append(entry["weight"])
            words.append(ws)
            weights.append(xs)
        return cls(words, weights if weighted else None)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, ensure_ascii=False, indent=1)

    @classmethod
    def load(cls, path) -> "TopicSet":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def top_keywords(model: LdaModel, N: int = 15) -> TopicSet:
    """Top-N words per topic by smoothed probability; ties go to the lexicographically smaller word."""
    if N < 1 or N > model.V:
        raise ValueError(f"N must be in [1, V={model.V}], got {N}")
    probs = model.topic_word_probs()
    tokens = model.vocabulary.tokens
    words, weights = [], []
    for k in range(model.K):
        counts = model.topic_word_counts[k]
        # rank on integer counts so equal weights are exact ties
        ranked = sorted(range(model.V), key=lambda w: (-counts[w], tokens[w]))[:N]
        words.append([tokens[w] for w in ranked])
        weights.append([float(probs[k, w]) for w in ranked])
    return TopicSet(words, weights)


@dataclass(frozen=True)
class DocTopics:
    probabilities: np.ndarray
    dominant: int
    fallback: bool


def infer_doc_topics(model: LdaModel, doc, iterations: int = 100) -> DocTopics:
    """Fold-in Gibbs estimate of one document's topic mixture.

    Topic-word distributions stay fixed at the fitted smoothed estimates.
    A document without in-vocabulary tokens gets the uniform vector and
    ``fallback=True``.
    """
    words = np.array(model.vocabulary.encode(doc.tokens), dtype=np.int64)
    if words.size == 0:
        uniform = np.full(model.K, 1.0 / model.K)
        return DocTopics(uniform, 0, True)
    rng = np.random.default_rng(doc_seed(model.seed, doc.id))
    phi = model.topic_word_probs()
    z = rng.integers(0, model.K, size=words.size).astype(np.int64)
    ndk = np.bincount(z, minlength=model.K).astype(np.int64)
    for _ in range(iterations):
        _fold_in_sweep(words, z, ndk, phi, model.alpha, rng.random(words.size))
    theta = (ndk + model.alpha) / (words.size + model.K * model.alpha)
    theta = theta / theta.sum()
    return DocTopics(theta, int(np.argmax(theta)), False)
