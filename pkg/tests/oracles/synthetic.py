"""Synthetic corpora drawn from known topic-word distributions."""
import numpy as np

from tmrephrase.preprocess import ProcessedDocument

VOCAB_A = [f"alpha{i:02d}" for i in range(20)]
VOCAB_B = [f"bravo{i:02d}" for i in range(20)]


def two_topic_corpus(n_docs=200, doc_len=(8, 20), seed=0):
    """Each document draws all its words from one of two disjoint Zipf-weighted vocabularies.

    Returns (documents, labels) with label 0 for vocabulary A and 1 for B.
    """
    rng = np.random.default_rng(seed)
    weights = 1.0 / np.arange(1, 21)
    weights /= weights.sum()
    docs, labels = [], []
    for d in range(n_docs):
        label = d % 2
        vocab = VOCAB_A if label == 0 else VOCAB_B
        n = int(rng.integers(doc_len[0], doc_len[1] + 1))
        tokens = tuple(vocab[i] for i in rng.choice(20, size=n, p=weights))
        docs.append(ProcessedDocument(f"doc{d:03d}", tokens))
        labels.append(label)
    return docs, labels


def keyword_purity(topics):
    """Mean over topics of the share of top words belonging to that topic's majority vocabulary."""
    a = set(VOCAB_A)
    shares = []
    for words in topics.words:
        in_a = sum(w in a for w in words)
        shares.append(max(in_a, len(words) - in_a) / len(words))
    return sum(shares) / len(shares)
