import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tmrephrase.corpus import RawDocument
from tmrephrase.preprocess import (PreprocessConfig, ProcessedDocument, load_lemma_table, load_stopwords,
                                   preprocess, preprocess_corpus, read_processed, read_reference_corpus,
                                   tokenize_reference, write_processed)

ALLOWED = set("abcdefghijklmnopqrstuvwxyz0123456789_#@'")

SMALL = PreprocessConfig(
    stopword_list={"the", "be", "a", "is", "to", "and", "i", "my", "for", "it"},
    lemma_table={"vaccines": "vaccine", "were": "be", "shots": "shot", "masks": "mask", "was": "be"},
)


@pytest.fixture(scope="module")
def default_config():
    return PreprocessConfig.default()


def test_empty_text():
    assert preprocess("", SMALL) == []


def test_url_and_emoji_only(default_config):
    assert preprocess("https://t.co/xyz 😀!!!", default_config) == []


def test_lemma_then_stopword():
    cfg = PreprocessConfig(stopword_list={"the", "be"}, lemma_table={"vaccines": "vaccine", "were": "be"})
    assert preprocess("The vaccines WERE approved", cfg) == ["vaccine", "approved"]


# Hand-applied stage list on SMALL: URL, emoji, lower, punctuation, split, lemma, stopwords.
FIVE = [
    ("t1", "Got my 2nd SHOTS today!!! 💉 https://cdc.gov/x", ["got", "2nd", "shot", "today"]),
    ("t2", "Masks were useless... #NoMasks @CDCgov", ["mask", "useless", "#nomasks", "@cdcgov"]),
    ("t3", "i don't trust it, the vaccines was rushed", ["don't", "trust", "vaccine", "rushed"]),
    ("t4", "www.example.com 😷😷", []),
    ("t5", "Café-owners: boosters & re-opening", ["cafe", "owners", "boosters", "re", "opening"]),
]


def test_five_tweet_oracle():
    docs = [RawDocument(i, text) for i, text, _ in FIVE]
    out = preprocess_corpus(docs, SMALL)
    assert [d.id for d in out] == [i for i, _, _ in FIVE]
    assert [list(d.tokens) for d in out] == [expected for _, _, expected in FIVE]
    assert [list(d.tokens) for d in out] == [preprocess(d.text, SMALL) for d in docs]


def test_empty_documents_are_kept_and_flagged():
    out = preprocess_corpus([RawDocument("1", "hello world"), RawDocument("2", "http://x.y/z")], SMALL)
    assert [d.empty for d in out] == [False, True]


def test_permuted_input_gives_permuted_output():
    docs = [RawDocument(i, text) for i, text, _ in FIVE]
    shuffled = docs[:]
    random.Random(3).shuffle(shuffled)
    a = {d.id: d.tokens for d in preprocess_corpus(docs, SMALL)}
    b = preprocess_corpus(shuffled, SMALL)
    assert [d.id for d in b] == [d.id for d in shuffled]
    assert {d.id: d.tokens for d in b} == a


def test_sigils_kept_by_default_and_optionally_stripped():
    assert preprocess("#Covid @who", SMALL) == ["#covid", "@who"]
    cfg = PreprocessConfig(keep_hashtags=False, keep_mentions=False)
    assert preprocess("#Covid @who", cfg) == ["covid", "who"]


def test_curly_apostrophe_normalised():
    assert preprocess("Don’t", PreprocessConfig()) == ["don't"]


def test_lemma_chain_rejected():
    with pytest.raises(ValueError, match="not closed"):
        PreprocessConfig(lemma_table={"a": "b", "b": "c"})


def test_lemma_with_bad_characters_rejected():
    with pytest.raises(ValueError):
        PreprocessConfig(lemma_table={"x": "two words"})


def test_bundled_tables_load(default_config):
    assert "the" in default_config.stopword_list
    assert default_config.lemma_table["vaccines"] == "vaccine"
    assert default_config.lemma_table["children"] == "child"


def test_table_files(tmp_path):
    sw = tmp_path / "sw.txt"
    sw.write_text("The\n\nAND\n", encoding="utf-8")
    lm = tmp_path / "lm.tsv"
    lm.write_text("Dogs\tdog\n\ncats\tcat\n", encoding="utf-8")
    assert load_stopwords(sw) == {"the", "and"}
    assert load_lemma_table(lm) == {"dogs": "dog", "cats": "cat"}
    cfg = PreprocessConfig.from_files(sw, lm)
    assert preprocess("the dogs and cats", cfg) == ["dog", "cat"]

    bad = tmp_path / "bad.tsv"
    bad.write_text("dogs dog\n", encoding="utf-8")
    with pytest.raises(ValueError, match="bad.tsv:1"):
        load_lemma_table(bad)


def test_config_id_tracks_content():
    assert PreprocessConfig().config_id == PreprocessConfig().config_id
    assert PreprocessConfig().config_id != PreprocessConfig(keep_hashtags=False).config_id
    assert PreprocessConfig().config_id != PreprocessConfig(stopword_list={"x"}).config_id


def test_processed_jsonl_round_trip(tmp_path):
    docs = [ProcessedDocument("1", ("a", "b")), ProcessedDocument("2", ())]
    write_processed(docs, tmp_path / "p.jsonl")
    lines = [json.loads(ln) for ln in (tmp_path / "p.jsonl").read_text(encoding="utf-8").splitlines()]
    assert lines == [{"id": "1", "tokens": ["a", "b"], "empty": False}, {"id": "2", "tokens": [], "empty": True}]
    assert read_processed(tmp_path / "p.jsonl") == docs


def test_read_processed_requires_keys(tmp_path):
    (tmp_path / "p.jsonl").write_text('{"id": "1"}\n', encoding="utf-8")
    with pytest.raises(ValueError, match=":1:"):
        read_processed(tmp_path / "p.jsonl")


def test_reference_corpus_file_and_directory(tmp_path):
    (tmp_path / "d").mkdir()
    (tmp_path / "d" / "b.txt").write_text("second doc\n", encoding="utf-8")
    (tmp_path / "d" / "a.txt").write_text("first doc\n\nanother one\n", encoding="utf-8")
    assert [ln.strip() for ln in read_reference_corpus(tmp_path / "d")] == ["first doc", "another one",
                                                                             "second doc"]
    assert list(tokenize_reference(["A b"], None)) == [["A", "b"]]
    assert list(tokenize_reference(["The Masks"], SMALL)) == [["mask"]]


fragments = st.one_of(
    st.text(st.characters(blacklist_categories=("Cs",)), max_size=6),
    st.sampled_from(["#", "@", "'", "\u2019", " ", "http://x.co/a ", "www.q.org ", "\U0001f600", "Caf\u00e9", "MASKS",
                     "were"]),
)
tweet_text = st.lists(fragments, max_size=15).map("".join)


@settings(max_examples=300, deadline=None)
@given(tweet_text)
def test_idempotent(text):
    for cfg in (SMALL, PreprocessConfig(keep_hashtags=False)):
        tokens = preprocess(text, cfg)
        assert preprocess(" ".join(tokens), cfg) == tokens


@settings(max_examples=300, deadline=None)
@given(tweet_text)
def test_tokens_within_permitted_class(text):
    for tok in preprocess(text, SMALL):
        assert tok and set(tok) <= ALLOWED
        assert tok == tok.lower()
        assert tok not in SMALL.stopword_list


@settings(max_examples=100, deadline=None)
@given(tweet_text)
def test_deterministic(text):
    assert preprocess(text, SMALL) == preprocess(text, SMALL)
