"""Acceptance suite. Each test carries ``acceptance(n)``; the terminal summary prints one line per criterion."""
import hashlib
import json
import random
import shutil
import time

import pytest

from oracles import cv_oracle
from oracles.diversity_oracle import tu_tr_td
from oracles.synthetic import keyword_purity, two_topic_corpus
from tmrephrase.cli import main
from tmrephrase.cooccur import build_index
from tmrephrase.lda import TopicSet, fit, top_keywords
from tmrephrase.metrics import cv, distinct_word_ratio, npmi, occurrence_counts, td, tr, tu
from tmrephrase.rephrase import SCHEMES, render_prompt

TOL = 0.02


@pytest.mark.acceptance(1)
def test_diversity_metrics_match_brute_force_oracle():
    rnd = random.Random(20240101)
    vocab = [f"v{i}" for i in range(20)]
    cases = []
    for _ in range(1000):
        K, N = rnd.randint(2, 6), rnd.randint(2, 8)
        pool = vocab[:rnd.randint(N, 20)]
        cases.append([rnd.sample(pool, N) for _ in range(K)])
    start = time.perf_counter()
    for topics in cases:
        ts = TopicSet(topics)
        assert (tu(ts), tr(ts), td(ts)) == tu_tr_td(topics), topics
    elapsed = time.perf_counter() - start
    print(f"1000 topic sets in {elapsed:.3f} s")
    assert elapsed < 5.0


@pytest.mark.acceptance(2)
@pytest.mark.parametrize("K, N", [(2, 2), (3, 5), (8, 15)])
def test_distinctness_extremes(K, N):
    distinct = TopicSet([[f"w{k}_{n}" for n in range(N)] for k in range(K)])
    assert (tu(distinct), tr(distinct), td(distinct)) == (1.0, 0.0, 1.0)
    identical = TopicSet([[f"w{n}" for n in range(N)]] * K)
    assert (tu(identical), tr(identical), td(identical)) == (1 / K, 1.0, 0.0)


@pytest.mark.acceptance(2)
def test_fully_distinct_reference_row():
    # a fully distinct K=8, N=15 keyword table scores (TU, TR, TD) = (1, 0, 1)
    rows = TopicSet([[f"t{k}w{n}" for n in range(15)] for k in range(8)])
    assert (tu(rows), tr(rows), td(rows)) == (1, 0, 1)


def _keyword_tables(data_dir):
    return json.loads((data_dir / "lda_table_keywords.json").read_text(encoding="utf-8"))


def _diagnostic(ts: TopicSet) -> str:
    counts = occurrence_counts(ts)
    repeated = {w: c for w, c in counts.items() if c > 1}
    slots = sum(c for c in repeated.values())
    return (f"{len(counts)} distinct words over {ts.K * ts.N} slots; {len(repeated)} words repeat, filling "
            f"{slots} slots; unique-slot share {td(ts):.4f}, distinct-word ratio {distinct_word_ratio(ts):.4f}")


@pytest.mark.acceptance(3)
@pytest.mark.parametrize("variant", ["none", "general", "colloquial_to_formal"])
@pytest.mark.parametrize("metric", ["tu", "tr", "td"])
def test_published_lda_keyword_tables(data_dir, variant, metric):
    tables = _keyword_tables(data_dir)
    ts = TopicSet(tables[variant])
    ts.validate()
    assert (ts.K, ts.N) == (8, 15)
    start = time.perf_counter()
    got = {"tu": tu, "tr": tr, "td": td}[metric](ts)
    elapsed = time.perf_counter() - start
    expected = dict(zip(("cv", "tu", "tr", "td"), tables["table3_lda"][variant]))[metric]
    print(f"{variant} {metric}: computed {got:.4f}, published {expected:.4f}; {_diagnostic(ts)}")
    assert elapsed < 1.0
    assert abs(got - expected) <= TOL, (
        f"{metric} {got:.4f} vs published {expected:.4f} (|diff| {abs(got - expected):.4f} > {TOL}); "
        + _diagnostic(ts)
    )


@pytest.mark.acceptance(4)
def test_npmi_and_cv_hand_oracle():
    index = build_index([["a", "b", "c"]], window_size=2)
    assert abs(npmi(index, "a", "b")) <= 1e-9
    expected = cv_oracle.cv([["a", "b"]], [["a", "b", "c"]], 2)
    assert abs(cv(TopicSet([["a", "b"]]), index) - expected) <= 1e-6
    assert abs(expected - 0.5) <= 1e-12


@pytest.mark.acceptance(5)
def test_lda_recovers_two_disjoint_topics():
    docs, _ = two_topic_corpus(n_docs=200, seed=0)
    start = time.perf_counter()
    model = fit(docs, K=2, iterations=1000, seed=0)
    elapsed = time.perf_counter() - start
    purity = keyword_purity(top_keywords(model, 15))
    print(f"purity {purity:.3f}, 1000 sweeps in {elapsed:.2f} s")
    assert purity >= 0.9
    assert elapsed < 60.0


GOLDEN = {
    "general": "021a9e35abe37cfe6d3bd1e796ff9926e4fc124e35b0a6a67bd4b8397d4feeb1",
    "colloquial_to_formal": "78d1b7a5e8dfc7bd9f1b993743da18619e4d8e497700e600d213d62a64995348",
}


@pytest.mark.acceptance(6)
@pytest.mark.parametrize("scheme", sorted(GOLDEN))
def test_prompt_golden_digest(scheme):
    rendered = render_prompt(scheme, "[Original Tweet]")
    template = rendered[: -len("\n[Original Tweet]")]
    assert template == SCHEMES[scheme]
    assert hashlib.sha256(template.encode("utf-8")).hexdigest() == GOLDEN[scheme]


def _run_config(tmp_path, data_dir, out):
    cache = tmp_path / "cache.jsonl"
    if not cache.exists():
        shutil.copy(data_dir / "ctof_cache.jsonl", cache)
    cfg = tmp_path / f"{out}.cfg"
    cfg.write_text(
        "\n".join([
            f"input = {data_dir / 'tweets.jsonl'}",
            f"output = {tmp_path / out}",
            f"reference_corpus = {data_dir / 'reference.txt'}",
            f"cache = {cache}",
            "schemes = none, colloquial_to_formal",
            "provider = replay",
            "provider.model = gemini-2.5-flash",
            "window_size = 10",
            "K = 3",
            "N = 5",
            "iterations = 300",
            "seed = 7",
        ]) + "\n",
        encoding="utf-8",
    )
    return cfg


@pytest.mark.acceptance(7)
def test_run_is_byte_reproducible(tmp_path, data_dir, capsys):
    for out in ("first", "second"):
        assert main(["run", "--config", str(_run_config(tmp_path, data_dir, out))]) == 0
    capsys.readouterr()
    for sub in ("reports", "topics", "models", "processed"):
        names = sorted(p.name for p in (tmp_path / "first" / sub).iterdir())
        assert names == sorted(p.name for p in (tmp_path / "second" / sub).iterdir())
        for name in names:
            a = (tmp_path / "first" / sub / name).read_bytes()
            b = (tmp_path / "second" / sub / name).read_bytes()
            assert a == b, f"{sub}/{name} differs between runs"


@pytest.mark.acceptance(8)
def test_run_emits_comparison_table(tmp_path, data_dir, capsys):
    assert main(["run", "--config", str(_run_config(tmp_path, data_dir, "out"))]) == 0
    capsys.readouterr()
    reports = tmp_path / "out" / "reports"
    data = json.loads((reports / "comparison.json").read_text(encoding="utf-8"))
    assert [r["label"] for r in data["rows"]] == ["LDA w/o rephr.", "LDA w/ c-to-f rephr."]
    for row in data["rows"]:
        assert {"cv", "tu", "tr", "td"} <= set(row["metrics"])
    header = (reports / "comparison.txt").read_text(encoding="utf-8").splitlines()[1]
    for column in ("C_v (0-1) ↑", "TU ↑", "TR (0-1) ↓", "TD (0-1) ↑"):
        assert column in header
