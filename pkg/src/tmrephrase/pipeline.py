"""End-to-end experiment: rephrase, preprocess, fit, evaluate, compare.

Output directory layout::

    cache/      rephrase cache and per-variant rephrase records
    processed/  token lists per variant
    models/     fitted LDA models
    topics/     top-N keyword sets
    reports/    per-variant metric reports and the comparison (JSON + text)
"""
from __future__ import annotations

import json
import logging
import zlib
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import corpus as corpus_mod
from .cooccur import CooccurrenceIndex, build_index
from .lda import LdaModel, TopicSet, fit, infer_doc_topics, top_keywords
from .metrics import MetricReport, evaluate, render_table
from .preprocess import (PreprocessConfig, preprocess_corpus, read_reference_corpus, tokenize_reference,
                         write_processed)
from .rephrase import (SCHEMES, HttpProvider, IdentityProvider, ProviderConfig, RephraseCache, ReplayProvider,
                       failed_ids, rephrase_corpus, write_records)

logger = logging.getLogger(__name__)

LAYOUT_VERSION = 1
VARIANTS = ("none", *SCHEMES)
VARIANT_LABELS = {
    "none": "w/o rephr.",
    "general": "w/ general rephr.",
    "colloquial_to_formal": "w/ c-to-f rephr.",
}
PROVIDER_DEFAULTS = {
    "openai": {"kind": "openai"},
    "gemini": {
        "kind": "gemini",
        "endpoint": "https://generativelanguage.googleapis.com/v1beta",
        "model": "gemini-2.5-flash",
        "api_key_env": "GEMINI_API_KEY",
    },
}


class ConfigError(ValueError):
    pass


def _bool(value: str) -> bool:
    v = str(value).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {value!r}")


def _opt_float(value):
    return None if value in (None, "", "auto") else float(value)


def _opt_path(value):
    return None if value in (None, "") else Path(value)


@dataclass
class RunConfig:
    input: Path
    output: Path
    input_format: Optional[str] = None
    schemes: tuple = ("none",)
    provider: str = "identity"  # identity | replay | openai | gemini
    provider_settings: dict = field(default_factory=dict)
    cache: Optional[Path] = None
    fallback_to_original: bool = False
    stopwords: Optional[Path] = None
    lemmas: Optional[Path] = None
    keep_hashtags: bool = True
    keep_mentions: bool = True
    K: int = 8
    N: int = 15
    alpha: Optional[float] = None
    beta: float = 0.01
    iterations: int = 1000
    seed: int = 0
    min_doc_freq: int = 2
    reseed_per_variant: bool = False
    index: Optional[Path] = None
    reference_corpus: Optional[Path] = None
    window_size: int = 110
    epsilon: float = 1e-12
    samples: int = 5

    _CASTS = {
        "input": Path, "output": Path, "cache": _opt_path, "stopwords": _opt_path, "lemmas": _opt_path,
        "index": _opt_path, "reference_corpus": _opt_path, "fallback_to_original": _bool, "keep_hashtags": _bool,
        "keep_mentions": _bool, "K": int, "N": int, "alpha": _opt_float, "beta": float, "iterations": int,
        "seed": int, "min_doc_freq": int, "reseed_per_variant": _bool, "window_size": int,
        "epsilon": float, "samples": int,
    }

    def validate(self) -> None:
        if self.K < 2:
            raise ConfigError("K must be >= 2")
        if self.N < 1:
            raise ConfigError("N must be >= 1")
        bad = [s for s in self.schemes if s not in VARIANTS]
        if bad or not self.schemes:
            raise ConfigError(f"unknown scheme(s) {bad}; choose from {list(VARIANTS)}")
        if len(set(self.schemes)) != len(self.schemes):
            raise ConfigError("schemes must not repeat")
        if self.provider not in ("identity", "replay", *PROVIDER_DEFAULTS):
            raise ConfigError(f"unknown provider {self.provider!r}")
        if (self.index is None) == (self.reference_corpus is None):
            raise ConfigError("set exactly one of 'index' or 'reference_corpus'")
        for name in ("input", "index", "reference_corpus", "stopwords", "lemmas"):
            p = getattr(self, name)
            if p is not None and not p.exists():
                raise ConfigError(f"{name}: {p} does not exist")

    @classmethod
    def from_mapping(cls, values: dict, base_dir: Path = Path(".")) -> "RunConfig":
        kwargs: dict = {"provider_settings": {}}
        names = {f.name for f in fields(cls)}
        for key, raw in values.items():
            if key.startswith("provider."):
                kwargs["provider_settings"][key[len("provider."):]] = raw
            elif key == "schemes":
                kwargs["schemes"] = tuple(s.strip() for s in str(raw).split(",") if s.strip())
            elif key in names and key != "provider_settings":
                cast = cls._CASTS.get(key, str)
                try:
                    value = cast(raw)
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"{key}: {exc}") from None
                if isinstance(value, Path) and not value.is_absolute():
                    value = base_dir / value
                kwargs[key] = value
            else:
                raise ConfigError(f"unknown config key {key!r}")
        for required in ("input", "output"):
            if required not in kwargs:
                raise ConfigError(f"missing required key {required!r}")
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        return cls.from_mapping(read_config_file(path), base_dir=path.parent)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = str(v) if isinstance(v, Path) else v
        return out


def read_config_file(path, _seen=None) -> dict:
    """Parse flat ``key = value`` lines; ``include = other.cfg`` splices another file in place.

    Later keys override earlier ones. Included paths resolve relative to
    the including file, and path-valued keys in an included file are
    rewritten relative to that file.
    """
    path = Path(path).resolve()
    _seen = _seen or set()
    if path in _seen:
        raise ConfigError(f"include cycle at {path}")
    _seen = _seen | {path}
    values: dict = {}
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key == "include":
            inc = Path(value)
            inc = inc if inc.is_absolute() else path.parent / inc
            for k, v in read_config_file(inc, _seen).items():
                if RunConfig._CASTS.get(k) in (Path, _opt_path) and v and not Path(v).is_absolute():
                    v = str(inc.parent / v)
                values[k] = v
        else:
            values[key] = value
    return values


def make_provider(cfg: RunConfig):
    settings = dict(cfg.provider_settings)
    if cfg.provider == "identity":
        return IdentityProvider(settings.get("model", "identity"))
    if cfg.provider == "replay":
        if "model" not in settings:
            raise ConfigError("replay provider needs provider.model (the cached provider id)")
        return ReplayProvider(settings["model"])
    merged = {**PROVIDER_DEFAULTS[cfg.provider], **settings}
    return HttpProvider(ProviderConfig.from_mapping(merged))


def variant_seed(seed: int, variant: str, reseed: bool) -> int:
    if not reseed:
        return seed
    return int(np.random.SeedSequence([seed, zlib.crc32(variant.encode())]).generate_state(1)[0])


@dataclass
class VariantResult:
    variant: str
    model: LdaModel
    topics: TopicSet
    texts: dict  # doc id -> modeled text
    processed: list
    failures: list


def _dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")


def _run_variant(variant, docs, cfg, preprocess_cfg, provider, cache, out: Path, failures: list) -> VariantResult:
    if variant == "none":
        texts = {d.id: d.text for d in docs}
    else:
        limits = provider.config if isinstance(provider, HttpProvider) else None
        records = rephrase_corpus(
            docs, variant, provider, cache,
            max_in_flight=limits.max_in_flight if limits else 4,
            requests_per_minute=limits.requests_per_minute if limits else 0,
        )
        write_records(records, out / "cache" / f"records_{variant}.jsonl")
        failures.extend(failed_ids(records))
        texts = {}
        for doc, rec in zip(docs, records):
            if rec.ok:
                texts[doc.id] = rec.rephrased
            elif cfg.fallback_to_original:
                texts[doc.id] = doc.text
    modeled = [corpus_mod.RawDocument(d.id, texts[d.id]) for d in docs if d.id in texts]
    processed = preprocess_corpus(modeled, preprocess_cfg)
    write_processed(processed, out / "processed" / f"{variant}.jsonl")
    model = fit(processed, K=cfg.K, alpha=cfg.alpha, beta=cfg.beta, iterations=cfg.iterations,
                seed=variant_seed(cfg.seed, variant, cfg.reseed_per_variant), min_doc_freq=cfg.min_doc_freq)
    model.save(out / "models" / f"{variant}.json")
    topics = top_keywords(model, cfg.N)
    topics.save(out / "topics" / f"{variant}.json")
    return VariantResult(variant, model, topics, texts, processed, failures)


def run_pipeline(cfg: RunConfig) -> dict:
    """Run every requested variant with identical modeling settings and write the comparison.

    A failing variant is recorded under ``missing`` and does not stop the others.
    """
    cfg.validate()
    out = cfg.output
    for sub in ("cache", "processed", "models", "topics", "reports"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    docs, rejections = corpus_mod.ingest(cfg.input, cfg.input_format)
    if not docs:
        raise ValueError(f"{cfg.input} contains no usable documents")
    preprocess_cfg = PreprocessConfig.from_files(cfg.stopwords, cfg.lemmas, cfg.keep_hashtags, cfg.keep_mentions)
    needs_llm = any(v != "none" for v in cfg.schemes)
    provider = make_provider(cfg) if needs_llm else None
    cache = RephraseCache(cfg.cache or out / "cache" / "rephrase_cache.jsonl") if needs_llm else None

    shared_index = CooccurrenceIndex.load(cfg.index) if cfg.index is not None else None
    reference_tokens = None
    if cfg.reference_corpus is not None:
        reference_tokens = list(tokenize_reference(read_reference_corpus(cfg.reference_corpus), preprocess_cfg))

    results: dict[str, VariantResult] = {}
    reports: dict[str, MetricReport] = {}
    missing = []
    rephrase_failures: dict[str, list] = {}
    for variant in cfg.schemes:
        failures = rephrase_failures.setdefault(variant, []) if variant != "none" else []
        try:
            res = _run_variant(variant, docs, cfg, preprocess_cfg, provider, cache, out, failures)
            index = shared_index
            if index is None:
                words = {w for t in res.topics.words for w in t}
                index = build_index(reference_tokens, cfg.window_size, words, cfg.epsilon)
            report = evaluate(res.topics, index, model_id=res.model.model_id, variant=variant)
        except Exception as exc:  # noqa: BLE001 - a failed variant is reported, not fatal
            logger.exception("variant %s failed", variant)
            missing.append({"variant": variant, "error": f"{type(exc).__name__}: {exc}"})
            continue
        results[variant] = res
        reports[variant] = report
        _dump(report.to_dict(), out / "reports" / f"{variant}.json")

    comparison = {
        "format": "tmrephrase-comparison",
        "layout_version": LAYOUT_VERSION,
        "model": "LDA",
        "K": cfg.K,
        "N": cfg.N,
        "index_id": next(iter(reports.values())).index_id if reports else None,
        "documents": len(docs),
        "rejected": len(rejections),
        "rows": [
            {"variant": v, "label": f"LDA {VARIANT_LABELS[v]}", "metrics": reports[v].to_dict()}
            for v in cfg.schemes if v in reports
        ],
        "missing": missing,
        "rephrase_failures": rephrase_failures,
        "topics": {v: [list(t) for t in r.topics.words] for v, r in results.items()},
        "samples": _assignment_samples(docs, results, cfg.samples),
    }
    _dump(comparison, out / "reports" / "comparison.json")
    (out / "reports" / "comparison.txt").write_text(render_comparison(comparison), encoding="utf-8")
    return comparison


def _assignment_samples(docs, results: dict, limit: int) -> list:
    """Per-document view: each variant's text and its dominant topic's keywords."""
    if not results or limit <= 0:
        return []
    samples = []
    for doc in docs:
        if len(samples) >= limit:
            break
        if not all(doc.id in r.texts for r in results.values()):
            continue
        entry = {"id": doc.id, "original": doc.text, "variants": {}}
        for v, r in results.items():
            pdoc = next(p for p in r.processed if p.id == doc.id)
            dt = infer_doc_topics(r.model, pdoc)
            entry["variants"][v] = {
                "text": r.texts[doc.id],
                "dominant_topic": dt.dominant,
                "fallback": dt.fallback,
                "keywords": list(r.topics.words[dt.dominant]),
            }
        samples.append(entry)
    return samples


def report_rows(data: dict) -> list[tuple[str, MetricReport]]:
    """Flatten a comparison report or a single MetricReport JSON object into labelled rows."""
    if data.get("format") == "tmrephrase-comparison":
        return [(row["label"], MetricReport.from_dict(row["metrics"])) for row in data["rows"]]
    rep = MetricReport.from_dict(data)
    return [(rep.variant or rep.model_id or "report", rep)]


def render_comparison(data: dict) -> str:
    rows = report_rows(data)
    text = render_table(rows, [list(range(len(rows)))])
    header = f"LDA, K={data['K']}, N={data['N']}, index {data['index_id']}\n"
    for m in data.get("missing", []):
        text += f"MISSING {m['variant']}: {m['error']}\n"
    blocks = [header + text]
    for variant, topics in data.get("topics", {}).items():
        lines = [f"Top {data['N']} keywords, {VARIANT_LABELS.get(variant, variant)}"]
        lines += [f"  {k + 1}: {', '.join(words)}" for k, words in enumerate(topics)]
        blocks.append("\n".join(lines) + "\n")
    return "\n".join(blocks)


def compare(a: dict, b: dict) -> str:
    """Side-by-side table of two reports with a B - A delta row per aligned pair."""
    rows_a, rows_b = report_rows(a), report_rows(b)
    rows: list = [(f"A: {label}", rep) for label, rep in rows_a]
    rows += [(f"B: {label}", rep) for label, rep in rows_b]
    for (la, ra), (lb, rb) in zip(rows_a, rows_b):
        def diff(x, y):
            return None if x is None or y is None else y - x
        delta = MetricReport(cv=diff(ra.cv, rb.cv), tu=rb.tu - ra.tu, tr=rb.tr - ra.tr, td=rb.td - ra.td,
                             K=rb.K, N=rb.N)
        rows.append((f"delta: {lb} - {la}", delta))
    n = len(rows_a) + len(rows_b)
    groups = [list(range(n))] + [[i] for i in range(n, len(rows))]
    return render_table(rows, groups)
