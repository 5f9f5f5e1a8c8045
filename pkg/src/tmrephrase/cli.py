"""Command line entry point: ``tmrephrase <command> ...``.

Exit codes: 0 success, 1 usage error, 2 stage failure. Errors are also
written to stderr as a one-line JSON object.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .cooccur import DEFAULT_EPSILON, DEFAULT_WINDOW, CooccurrenceIndex, build_index
from .corpus import ingest, stats
from .lda import TopicSet, fit, top_keywords
from .metrics import evaluate
from .pipeline import ConfigError, RunConfig, compare, make_provider, run_pipeline
from .preprocess import (PreprocessConfig, preprocess_corpus, read_processed, read_reference_corpus,
                         tokenize_reference, write_processed)
from .rephrase import SCHEMES, RephraseCache, failed_ids, rephrase_corpus, write_records

EXIT_USAGE = 1
EXIT_STAGE = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _fail(kind: str, message: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    return code


def _add_preprocess_flags(p):
    p.add_argument("--stopwords", type=Path, help="stopword file, one word per line (default: bundled English list)")
    p.add_argument("--lemmas", type=Path, help="lemma table, 'surface<TAB>lemma' per line (default: bundled)")
    p.add_argument("--strip-hashtags", action="store_true", help="drop '#' sigils instead of keeping them")
    p.add_argument("--strip-mentions", action="store_true", help="drop '@' sigils instead of keeping them")


def _preprocess_config(args) -> PreprocessConfig:
    return PreprocessConfig.from_files(args.stopwords, args.lemmas, not args.strip_hashtags,
                                       not args.strip_mentions)


def _print_json(obj) -> None:
    sys.stdout.write(json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n")


def cmd_stats(args) -> int:
    docs, rejections = ingest(args.input, args.format)
    out = stats(docs).to_dict()
    _print_json(out)
    if rejections:
        logging.getLogger(__name__).info("%d record(s) rejected", len(rejections))
    return 0


def cmd_preprocess(args) -> int:
    docs, _ = ingest(args.input, args.format)
    processed = preprocess_corpus(docs, _preprocess_config(args))
    write_processed(processed, args.output)
    print(args.output)
    return 0


def cmd_rephrase(args) -> int:
    docs, _ = ingest(args.input, args.format)
    settings = dict(kv.split("=", 1) for kv in args.provider_setting)
    cfg = RunConfig(input=args.input, output=Path("."), schemes=(args.scheme,), provider=args.provider,
                    provider_settings=settings)
    provider = make_provider(cfg)
    cache = RephraseCache(args.cache)
    records = rephrase_corpus(docs, args.scheme, provider, cache, max_in_flight=args.max_in_flight,
                              requests_per_minute=args.rpm)
    write_records(records, args.output)
    failed = failed_ids(records)
    _print_json({"records": len(records), "failed": failed, "output": str(args.output)})
    return EXIT_STAGE if failed and args.strict else 0


def cmd_build_index(args) -> int:
    config = None if args.raw_tokens else _preprocess_config(args)
    words = None
    if args.filter is not None:
        if args.filter.suffix == ".json":
            words = {w for t in TopicSet.load(args.filter).words for w in t}
        else:
            words = {ln.strip() for ln in args.filter.read_text(encoding="utf-8").splitlines() if ln.strip()}
    index = build_index(tokenize_reference(read_reference_corpus(args.corpus), config), args.window, words,
                        args.epsilon)
    index.save(args.output)
    _print_json({"output": str(args.output), "config_id": index.config_id, "total_windows": index.total_windows,
                 "words": len(index.word_window_counts), "pairs": len(index.pair_window_counts)})
    return 0


def cmd_fit(args) -> int:
    docs = read_processed(args.input)
    model = fit(docs, K=args.k, alpha=args.alpha, beta=args.beta, iterations=args.iterations, seed=args.seed,
                min_doc_freq=args.min_doc_freq)
    model.save(args.model_out)
    topics = top_keywords(model, args.n)
    topics.save(args.topics_out)
    _print_json({"model": str(args.model_out), "topics": str(args.topics_out), "model_id": model.model_id})
    return 0


def cmd_evaluate(args) -> int:
    topics = TopicSet.load(args.topics)
    index = CooccurrenceIndex.load(args.index) if args.index else None
    report = evaluate(topics, index, model_id=args.model_id, variant=args.variant)
    sys.stdout.write(report.to_json() + "\n")
    return 0


def cmd_compare(args) -> int:
    a = json.loads(args.a.read_text(encoding="utf-8"))
    b = json.loads(args.b.read_text(encoding="utf-8"))
    sys.stdout.write(compare(a, b))
    return 0


def cmd_run(args) -> int:
    cfg = RunConfig.load(args.config)
    if args.output is not None:
        cfg.output = args.output
    if args.reseed_per_variant:
        cfg.reseed_per_variant = True
    try:
        cfg.validate()
    except ConfigError as exc:
        raise UsageError(str(exc)) from None
    report = run_pipeline(cfg)
    reports = cfg.output / "reports"
    for name in ("comparison.json", "comparison.txt"):
        print(reports / name)
    return EXIT_STAGE if report["missing"] else 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tmrephrase", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG logging")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("stats", help="word-count statistics of a raw dataset (JSON on stdout)")
    p.add_argument("input", type=Path)
    p.add_argument("--format", choices=("jsonl", "csv"))
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("preprocess", help="clean and tokenize a raw dataset into processed JSONL")
    p.add_argument("input", type=Path)
    p.add_argument("-o", "--output", type=Path, required=True)
    p.add_argument("--format", choices=("jsonl", "csv"))
    _add_preprocess_flags(p)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("rephrase", help="rephrase a raw dataset with one prompt scheme")
    p.add_argument("input", type=Path)
    p.add_argument("-o", "--output", type=Path, required=True, help="records JSONL")
    p.add_argument("--format", choices=("jsonl", "csv"))
    p.add_argument("--scheme", choices=sorted(SCHEMES), required=True)
    p.add_argument("--provider", choices=("identity", "replay", "openai", "gemini"), default="identity")
    p.add_argument("--provider-setting", action="append", default=[], metavar="KEY=VALUE",
                   help="provider option, e.g. model=gemini-2.5-flash (repeatable)")
    p.add_argument("--cache", type=Path, required=True, help="append-only cache JSONL")
    p.add_argument("--max-in-flight", type=int, default=4)
    p.add_argument("--rpm", type=int, default=0, help="requests-per-minute cap (0 = none)")
    p.add_argument("--strict", action="store_true", help="exit 2 if any document failed")
    p.set_defaults(func=cmd_rephrase)

    p = sub.add_parser("build-index", help="build a sliding-window co-occurrence index")
    p.add_argument("corpus", type=Path, help="text file (one document per line) or directory of *.txt")
    p.add_argument("-o", "--output", type=Path, required=True)
    p.add_argument("--window", type=int, default=DEFAULT_WINDOW)
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    p.add_argument("--filter", type=Path, help="topics JSON or word list restricting counted words")
    p.add_argument("--raw-tokens", action="store_true", help="split on whitespace instead of preprocessing")
    _add_preprocess_flags(p)
    p.set_defaults(func=cmd_build_index)

    p = sub.add_parser("fit", help="fit LDA to a processed corpus and export top keywords")
    p.add_argument("input", type=Path, help="processed JSONL")
    p.add_argument("--model-out", type=Path, required=True)
    p.add_argument("--topics-out", type=Path, required=True)
    p.add_argument("-k", type=int, default=8)
    p.add_argument("-n", type=int, default=15)
    p.add_argument("--alpha", type=float, help="default 50/K")
    p.add_argument("--beta", type=float, default=0.01)
    p.add_argument("--iterations", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-doc-freq", type=int, default=2)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("evaluate", help="C_v, TU, TR, TD for a topics JSON (MetricReport on stdout)")
    p.add_argument("--topics", type=Path, required=True)
    p.add_argument("--index", type=Path, help="co-occurrence index; without it C_v is null")
    p.add_argument("--model-id")
    p.add_argument("--variant")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="delta table between two report JSON files")
    p.add_argument("a", type=Path)
    p.add_argument("b", type=Path)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("run", help="run the full experiment from a key = value config file")
    p.add_argument("--config", type=Path, required=True)
    p.add_argument("--output", type=Path, help="override the config's output directory")
    p.add_argument("--reseed-per-variant", action="store_true", help="derive a distinct seed per variant")
    p.set_defaults(func=cmd_run)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        return _fail("usage", str(exc), EXIT_USAGE)
    level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        return _fail("usage", str(exc), EXIT_USAGE)
    except Exception as exc:  # noqa: BLE001 - surfaced as a stage failure
        logging.getLogger(__name__).debug("stage failure", exc_info=True)
        return _fail("stage", f"{type(exc).__name__}: {exc}", EXIT_STAGE)


if __name__ == "__main__":
    sys.exit(main())
