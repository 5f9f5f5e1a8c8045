"""Text cleaning: URLs, emoji, case, punctuation, lemmas, stopwords."""
from __future__ import annotations

import hashlib
import json
import re
import unicodedata
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Optional

TOKEN_RE = re.compile(r"[a-z0-9_#@']+")

_URL_RE = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
_EMOJI_RE = re.compile(
    "["
    "\U0001F000-\U0001FAFF"  # mahjong .. symbols & pictographs ext-A
    "\U0001F1E6-\U0001F1FF"  # regional indicators
    "\U00002600-\U000027BF"  # misc symbols, dingbats
    "\U00002300-\U000023FF"  # misc technical
    "\U00002B00-\U00002BFF"  # arrows, stars
    "\U00002190-\U000021FF"
    "\U000025A0-\U000025FF"
    "\U00002900-\U0000297F"
    "\U0000FE00-\U0000FE0F"  # variation selectors
    "\U000E0020-\U000E007F"  # tag sequences
    "\u200d\u20e3\u3030\u303d\u3297\u3299\u00a9\u00ae\u2122"
    "]"
)
_APOSTROPHES = str.maketrans({"\u2019": "'", "\u2018": "'", "\u02bc": "'", "`": "'"})
_NOT_ALLOWED = re.compile(r"[^a-z0-9_#@'\s]")
_HAS_WORD_CHAR = re.compile(r"[a-z0-9_]")


def _data_path(name: str):
    return resources.files("tmrephrase") / "data" / name


def load_stopwords(path) -> frozenset[str]:
    """One word per line; blank lines ignored."""
    with open(path, encoding="utf-8") as fh:
        return frozenset(w for w in (ln.strip().lower() for ln in fh) if w)


def load_lemma_table(path) -> dict[str, str]:
    table = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            try:
                surface, lemma = line.split("\t")
            except ValueError:
                raise ValueError(f"{path}:{lineno}: expected 'surface<TAB>lemma'") from None
            table[surface.strip().lower()] = lemma.strip().lower()
    return table


def _check_lemma_table(table: Mapping[str, str]) -> None:
    for surface, lemma in table.items():
        if not TOKEN_RE.fullmatch(lemma):
            raise ValueError(f"lemma {lemma!r} (for {surface!r}) has characters outside [a-z0-9_#@']")
        # chained entries would make cleaning a cleaned document change it again
        if table.get(lemma, lemma) != lemma:
            raise ValueError(f"lemma table is not closed: {surface!r} -> {lemma!r} -> {table[lemma]!r}")


@dataclass(frozen=True, eq=False)
class PreprocessConfig:
    stopword_list: frozenset = frozenset()
    lemma_table: Mapping[str, str] = field(default_factory=dict)
    keep_hashtags: bool = True
    keep_mentions: bool = True

    def __post_init__(self):
        object.__setattr__(self, "stopword_list", frozenset(w.lower() for w in self.stopword_list))
        object.__setattr__(self, "lemma_table", {k.lower(): v.lower() for k, v in self.lemma_table.items()})
        _check_lemma_table(self.lemma_table)

    @classmethod
    def default(cls, **kwargs) -> "PreprocessConfig":
        """Bundled English stopwords and noun lemma table."""
        with resources.as_file(_data_path("stopwords_en.txt")) as sw, resources.as_file(
            _data_path("lemmas_en.tsv")
        ) as lm:
            return cls(stopword_list=load_stopwords(sw), lemma_table=load_lemma_table(lm), **kwargs)

    @classmethod
    def from_files(cls, stopwords=None, lemmas=None, keep_hashtags=True, keep_mentions=True) -> "PreprocessConfig":
        base = cls.default()
        return cls(
            stopword_list=load_stopwords(stopwords) if stopwords else base.stopword_list,
            lemma_table=load_lemma_table(lemmas) if lemmas else base.lemma_table,
            keep_hashtags=keep_hashtags,
            keep_mentions=keep_mentions,
        )

    @property
    def config_id(self) -> str:
        blob = json.dumps(
            {
                "stopwords": sorted(self.stopword_list),
                "lemmas": sorted(self.lemma_table.items()),
                "keep_hashtags": self.keep_hashtags,
                "keep_mentions": self.keep_mentions,
            }
        ).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


@dataclass(frozen=True)
class ProcessedDocument:
    id: str
    tokens: tuple

    @property
    def empty(self) -> bool:
        return not self.tokens

    def to_dict(self) -> dict:
        return {"id": self.id, "tokens": list(self.tokens), "empty": self.empty}


def _strip_marks(text: str) -> str:
    decomposed = unicodedata.normalize("NFKD", text)
    return "".join(ch for ch in decomposed if not unicodedata.combining(ch))


def preprocess(text: str, config: PreprocessConfig) -> list[str]:
    """Clean one text into lowercase lemma tokens.

    Stages run in a fixed order: URL removal, emoji removal, lowercasing,
    punctuation stripping, whitespace tokenization, lemmatization,
    stopword removal (matched against lemmas).
    """
    text = _URL_RE.sub(" ", text)
    text = _EMOJI_RE.sub(" ", text)
    text = text.lower()

    text = _strip_marks(text.translate(_APOSTROPHES)).lower()
    if not config.keep_hashtags:
        text = text.replace("#", "")
    if not config.keep_mentions:
        text = text.replace("@", "")
    text = _NOT_ALLOWED.sub(" ", text)

    tokens = []
    for tok in text.split():
        tok = tok.strip("'")
        if not _HAS_WORD_CHAR.search(tok):
            continue
        lemma = config.lemma_table.get(tok, tok)
        if lemma in config.stopword_list:
            continue
        tokens.append(lemma)
    return tokens


def preprocess_corpus(docs: Iterable, config: PreprocessConfig) -> list[ProcessedDocument]:
    """Map :func:`preprocess` over documents, keeping empty results for id alignment."""
    return [ProcessedDocument(doc.id, tuple(preprocess(doc.text, config))) for doc in docs]


def write_processed(docs: Iterable[ProcessedDocument], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for doc in docs:
            fh.write(json.dumps(doc.to_dict(), ensure_ascii=False) + "\n")


def read_processed(path) -> list[ProcessedDocument]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            rec = json.loads(line)
            if "id" not in rec or "tokens" not in rec:
                raise ValueError(f"{path}:{lineno}: expected keys 'id' and 'tokens'")
            out.append(ProcessedDocument(str(rec["id"]), tuple(rec["tokens"])))
    return out


def tokenize_reference(lines: Iterable[str], config: Optional[PreprocessConfig]) -> Iterable[list[str]]:
    """Tokenize reference-corpus documents; ``config=None`` means plain whitespace split."""
    for line in lines:
        yield preprocess(line, config) if config is not None else line.split()


def read_reference_corpus(path) -> Iterable[str]:
    """Yield documents from a text file (one per line) or a directory of ``*.txt`` files."""
    path = Path(path)
    files = sorted(path.rglob("*.txt")) if path.is_dir() else [path]
    for f in files:
        with open(f, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    yield line
