"""Bag-of-words featurization of contract descriptions.

Tokens are maximal runs of Unicode letters, lowercased with accents kept.
The vocabulary is pruned by document frequency using strict bounds on both
sides and capped by total corpus count.
"""

from __future__ import annotations

import csv
import json
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import IO, Iterable, Sequence

import numpy as np

from .errors import EmptyVocabulary

_TOKEN_RE = re.compile(r"[^\W\d_]+")


def tokenize(text: str | None, min_token_len: int = 2) -> list[str]:
    if not text:
        return []
    text = unicodedata.normalize("NFC", text).lower()
    return [t for t in _TOKEN_RE.findall(text) if len(t) >= min_token_len]


def load_stopwords(path: str | Path | None = None) -> set[str]:
    """Read a one-token-per-line stopword file; ``#`` starts a comment.

    With no path, the bundled Spanish list is returned.  Unreadable paths
    raise ``OSError``.
    """
    if path is None:
        text = resources.files("procuraudit").joinpath("data/stopwords_es.txt").read_text("utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    words = set()
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            words.add(unicodedata.normalize("NFC", line).lower())
    return words


@dataclass(frozen=True)
class VectorizerParams:
    min_df_fraction: float = 0.0001
    max_df_fraction: float = 0.5
    max_features: int = 10000
    stopword_list: frozenset[str] = field(default_factory=lambda: frozenset(load_stopwords()))
    min_token_len: int = 2

    def __post_init__(self):
        object.__setattr__(self, "stopword_list", frozenset(self.stopword_list))
        if not 0 <= self.min_df_fraction < self.max_df_fraction <= 1:
            raise ValueError(
                "need 0 <= min_df_fraction < max_df_fraction <= 1, got "
                f"{self.min_df_fraction}, {self.max_df_fraction}"
            )
        if self.max_features < 1:
            raise ValueError("max_features must be >= 1")
        if self.min_token_len < 1:
            raise ValueError("min_token_len must be >= 1")


@dataclass
class Vocabulary:
    tokens: list[str]
    doc_freq: dict[str, int]
    n_docs: int
    index: dict[str, int] = field(init=False)

    def __post_init__(self):
        self.tokens = sorted(self.tokens)
        self.index = {t: i for i, t in enumerate(self.tokens)}

    def __len__(self) -> int:
        return len(self.tokens)

    def to_json(self) -> str:
        payload = {
            "n_docs": self.n_docs,
            "tokens": [{"t": t, "df": self.doc_freq[t]} for t in self.tokens],
        }
        return json.dumps(payload, ensure_ascii=False, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> Vocabulary:
        data = json.loads(text)
        tokens = [e["t"] for e in data["tokens"]]
        return cls(tokens, {e["t"]: e["df"] for e in data["tokens"]}, data["n_docs"])


def build_vocabulary(docs: Sequence[Sequence[str]], params: VectorizerParams | None = None) -> Vocabulary:
    """Select the token vocabulary from tokenized documents.

    A token survives when it is not a stopword and its document fraction is
    strictly above ``min_df_fraction`` and strictly below
    ``max_df_fraction``.  Beyond ``max_features`` survivors, the tokens with
    the highest total count are kept (ties go to the lexicographically
    earlier token).
    """
    params = params or VectorizerParams()
    n_docs = len(docs)
    if n_docs < 1:
        raise ValueError("need at least one document")
    stop = params.stopword_list
    df: Counter[str] = Counter()
    total: Counter[str] = Counter()
    for doc in docs:
        kept = [t for t in doc if t not in stop]
        total.update(kept)
        df.update(set(kept))

    survivors = [
        t
        for t, d in df.items()
        if d / n_docs > params.min_df_fraction and d / n_docs < params.max_df_fraction
    ]
    if not survivors:
        raise EmptyVocabulary(f"no token survived pruning across {n_docs} documents")
    if len(survivors) > params.max_features:
        survivors.sort(key=lambda t: (-total[t], t))
        survivors = survivors[: params.max_features]
    return Vocabulary(survivors, {t: df[t] for t in survivors}, n_docs)


@dataclass
class SparseCounts:
    n_rows: int
    n_cols: int
    rows: list[list[tuple[int, int]]]

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n_rows, self.n_cols), dtype=np.int64)
        for r, entries in enumerate(self.rows):
            for c, k in entries:
                out[r, c] = k
        return out

    def write_triplets(self, out: IO[str]) -> None:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["row", "col", "count"])
        for r, entries in enumerate(self.rows):
            for c, k in entries:
                w.writerow([r, c, k])

    @classmethod
    def read_triplets(cls, fh: IO[str], n_rows: int, n_cols: int) -> SparseCounts:
        rows: list[list[tuple[int, int]]] = [[] for _ in range(n_rows)]
        reader = csv.reader(fh)
        next(reader)
        for r, c, k in reader:
            rows[int(r)].append((int(c), int(k)))
        return cls(n_rows, n_cols, rows)


def vectorize(docs: Iterable[Sequence[str]], vocab: Vocabulary) -> SparseCounts:
    """Count in-vocabulary tokens per document; other tokens are ignored."""
    rows = []
    for doc in docs:
        counts = Counter(vocab.index[t] for t in doc if t in vocab.index)
        rows.append(sorted(counts.items()))
    return SparseCounts(len(rows), len(vocab.tokens), rows)
