"""Tokenization, inverted index, Okapi BM25 scoring and top-k retrieval."""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field

from .corpus import Corpus

INDEX_FORMAT_VERSION = 1

# Small English function-word list, applied only when stopword filtering
# is switched on (off by default).
DEFAULT_STOPWORDS = frozenset(
    (
        "a an and are as at be by for from has have in is it its of on or "
        "that the this to was were which with"
    ).split()
)

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


class IndexingError(ValueError):
    """Index construction or lookup failure."""


@dataclass(frozen=True)
class Bm25Params:
    """k1 saturates term frequency; b controls length normalization."""

    k1: float = 0.9
    b: float = 0.4

    def __post_init__(self) -> None:
        if self.k1 <= 0:
            raise IndexingError(f"k1 must be > 0, got {self.k1}")
        if not 0.0 <= self.b <= 1.0:
            raise IndexingError(f"b must be in [0, 1], got {self.b}")


@dataclass(frozen=True)
class TokenizerOptions:
    stopwords: frozenset[str] | None = None  # None disables filtering
    stem: bool = False


def _s_stem(token: str) -> str:
    """Harman S-stemmer: ies -> y; es -> e; trailing s dropped."""
    if len(token) > 4 and token.endswith("ies") and token[-4] not in "ae":
        return token[:-3] + "y"
    if len(token) > 3 and token.endswith("es") and token[-3] not in "aeo":
        return token[:-1]
    if len(token) > 3 and token.endswith("s") and token[-2] not in "us":
        return token[:-1]
    return token


def tokenize(text: str, options: TokenizerOptions | None = None) -> list[str]:
    """Lowercase alphanumeric tokens, split on every non-alphanumeric."""
    tokens = _TOKEN_RE.findall(text.lower())
    if options is None:
        return tokens
    if options.stopwords is not None:
        tokens = [t for t in tokens if t not in options.stopwords]
    if options.stem:
        tokens = [_s_stem(t) for t in tokens]
    return tokens


@dataclass
class InvertedIndex:
    postings: dict[str, list[tuple[str, int]]]
    doc_lengths: dict[str, int]
    avg_doc_length: float
    doc_count: int
    field_policy: str = "title_abstract"
    options: TokenizerOptions = field(default_factory=TokenizerOptions)

    def doc_frequency(self, term: str) -> int:
        return len(self.postings.get(term, ()))

    def term_frequency(self, term: str, doc_id: str) -> int:
        for posting_doc, tf in self.postings.get(term, ()):
            if posting_doc == doc_id:
                return tf
        return 0

    def idf(self, term: str) -> float:
        df = self.doc_frequency(term)
        return math.log(1.0 + (self.doc_count - df + 0.5) / (df + 0.5))

    def tokenize_query(self, query: str) -> list[str]:
        return tokenize(query, self.options)


_FIELD_POLICIES = ("title_abstract", "title", "abstract")


def _doc_field_text(doc, field_policy: str) -> str:
    if field_policy == "title_abstract":
        return doc.full_text
    if field_policy == "title":
        return doc.title
    if field_policy == "abstract":
        return doc.abstract
    raise IndexingError(f"unknown field_policy {field_policy!r}")


def build_index(
    corpus: Corpus,
    field_policy: str = "title_abstract",
    options: TokenizerOptions | None = None,
) -> InvertedIndex:
    """Build the inverted index over the chosen document fields."""
    if len(corpus) == 0:
        raise IndexingError("cannot index an empty corpus")
    if field_policy not in _FIELD_POLICIES:
        raise IndexingError(f"unknown field_policy {field_policy!r}")
    opts = options or TokenizerOptions()
    postings: dict[str, list[tuple[str, int]]] = {}
    doc_lengths: dict[str, int] = {}
    for doc in corpus:
        tokens = tokenize(_doc_field_text(doc, field_policy), opts)
        doc_lengths[doc.doc_id] = len(tokens)
        counts: dict[str, int] = {}
        for tok in tokens:
            counts[tok] = counts.get(tok, 0) + 1
        for term, tf in counts.items():
            postings.setdefault(term, []).append((doc.doc_id, tf))
    doc_count = len(doc_lengths)
    avg = sum(doc_lengths.values()) / doc_count
    return InvertedIndex(
        postings=postings,
        doc_lengths=doc_lengths,
        avg_doc_length=avg,
        doc_count=doc_count,
        field_policy=field_policy,
        options=opts,
    )


def _term_contribution(
    index: InvertedIndex, params: Bm25Params, term: str, tf: int, doc_length: int
) -> float:
    if tf == 0:
        return 0.0
    idf = index.idf(term)
    norm = params.k1 * (1.0 - params.b + params.b * doc_length / index.avg_doc_length)
    return idf * tf * (params.k1 + 1.0) / (tf + norm)


def bm25_score(
    index: InvertedIndex, params: Bm25Params, query_tokens: list[str], doc_id: str
) -> float:
    """Okapi BM25 with the non-negative idf variant ln(1 + (N-df+0.5)/(df+0.5)).

    Sums over the query token list, so a token repeated in the query
    contributes once per occurrence.
    """
    if doc_id not in index.doc_lengths:
        raise IndexingError(f"unknown doc_id {doc_id!r}")
    doc_length = index.doc_lengths[doc_id]
    score = 0.0
    for term in query_tokens:
        score += _term_contribution(
            index, params, term, index.term_frequency(term, doc_id), doc_length
        )
    return score


def coarse_search(
    index: InvertedIndex, params: Bm25Params, query: str, k: int
) -> list[tuple[str, float]]:
    """Top-k documents by BM25, score descending, ties by doc_id ascending.

    Only documents with score > 0 (at least one query term present) are
    returned, so the result holds min(k, #matching docs) entries.
    """
    if k < 1:
        raise IndexingError(f"k must be >= 1, got {k}")
    query_tokens = index.tokenize_query(query)
    accum: dict[str, float] = {}
    for term in query_tokens:
        plist = index.postings.get(term)
        if not plist:
            continue
        for doc_id, tf in plist:
            accum[doc_id] = accum.get(doc_id, 0.0) + _term_contribution(
                index, params, term, tf, index.doc_lengths[doc_id]
            )
    scored = [(doc_id, s) for doc_id, s in accum.items() if s > 0.0]
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored[:k]


def save_index(index: InvertedIndex, path: str) -> None:
    payload = {
        "format_version": INDEX_FORMAT_VERSION,
        "field_policy": index.field_policy,
        "stopwords": sorted(index.options.stopwords) if index.options.stopwords is not None else None,
        "stem": index.options.stem,
        "postings": {t: [[d, tf] for d, tf in pl] for t, pl in index.postings.items()},
        "doc_lengths": index.doc_lengths,
        "avg_doc_length": index.avg_doc_length,
        "doc_count": index.doc_count,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_index(path: str) -> InvertedIndex:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    version = payload.get("format_version")
    if version != INDEX_FORMAT_VERSION:
        raise IndexingError(
            f"unsupported index format version {version!r} (expected {INDEX_FORMAT_VERSION})"
        )
    stopwords = payload["stopwords"]
    options = TokenizerOptions(
        stopwords=frozenset(stopwords) if stopwords is not None else None,
        stem=bool(payload["stem"]),
    )
    return InvertedIndex(
        postings={t: [(d, int(tf)) for d, tf in pl] for t, pl in payload["postings"].items()},
        doc_lengths={d: int(v) for d, v in payload["doc_lengths"].items()},
        avg_doc_length=float(payload["avg_doc_length"]),
        doc_count=int(payload["doc_count"]),
        field_policy=payload["field_policy"],
        options=options,
    )
