"""Perspective scorers: the scoring contract plus deterministic reference
implementations of the three perspectives (relevance, textual similarity,
information availability).

Reference scorers make the whole pipeline runnable and testable with no
neural dependencies; trained models attach through the wire protocol in
``semir.external``.
"""

from __future__ import annotations

import enum
import hashlib
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Protocol

import numpy as np

from .lexindex import tokenize


class ScorerError(ValueError):
    """Invalid scorer input or out-of-range score."""


class ScorerKind(str, enum.Enum):
    relevance = "relevance"
    sts = "sts"
    sia = "sia"

    @property
    def native_max(self) -> float:
        return _NATIVE_MAX[self]


_NATIVE_MAX = {
    ScorerKind.relevance: 1.0,
    ScorerKind.sts: 5.0,
    ScorerKind.sia: 4.0,
}


@dataclass(frozen=True)
class PerspectiveScore:
    kind: ScorerKind
    raw: float
    normalized: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.raw <= self.kind.native_max:
            raise ScorerError(
                f"{self.kind.value} raw score {self.raw} outside [0, {self.kind.native_max}]"
            )
        if not 0.0 <= self.normalized <= 1.0:
            raise ScorerError(f"normalized score {self.normalized} outside [0, 1]")


def make_score(kind: ScorerKind, raw: float) -> PerspectiveScore:
    """Validate a raw score against its native range and normalize it to [0, 1]."""
    return PerspectiveScore(kind=kind, raw=raw, normalized=raw / kind.native_max)


@dataclass(frozen=True)
class ScoreCacheKey:
    scorer_id: str
    query_hash: str
    sentence_hash: str


def text_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:24]


def cache_key(scorer_id: str, query: str, sentence: str) -> ScoreCacheKey:
    return ScoreCacheKey(scorer_id, text_hash(query), text_hash(sentence))


class Scorer(Protocol):
    scorer_id: str
    kind: ScorerKind

    def score_raw(self, query: str, sentence: str) -> float: ...


def score(scorer: Scorer, query: str, sentence: str) -> PerspectiveScore:
    """Score one (query, sentence) pair through any scorer.

    Deterministic per scorer_id; raw values are range-checked before
    normalization so a misbehaving backend fails loudly.
    """
    if not query:
        raise ScorerError("query must be non-empty")
    if not sentence:
        raise ScorerError("sentence must be non-empty")
    return make_score(scorer.kind, scorer.score_raw(query, sentence))


class EmbeddingTable:
    """token -> dense vector, all the same dimension, no NaN entries."""

    def __init__(self, vectors: Mapping[str, Iterable[float]]):
        self._vectors: dict[str, np.ndarray] = {}
        self.dimension = 0
        for token, values in vectors.items():
            vec = np.asarray(list(values), dtype=np.float64)
            if np.isnan(vec).any():
                raise ScorerError(f"embedding for {token!r} contains NaN")
            if self.dimension == 0:
                self.dimension = vec.shape[0]
            elif vec.shape[0] != self.dimension:
                raise ScorerError(
                    f"embedding for {token!r} has dimension {vec.shape[0]}, "
                    f"expected {self.dimension}"
                )
            self._vectors[token] = vec

    def __contains__(self, token: str) -> bool:
        return token in self._vectors

    def __len__(self) -> int:
        return len(self._vectors)

    @property
    def vocabulary(self) -> list[str]:
        return list(self._vectors)

    def vector(self, token: str) -> np.ndarray:
        return self._vectors[token]

    def mean_vector(self, tokens: Iterable[str]) -> np.ndarray | None:
        vecs = [self._vectors[t] for t in tokens if t in self._vectors]
        if not vecs:
            return None
        return np.mean(vecs, axis=0)

    @classmethod
    def load(cls, path: str) -> "EmbeddingTable":
        """Read the plain-text format: one line per token, "token v1 v2 ... vd"."""
        vectors: dict[str, list[float]] = {}
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                parts = line.rstrip("\n").split(" ")
                if len(parts) < 2:
                    if not line.strip():
                        continue
                    raise ScorerError(f"embeddings line {lineno}: no vector components")
                try:
                    vectors[parts[0]] = [float(x) for x in parts[1:]]
                except ValueError as exc:
                    raise ScorerError(f"embeddings line {lineno}: {exc}") from exc
        return cls(vectors)

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for token, vec in self._vectors.items():
                fh.write(token + " " + " ".join(repr(float(x)) for x in vec) + "\n")


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    value = float(np.dot(u, v)) / (nu * nv)
    return max(-1.0, min(1.0, value))


def reference_relevance(
    query: str, sentence: str, idf: Mapping[str, float] | None = None, steepness: float = 4.0
) -> float:
    """Weighted token-overlap ratio through a logistic squash, in [0, 1].

    Token weights come from the optional idf mapping (1.0 when missing or
    absent); zero overlap short-circuits to 0.0. Bag-of-words: word order
    never matters.
    """
    query_tokens = set(tokenize(query))
    sentence_tokens = set(tokenize(sentence))
    overlap = query_tokens & sentence_tokens
    if not overlap or not query_tokens:
        return 0.0

    def weight(tok: str) -> float:
        if idf is None:
            return 1.0
        return float(idf.get(tok, 1.0))

    total = sum(weight(t) for t in sorted(query_tokens))
    if total <= 0.0:
        return 0.0
    ratio = sum(weight(t) for t in sorted(overlap)) / total
    return 1.0 / (1.0 + math.exp(-steepness * ratio))


def reference_sts(query: str, sentence: str, embeddings: EmbeddingTable) -> float:
    """5 x max(0, cosine of mean embedding vectors); 0 when either side
    has no embedded token."""
    q_vec = embeddings.mean_vector(tokenize(query))
    s_vec = embeddings.mean_vector(tokenize(sentence))
    if q_vec is None or s_vec is None:
        return 0.0
    return 5.0 * max(0.0, cosine(q_vec, s_vec))


def reference_sia(query: str, sentence: str, embeddings: EmbeddingTable) -> float:
    """4 x soft coverage of the query by the sentence, in [0, 4].

    Coverage per query token: 1.0 on a literal token match, otherwise the
    best embedding cosine against any sentence token clamped to [0, 1],
    and 0.0 for tokens with neither a match nor a vector.
    """
    query_tokens = tokenize(query)
    if not query_tokens:
        return 0.0
    sentence_tokens = tokenize(sentence)
    sentence_set = set(sentence_tokens)
    embedded_sentence = [t for t in dict.fromkeys(sentence_tokens) if t in embeddings]
    coverages = []
    for tok in query_tokens:
        if tok in sentence_set:
            coverages.append(1.0)
            continue
        if tok in embeddings and embedded_sentence:
            q_vec = embeddings.vector(tok)
            best = max(cosine(q_vec, embeddings.vector(s)) for s in embedded_sentence)
            coverages.append(max(0.0, min(1.0, best)))
        else:
            coverages.append(0.0)
    return 4.0 * (sum(coverages) / len(coverages))


class ReferenceRelevanceScorer:
    kind = ScorerKind.relevance

    def __init__(self, idf: Mapping[str, float] | None = None, steepness: float = 4.0):
        self.idf = idf
        self.steepness = steepness
        self.scorer_id = "reference-relevance/1"

    def score_raw(self, query: str, sentence: str) -> float:
        return reference_relevance(query, sentence, self.idf, self.steepness)


class ReferenceStsScorer:
    kind = ScorerKind.sts

    def __init__(self, embeddings: EmbeddingTable):
        self.embeddings = embeddings
        self.scorer_id = "reference-sts/1"

    def score_raw(self, query: str, sentence: str) -> float:
        return reference_sts(query, sentence, self.embeddings)


class ReferenceSiaScorer:
    kind = ScorerKind.sia

    def __init__(self, embeddings: EmbeddingTable):
        self.embeddings = embeddings
        self.scorer_id = "reference-sia/1"

    def score_raw(self, query: str, sentence: str) -> float:
        return reference_sia(query, sentence, self.embeddings)


@dataclass
class ScorerSet:
    """The three perspectives the fusion layer consumes."""

    relevance: Scorer
    sts: Scorer
    sia: Scorer

    def __post_init__(self) -> None:
        for attr, expected in (
            ("relevance", ScorerKind.relevance),
            ("sts", ScorerKind.sts),
            ("sia", ScorerKind.sia),
        ):
            actual = getattr(self, attr).kind
            if actual != expected:
                raise ScorerError(f"{attr} slot holds a {actual.value} scorer")

    @property
    def ids(self) -> dict[str, str]:
        return {
            "relevance": self.relevance.scorer_id,
            "sts": self.sts.scorer_id,
            "sia": self.sia.scorer_id,
        }

    def triple(self, query: str, sentence: str, use_raw_scales: bool = False) -> tuple[float, float, float]:
        """(relevance, sts, sia) for one pair, normalized unless asked raw."""
        scores = (
            score(self.relevance, query, sentence),
            score(self.sts, query, sentence),
            score(self.sia, query, sentence),
        )
        if use_raw_scales:
            return scores[0].raw, scores[1].raw, scores[2].raw
        return scores[0].normalized, scores[1].normalized, scores[2].normalized


def reference_scorer_set(
    embeddings: EmbeddingTable | None = None,
    idf: Mapping[str, float] | None = None,
) -> ScorerSet:
    """All-reference scorer set; an empty embedding table pins sts/sia to 0."""
    table = embeddings if embeddings is not None else EmbeddingTable({})
    return ScorerSet(
        relevance=ReferenceRelevanceScorer(idf=idf),
        sts=ReferenceStsScorer(table),
        sia=ReferenceSiaScorer(table),
    )
