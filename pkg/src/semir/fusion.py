"""Weighted-sum sentence/document scoring and the end-to-end rank pipeline.

Pipeline order: BM25 candidate pool -> three perspective scores per
sentence -> base sentence scores -> document scores (top-3 sentence
evidence + BM25) -> keep top documents -> final sentence scores (base +
document feedback) -> keep top snippets. The document/sentence recursion
is unrolled one step by default; `fixed_point_iters` iterates further.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .corpus import Corpus, Document, Snippet
from .lexindex import Bm25Params, InvertedIndex, coarse_search
from .scorers import ScorerSet


class FusionError(ValueError):
    """Invalid weights, parameters or score inputs."""


def _check_unit(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise FusionError(f"{name} must be in [0, 1], got {value}")


@dataclass(frozen=True)
class FusionWeights:
    """alpha: (relevance, sts, sia, doc-feedback); beta: (bm25, sentence-sum);
    w: top-3 sentence contribution weights."""

    alpha: tuple[float, float, float, float]
    beta: tuple[float, float]
    w: tuple[float, float, float]

    def __post_init__(self) -> None:
        if len(self.alpha) != 4 or len(self.beta) != 2 or len(self.w) != 3:
            raise FusionError("expected |alpha|=4, |beta|=2, |w|=3")
        for i, a in enumerate(self.alpha):
            _check_unit(f"alpha[{i}]", a)
        for i, b in enumerate(self.beta):
            _check_unit(f"beta[{i}]", b)
        for i, wi in enumerate(self.w):
            _check_unit(f"w[{i}]", wi)

    def replace(self, **kwargs) -> "FusionWeights":
        merged = {"alpha": self.alpha, "beta": self.beta, "w": self.w}
        merged.update(kwargs)
        return FusionWeights(**merged)

    def to_dict(self) -> dict:
        return {"alpha": list(self.alpha), "beta": list(self.beta), "w": list(self.w)}

    @classmethod
    def from_dict(cls, data: dict) -> "FusionWeights":
        return cls(
            alpha=tuple(float(x) for x in data["alpha"]),
            beta=tuple(float(x) for x in data["beta"]),
            w=tuple(float(x) for x in data["w"]),
        )


def reference_weights() -> FusionWeights:
    """Weights profile shipped with the package (tuned on a biomedical dev
    split at full scale); a starting point, not a target."""
    return FusionWeights(
        alpha=(0.6123, 0.2664, 0.0785, 0.9879),
        beta=(0.0002, 0.8523),
        w=(0.9938, 0.0338, 0.0271),
    )


def load_weights(path: str) -> FusionWeights:
    with open(path, "r", encoding="utf-8") as fh:
        return FusionWeights.from_dict(json.load(fh))


def save_weights(weights: FusionWeights, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(weights.to_dict(), fh, indent=2)
        fh.write("\n")


@dataclass(frozen=True)
class RankingParams:
    pool_k: int = 100
    top_docs: int = 10
    top_snippets: int = 10

    def __post_init__(self) -> None:
        if self.pool_k < 1:
            raise FusionError(f"pool_k must be >= 1, got {self.pool_k}")
        for name in ("top_docs", "top_snippets"):
            value = getattr(self, name)
            if not 0 <= value <= 10:
                raise FusionError(f"{name} must be in [0, 10], got {value}")


@dataclass(frozen=True)
class FusionConfig:
    use_raw_scales: bool = False  # feed raw 0-5/0-4 scales instead of [0,1]
    normalize_bm25: bool = False  # min-max BM25 over the pool before fusing
    fixed_point_iters: int = 1

    def __post_init__(self) -> None:
        if self.fixed_point_iters < 1:
            raise FusionError("fixed_point_iters must be >= 1")


@dataclass(frozen=True)
class ScoredDoc:
    doc_id: str
    score: float | None


@dataclass(frozen=True)
class ScoredSnippet:
    snippet: Snippet
    score: float | None
    sent_index: int | None = None


@dataclass
class RankedEntry:
    query_id: str
    query_body: str
    documents: list[ScoredDoc]
    snippets: list[ScoredSnippet]


@dataclass
class RankedRun:
    entries: list[RankedEntry]

    def __iter__(self):
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def entry_for(self, query_id: str) -> RankedEntry | None:
        for entry in self.entries:
            if entry.query_id == query_id:
                return entry
        return None


@dataclass
class SentenceDebugRow:
    query_id: str
    doc_id: str
    sent_index: int
    base: float
    doc_score: float
    final: float | None  # None when the document was not kept


def _base_unchecked(wts: FusionWeights, r: float, s: float, i: float) -> float:
    a1, a2, a3, _ = wts.alpha
    return a1 * r + a2 * s + a3 * i


def base_sentence_score(wts: FusionWeights, r: float, s: float, i: float) -> float:
    """alpha1*r + alpha2*s + alpha3*i over normalized perspective scores."""
    _check_unit("relevance input", r)
    _check_unit("sts input", s)
    _check_unit("sia input", i)
    return _base_unchecked(wts, r, s, i)


def top3_scores(base_scores) -> tuple[float, float, float]:
    """The three largest scores, descending, zero-padded below 3 items."""
    top = sorted(base_scores, reverse=True)[:3]
    while len(top) < 3:
        top.append(0.0)
    return top[0], top[1], top[2]


def document_score(wts: FusionWeights, bm25: float, top3: tuple[float, float, float]) -> float:
    """beta1*bm25 + beta2*(w1*s1 + w2*s2 + w3*s3) over the top-3 evidence."""
    b1, b2 = wts.beta
    w1, w2, w3 = wts.w
    s1, s2, s3 = top3
    return b1 * bm25 + b2 * (w1 * s1 + w2 * s2 + w3 * s3)


def final_sentence_score(wts: FusionWeights, base: float, doc_score_norm: float) -> float:
    """base + alpha4 * pool-normalized score of the containing document."""
    return base + wts.alpha[3] * doc_score_norm


def minmax_normalize(values: list[float]) -> list[float]:
    """(v - min) / (max - min); all zeros when the spread is empty."""
    if not values:
        return []
    lo, hi = min(values), max(values)
    if hi <= lo:
        return [0.0] * len(values)
    return [(v - lo) / (hi - lo) for v in values]


@dataclass
class _PooledDoc:
    doc: Document
    bm25: float
    triples: list[tuple[float, float, float]]  # per sentence: (r, s, i)
    base: list[float] = field(default_factory=list)
    doc_score: float = 0.0


def _score_pool(
    query: str,
    corpus: Corpus,
    pool: list[tuple[str, float]],
    scorers: ScorerSet,
    config: FusionConfig,
) -> list[_PooledDoc]:
    pooled = []
    for doc_id, bm25 in pool:
        doc = corpus.get(doc_id)
        triples = [
            scorers.triple(query, doc.sentence_text(span), config.use_raw_scales)
            for span in doc.sentences
        ]
        pooled.append(_PooledDoc(doc=doc, bm25=bm25, triples=triples))
    return pooled


def _fuse_pool(
    pooled: list[_PooledDoc], wts: FusionWeights, config: FusionConfig
) -> dict[str, list[float]]:
    """Compute base/doc/final scores in place; returns final scores per doc_id."""
    base_fn = _base_unchecked if config.use_raw_scales else base_sentence_score
    for pd in pooled:
        pd.base = [base_fn(wts, r, s, i) for r, s, i in pd.triples]
    bm25_values = [pd.bm25 for pd in pooled]
    if config.normalize_bm25:
        bm25_values = minmax_normalize(bm25_values)
    sentence_scores = [list(pd.base) for pd in pooled]
    finals: dict[str, list[float]] = {}
    for _ in range(config.fixed_point_iters):
        for pd, bm25, sent in zip(pooled, bm25_values, sentence_scores):
            pd.doc_score = document_score(wts, bm25, top3_scores(sent))
        doc_norms = minmax_normalize([pd.doc_score for pd in pooled])
        sentence_scores = [
            [final_sentence_score(wts, b, dn) for b in pd.base]
            for pd, dn in zip(pooled, doc_norms)
        ]
        finals = {pd.doc.doc_id: scores for pd, scores in zip(pooled, sentence_scores)}
    return finals


def rank(
    query_id: str,
    query: str,
    corpus: Corpus,
    index: InvertedIndex,
    scorers: ScorerSet,
    wts: FusionWeights,
    params: RankingParams,
    bm25_params: Bm25Params | None = None,
    config: FusionConfig | None = None,
    return_details: bool = False,
):
    """Rank documents and snippets for one query.

    An empty candidate pool yields an empty entry, which is a valid result
    rather than an error.
    """
    bm25_params = bm25_params or Bm25Params()
    config = config or FusionConfig()
    pool = coarse_search(index, bm25_params, query, params.pool_k)
    pooled = _score_pool(query, corpus, pool, scorers, config)
    finals = _fuse_pool(pooled, wts, config)

    doc_order = sorted(pooled, key=lambda pd: (-pd.doc_score, pd.doc.doc_id))
    kept = doc_order[: params.top_docs]
    kept_ids = {pd.doc.doc_id for pd in kept}

    candidates = []
    for pd in kept:
        doc = pd.doc
        for span, final in zip(doc.sentences, finals[doc.doc_id]):
            candidates.append((final, doc, span))
    candidates.sort(key=lambda item: (-item[0], item[1].doc_id, item[2].sent_index))

    snippets = []
    for final, doc, span in candidates[: params.top_snippets]:
        section, begin, end = doc.section_offsets(span)
        snippets.append(
            ScoredSnippet(
                snippet=Snippet(
                    doc_id=doc.doc_id,
                    begin=begin,
                    end=end,
                    text=doc.sentence_text(span),
                    begin_section=section,
                    end_section=section,
                ),
                score=final,
                sent_index=span.sent_index,
            )
        )
    entry = RankedEntry(
        query_id=query_id,
        query_body=query,
        documents=[ScoredDoc(pd.doc.doc_id, pd.doc_score) for pd in kept],
        snippets=snippets,
    )
    if not return_details:
        return entry
    details = []
    for pd in pooled:
        for span, base in zip(pd.doc.sentences, pd.base):
            final = finals[pd.doc.doc_id][span.sent_index] if pd.doc.doc_id in kept_ids else None
            details.append(
                SentenceDebugRow(
                    query_id=query_id,
                    doc_id=pd.doc.doc_id,
                    sent_index=span.sent_index,
                    base=base,
                    doc_score=pd.doc_score,
                    final=final,
                )
            )
    return entry, details


def write_debug_tsv(rows: list[SentenceDebugRow], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("query_id\tdoc_id\tsent_index\tbase\tdoc_score\tfinal\n")
        for row in rows:
            final = "" if row.final is None else repr(row.final)
            fh.write(
                f"{row.query_id}\t{row.doc_id}\t{row.sent_index}\t"
                f"{row.base!r}\t{row.doc_score!r}\t{final}\n"
            )


@dataclass(frozen=True)
class MedicItem:
    index: int
    sentence: str
    score: float
    context_before: str
    context_after: str


def medic_rank(
    query: str,
    sentences: list[str],
    topn: int,
    alpha: float,
    scorers: ScorerSet,
) -> list[MedicItem]:
    """Two-perspective interactive blend: alpha*relevance + (1-alpha)*sts.

    Returns the topn sentences by blended score (ties by position), each
    with its adjacent predecessor/successor sentence as display context.
    """
    if topn < 1:
        raise FusionError(f"topn must be >= 1, got {topn}")
    _check_unit("alpha", alpha)
    scored = []
    for pos, sentence in enumerate(sentences):
        r, s, _ = scorers.triple(query, sentence)
        scored.append((alpha * r + (1.0 - alpha) * s, pos))
    scored.sort(key=lambda item: (-item[0], item[1]))
    items = []
    for blended, pos in scored[:topn]:
        items.append(
            MedicItem(
                index=pos,
                sentence=sentences[pos],
                score=blended,
                context_before=sentences[pos - 1] if pos > 0 else "",
                context_after=sentences[pos + 1] if pos + 1 < len(sentences) else "",
            )
        )
    return items


class Pipeline:
    """Bundles the immutable artifacts one ranking deployment needs."""

    def __init__(
        self,
        corpus: Corpus,
        index: InvertedIndex,
        scorers: ScorerSet,
        bm25_params: Bm25Params | None = None,
        config: FusionConfig | None = None,
    ):
        self.corpus = corpus
        self.index = index
        self.scorers = scorers
        self.bm25_params = bm25_params or Bm25Params()
        self.config = config or FusionConfig()

    def rank(
        self,
        query_id: str,
        query: str,
        wts: FusionWeights,
        params: RankingParams,
        return_details: bool = False,
    ):
        return rank(
            query_id,
            query,
            self.corpus,
            self.index,
            self.scorers,
            wts,
            params,
            self.bm25_params,
            self.config,
            return_details,
        )

    def rank_run(self, query_set, wts: FusionWeights, params: RankingParams) -> RankedRun:
        entries = [
            self.rank(q.query_id, q.body, wts, params) for q, _ in query_set
        ]
        return RankedRun(entries=entries)
