"""BioASQ-style evaluation: P/R/F1, Average Precision, MAP, GMAP for
documents and snippets, plus predictions-file round-tripping.

AP uses greedy gold consumption: a prediction at rank k counts as
relevant only if it matches a gold item no earlier prediction already
matched. For duplicate-free document lists this equals the plain binary
reading; for snippets it keeps AP inside [0, 1] when several predictions
overlap one gold snippet.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .corpus import (
    Corpus,
    CorpusError,
    GoldLabels,
    Query,
    QuerySet,
    Snippet,
    doc_id_from_url,
    doc_id_to_url,
)
from .fusion import RankedEntry, RankedRun, ScoredDoc, ScoredSnippet


class MetricsError(ValueError):
    """Evaluation input mismatch or schema violation."""


@dataclass(frozen=True)
class MatchPolicy:
    """Documents match on exact id; snippets on same document, same begin
    section and character overlap >= min_overlap."""

    min_overlap: int = 1

    def __post_init__(self) -> None:
        if self.min_overlap < 1:
            raise MetricsError(f"min_overlap must be >= 1, got {self.min_overlap}")

    def snippets_match(self, pred: Snippet, gold: Snippet) -> bool:
        if pred.doc_id != gold.doc_id or pred.begin_section != gold.begin_section:
            return False
        overlap = min(pred.end, gold.end) - max(pred.begin, gold.begin)
        return overlap >= self.min_overlap


def precision_recall_f1(pred_list, gold_list, match) -> tuple[float, float, float]:
    """Set-style P/R/F1 under an arbitrary match predicate.

    Precision: predictions matching any gold item. Recall: gold items
    matched by any prediction. Empty sides score 0.
    """
    if not pred_list:
        precision = 0.0
    else:
        matched_preds = sum(1 for p in pred_list if any(match(p, g) for g in gold_list))
        precision = matched_preds / len(pred_list)
    if not gold_list:
        recall = 0.0
    else:
        matched_gold = sum(1 for g in gold_list if any(match(p, g) for p in pred_list))
        recall = matched_gold / len(gold_list)
    if precision + recall == 0.0:
        return precision, recall, 0.0
    return precision, recall, 2.0 * precision * recall / (precision + recall)


def average_precision(
    ranked_pred,
    gold_list,
    match,
    denom_mode: str = "gold",
    limit: int = 10,
) -> float:
    """Sum of P@k over relevant ranks divided by the chosen denominator.

    denom_mode "gold" divides by |gold|; "capped" divides by
    min(|gold|, limit) and only scores the first `limit` predictions.
    """
    if denom_mode not in ("gold", "capped"):
        raise MetricsError(f"unknown denom_mode {denom_mode!r}")
    if not gold_list:
        return 0.0
    preds = list(ranked_pred)
    if denom_mode == "capped":
        preds = preds[:limit]
        denom = min(len(gold_list), limit)
    else:
        denom = len(gold_list)
    consumed = [False] * len(gold_list)
    hits = 0
    total = 0.0
    for k, pred in enumerate(preds, start=1):
        for gi, gold in enumerate(gold_list):
            if not consumed[gi] and match(pred, gold):
                consumed[gi] = True
                hits += 1
                total += hits / k
                break
    return total / denom


def map_score(ap_values) -> float:
    values = list(ap_values)
    if not values:
        raise MetricsError("map over an empty AP list")
    return sum(values) / len(values)


def gmap_score(ap_values, epsilon: float = 0.01) -> float:
    values = list(ap_values)
    if not values:
        raise MetricsError("gmap over an empty AP list")
    if epsilon <= 0:
        raise MetricsError(f"epsilon must be > 0, got {epsilon}")
    return math.exp(sum(math.log(v + epsilon) for v in values) / len(values))


@dataclass(frozen=True)
class SideReport:
    mean_precision: float
    mean_recall: float
    mean_f1: float
    map: float
    gmap: float


@dataclass(frozen=True)
class EvalReport:
    documents: SideReport
    snippets: SideReport
    query_count: int

    def to_dict(self) -> dict:
        def side(s: SideReport) -> dict:
            return {
                "mean_precision": s.mean_precision,
                "mean_recall": s.mean_recall,
                "mean_f1": s.mean_f1,
                "map": s.map,
                "gmap": s.gmap,
            }

        return {
            "query_count": self.query_count,
            "documents": side(self.documents),
            "snippets": side(self.snippets),
        }

    def to_table(self) -> str:
        """Aligned text table, columns MPrec / MRec / F-Measure / MAP / GMAP."""
        header = f"{'':<10}{'MPrec':>10}{'MRec':>10}{'F-Measure':>12}{'MAP':>10}{'GMAP':>10}"
        lines = [header]
        for label, s in (("documents", self.documents), ("snippets", self.snippets)):
            lines.append(
                f"{label:<10}{s.mean_precision:>10.4f}{s.mean_recall:>10.4f}"
                f"{s.mean_f1:>12.4f}{s.map:>10.4f}{s.gmap:>10.4f}"
            )
        return "\n".join(lines)


def _doc_match(pred_id: str, gold_id: str) -> bool:
    return pred_id == gold_id


def evaluate_run(
    run: RankedRun,
    gold: QuerySet,
    policy: MatchPolicy | None = None,
    denom_mode: str = "gold",
    gmap_epsilon: float = 0.01,
) -> EvalReport:
    """Evaluate a run against gold labels, averaging over ALL gold queries.

    Queries missing from the run count as zero-prediction queries; a run
    query absent from the gold set is an error.
    """
    policy = policy or MatchPolicy()
    gold_ids = set(gold.query_ids)
    for entry in run:
        if entry.query_id not in gold_ids:
            raise MetricsError(f"run query {entry.query_id!r} absent from gold set")

    doc_p, doc_r, doc_f, doc_ap = [], [], [], []
    snip_p, snip_r, snip_f, snip_ap = [], [], [], []
    for query, labels in gold:
        if labels is None:
            raise MetricsError(f"gold labels missing for query {query.query_id!r}")
        entry = run.entry_for(query.query_id)
        pred_docs = [d.doc_id for d in entry.documents] if entry else []
        pred_snips = [s.snippet for s in entry.snippets] if entry else []
        p, r, f1 = precision_recall_f1(pred_docs, list(labels.gold_doc_ids), _doc_match)
        doc_p.append(p)
        doc_r.append(r)
        doc_f.append(f1)
        doc_ap.append(
            average_precision(pred_docs, list(labels.gold_doc_ids), _doc_match, denom_mode)
        )
        p, r, f1 = precision_recall_f1(
            pred_snips, list(labels.gold_snippets), policy.snippets_match
        )
        snip_p.append(p)
        snip_r.append(r)
        snip_f.append(f1)
        snip_ap.append(
            average_precision(
                pred_snips, list(labels.gold_snippets), policy.snippets_match, denom_mode
            )
        )

    def side(ps, rs, fs, aps) -> SideReport:
        return SideReport(
            mean_precision=map_score(ps),
            mean_recall=map_score(rs),
            mean_f1=map_score(fs),
            map=map_score(aps),
            gmap=gmap_score(aps, gmap_epsilon),
        )

    return EvalReport(
        documents=side(doc_p, doc_r, doc_f, doc_ap),
        snippets=side(snip_p, snip_r, snip_f, snip_ap),
        query_count=len(gold),
    )


def run_to_json(run: RankedRun) -> dict:
    """RankedRun -> BioASQ predictions JSON (shared gold/predictions schema)."""
    questions = []
    for entry in run:
        questions.append(
            {
                "id": entry.query_id,
                "body": entry.query_body,
                "documents": [doc_id_to_url(d.doc_id) for d in entry.documents],
                "snippets": [
                    {
                        "document": doc_id_to_url(s.snippet.doc_id),
                        "text": s.snippet.text,
                        "offsetInBeginSection": s.snippet.begin,
                        "offsetInEndSection": s.snippet.end,
                        "beginSection": s.snippet.begin_section,
                        "endSection": s.snippet.end_section,
                    }
                    for s in entry.snippets
                ],
            }
        )
    return {"questions": questions}


def _require(obj: dict, key: str, path: str):
    if key not in obj:
        raise MetricsError(f"{path}: missing key {key!r}")
    return obj[key]


def json_to_run(data: dict) -> RankedRun:
    """BioASQ predictions JSON -> RankedRun (scores unknown, order kept)."""
    if not isinstance(data, dict):
        raise MetricsError("$: expected a JSON object")
    questions = _require(data, "questions", "$")
    if not isinstance(questions, list):
        raise MetricsError("$.questions: expected an array")
    entries = []
    for qi, q in enumerate(questions):
        path = f"$.questions[{qi}]"
        if not isinstance(q, dict):
            raise MetricsError(f"{path}: expected an object")
        query_id = str(_require(q, "id", path))
        documents = q.get("documents", [])
        snippets = q.get("snippets", [])
        scored_docs = [ScoredDoc(doc_id_from_url(str(u)), None) for u in documents]
        scored_snips = []
        for si, s in enumerate(snippets):
            spath = f"{path}.snippets[{si}]"
            if not isinstance(s, dict):
                raise MetricsError(f"{spath}: expected an object")
            begin = _require(s, "offsetInBeginSection", spath)
            end = _require(s, "offsetInEndSection", spath)
            if not isinstance(begin, int) or not isinstance(end, int):
                raise MetricsError(f"{spath}: offsets must be integers")
            try:
                snippet = Snippet(
                    doc_id=doc_id_from_url(str(_require(s, "document", spath))),
                    begin=begin,
                    end=end,
                    text=str(_require(s, "text", spath)),
                    begin_section=str(_require(s, "beginSection", spath)),
                    end_section=str(_require(s, "endSection", spath)),
                )
            except CorpusError as exc:
                raise MetricsError(f"{spath}: {exc}") from exc
            scored_snips.append(ScoredSnippet(snippet=snippet, score=None))
        entries.append(
            RankedEntry(
                query_id=query_id,
                query_body=str(q.get("body", "")),
                documents=scored_docs,
                snippets=scored_snips,
            )
        )
    return RankedRun(entries=entries)


def validate_run_against_corpus(run: RankedRun, corpus: Corpus) -> None:
    """Check snippet offsets/texts against the documents they cite."""
    for qi, entry in enumerate(run):
        for si, scored in enumerate(entry.snippets):
            snip = scored.snippet
            path = f"$.questions[{qi}].snippets[{si}]"
            if snip.doc_id not in corpus:
                raise MetricsError(f"{path}: unknown document {snip.doc_id!r}")
            doc = corpus.get(snip.doc_id)
            section_text = doc.title if snip.begin_section == "title" else doc.abstract
            if snip.end > len(section_text):
                raise MetricsError(
                    f"{path}: offsets [{snip.begin}, {snip.end}) outside "
                    f"{snip.begin_section} of document {snip.doc_id} "
                    f"(length {len(section_text)})"
                )
            if section_text[snip.begin : snip.end] != snip.text:
                raise MetricsError(f"{path}: text does not match the cited span")


def write_predictions(run: RankedRun, path: str, corpus: Corpus | None = None) -> None:
    if corpus is not None:
        validate_run_against_corpus(run, corpus)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(run_to_json(run), fh, ensure_ascii=False, indent=2)
        fh.write("\n")


def read_predictions(path: str) -> RankedRun:
    with open(path, "r", encoding="utf-8") as fh:
        return json_to_run(json.load(fh))


def run_to_queryset(run: RankedRun) -> QuerySet:
    """Reinterpret a run as gold labels (for self-evaluation round trips)."""
    items: list[tuple[Query, GoldLabels | None]] = []
    for entry in run:
        query = Query(query_id=entry.query_id, body=entry.query_body or entry.query_id)
        labels = GoldLabels(
            query_id=entry.query_id,
            gold_doc_ids=tuple(d.doc_id for d in entry.documents),
            gold_snippets=tuple(s.snippet for s in entry.snippets),
        )
        items.append((query, labels))
    return QuerySet(items=items)
