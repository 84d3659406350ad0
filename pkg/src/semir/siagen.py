"""Rule-based construction of semantic-information-availability datasets.

Labels 4/2/0 come straight from QASC-style rows; labels 3/1 are derived
from 4/2 samples by swapping entity words with near neighbors in an
embedding space.
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
import re
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .scorers import EmbeddingTable, Scorer, ScorerKind, cosine, score

logger = logging.getLogger(__name__)


class SiaGenError(ValueError):
    """Malformed rows, spans, or vocabulary too small."""


@dataclass(frozen=True)
class QascRow:
    question: str
    possible_answers: str
    correct_answer: str
    fact1: str
    fact2: str
    combined_fact: str

    def __post_init__(self) -> None:
        if not self.question:
            raise SiaGenError("row has an empty question")
        if not self.combined_fact:
            raise SiaGenError(f"row {self.question!r} has an empty combined_fact")


PROVENANCE_LABEL = {
    "cat4_rule": 4,
    "cat2_rule": 2,
    "cat0_rule": 0,
    "swap_from_4": 3,
    "swap_from_2": 1,
}


@dataclass(frozen=True)
class SiaSample:
    query: str
    sentence: str
    label: int
    provenance: str

    def __post_init__(self) -> None:
        if self.provenance not in PROVENANCE_LABEL:
            raise SiaGenError(f"unknown provenance {self.provenance!r}")
        expected = PROVENANCE_LABEL[self.provenance]
        if self.label != expected:
            raise SiaGenError(
                f"label {self.label} does not match provenance {self.provenance!r} "
                f"(expected {expected})"
            )


def read_qasc_jsonl(path: str) -> list[QascRow]:
    """QASC-style JSONL; combinedFact is accepted as an alias of combined_fact."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SiaGenError(f"line {lineno}: invalid JSON ({exc.msg})") from exc
            combined = obj.get("combined_fact", obj.get("combinedFact", ""))
            try:
                rows.append(
                    QascRow(
                        question=str(obj.get("question", "")),
                        possible_answers=str(obj.get("possible_answers", "")),
                        correct_answer=str(obj.get("correct_answer", "")),
                        fact1=str(obj.get("fact1", "")),
                        fact2=str(obj.get("fact2", "")),
                        combined_fact=str(combined),
                    )
                )
            except SiaGenError as exc:
                raise SiaGenError(f"line {lineno}: {exc}") from exc
    return rows


def gen_cat4(rows: Sequence[QascRow]) -> list[SiaSample]:
    """One label-4 sample per row: the combined fact answers the question."""
    return [
        SiaSample(query=row.question, sentence=row.combined_fact, label=4, provenance="cat4_rule")
        for row in rows
    ]


def gen_cat2(rows: Sequence[QascRow], relevance_scorer: Scorer) -> list[SiaSample]:
    """One label-2 sample per row: the single fact the scorer prefers.

    Ties keep fact1.
    """
    if relevance_scorer.kind != ScorerKind.relevance:
        raise SiaGenError("gen_cat2 needs a relevance scorer")
    samples = []
    for row in rows:
        score1 = score(relevance_scorer, row.question, row.fact1).raw
        score2 = score(relevance_scorer, row.question, row.fact2).raw
        chosen = row.fact1 if score1 >= score2 else row.fact2
        samples.append(
            SiaSample(query=row.question, sentence=chosen, label=2, provenance="cat2_rule")
        )
    return samples


def gen_cat0(
    rows: Sequence[QascRow], sts_scorer: Scorer, threshold: float = 4.0
) -> list[SiaSample]:
    """Cross-question label-0 pairs.

    For every row pair (i < j) whose questions score at or above the STS
    threshold and differ textually, emit (question_i, combined_fact_j) and
    (question_j, combined_fact_i). Quadratic in the row count.
    """
    if sts_scorer.kind != ScorerKind.sts:
        raise SiaGenError("gen_cat0 needs an sts scorer")
    if not 0.0 <= threshold <= ScorerKind.sts.native_max:
        raise SiaGenError(f"threshold {threshold} outside [0, {ScorerKind.sts.native_max}]")
    samples = []
    for i in range(len(rows)):
        for j in range(i + 1, len(rows)):
            qi, qj = rows[i].question, rows[j].question
            if qi == qj:
                continue
            if score(sts_scorer, qi, qj).raw >= threshold:
                samples.append(
                    SiaSample(query=qi, sentence=rows[j].combined_fact, label=0, provenance="cat0_rule")
                )
                samples.append(
                    SiaSample(query=qj, sentence=rows[i].combined_fact, label=0, provenance="cat0_rule")
                )
    return samples


def knn_top5(embeddings: EmbeddingTable, word: str) -> list[str]:
    """The 5 vocabulary words nearest to `word` by cosine, excluding the
    word itself; exact ties order lexicographically."""
    if word not in embeddings:
        raise SiaGenError(f"word {word!r} not in embedding vocabulary")
    if len(embeddings) < 6:
        raise SiaGenError(f"vocabulary of {len(embeddings)} is too small for 5 neighbors")
    target = embeddings.vector(word)
    scored = [
        (-cosine(target, embeddings.vector(other)), other)
        for other in embeddings.vocabulary
        if other != word
    ]
    scored.sort()
    return [other for _, other in scored[:5]]


_SWAP_LABEL = {4: (3, "swap_from_4"), 2: (1, "swap_from_2")}
_WORD_RE = re.compile(r"\S+")


def swap_generate(
    sample: SiaSample,
    entity_spans: Sequence[tuple[int, int]],
    embeddings: EmbeddingTable,
    swap_prob: float,
    rng_seed: int,
) -> SiaSample:
    """Degrade a label-4/2 sample into label-3/1 by entity word swapping.

    Each entity is selected with probability swap_prob; every word of a
    selected entity is replaced by a uniformly random pick among its 5
    nearest embedding neighbors. Words without a vector stay in place
    (logged). Token count is preserved. Deterministic for a given seed.
    """
    if sample.label not in _SWAP_LABEL:
        raise SiaGenError(f"swap_generate needs a label-4 or label-2 sample, got {sample.label}")
    if not 0.0 <= swap_prob <= 1.0:
        raise SiaGenError(f"swap_prob {swap_prob} outside [0, 1]")
    sentence = sample.sentence
    spans = sorted(entity_spans)
    last_end = 0
    for begin, end in spans:
        if begin < last_end or begin < 0 or end > len(sentence) or begin >= end:
            raise SiaGenError(f"entity span [{begin}, {end}) invalid for sentence")
        last_end = end

    rng = random.Random(rng_seed)
    pieces = []
    cursor = 0
    for begin, end in spans:
        pieces.append(sentence[cursor:begin])
        entity = sentence[begin:end]
        if rng.random() < swap_prob:
            pieces.append(_swap_entity_words(entity, embeddings, rng))
        else:
            pieces.append(entity)
        cursor = end
    pieces.append(sentence[cursor:])
    new_label, provenance = _SWAP_LABEL[sample.label]
    return SiaSample(
        query=sample.query, sentence="".join(pieces), label=new_label, provenance=provenance
    )


def _lookup_token(word: str, embeddings: EmbeddingTable) -> str | None:
    if word in embeddings:
        return word
    lowered = word.lower()
    if lowered in embeddings:
        return lowered
    return None


def _swap_entity_words(entity: str, embeddings: EmbeddingTable, rng: random.Random) -> str:
    def replace(match: re.Match) -> str:
        word = match.group(0)
        token = _lookup_token(word, embeddings)
        if token is None:
            logger.debug("no embedding for %r; left unswapped", word)
            return word
        return rng.choice(knn_top5(embeddings, token))

    return _WORD_RE.sub(replace, entity)


EntityProvider = Callable[[str], list[tuple[int, int]]]


class DictionaryEntityMatcher:
    """Case-insensitive longest-match dictionary NER over a term lexicon."""

    def __init__(self, terms: Iterable[str]):
        cleaned = sorted({t.strip() for t in terms if t.strip()}, key=len, reverse=True)
        if not cleaned:
            raise SiaGenError("entity lexicon is empty")
        self._patterns = [
            re.compile(r"(?<!\w)" + re.escape(term) + r"(?!\w)", re.IGNORECASE)
            for term in cleaned
        ]

    def __call__(self, sentence: str) -> list[tuple[int, int]]:
        taken: list[tuple[int, int]] = []
        for pattern in self._patterns:
            for match in pattern.finditer(sentence):
                span = (match.start(), match.end())
                if all(span[1] <= b or span[0] >= e for b, e in taken):
                    taken.append(span)
        return sorted(taken)

    @classmethod
    def from_file(cls, path: str) -> "DictionaryEntityMatcher":
        with open(path, "r", encoding="utf-8") as fh:
            return cls(fh.readlines())


def _row_seed(seed: int, provenance: str, row_index: int) -> int:
    digest = hashlib.sha256(f"{seed}:{provenance}:{row_index}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def generate_sia_dataset(
    rows: Sequence[QascRow],
    relevance_scorer: Scorer,
    sts_scorer: Scorer,
    embeddings: EmbeddingTable,
    entity_provider: EntityProvider,
    threshold: float = 4.0,
    swap_prob: float = 0.5,
    seed: int = 0,
) -> list[SiaSample]:
    """Full generation pass: categories 4, 2, 0, then swaps 4->3 and 2->1.

    Per-row randomness derives from (seed, provenance, row index), so
    row-parallel and serial generation agree.
    """
    cat4 = gen_cat4(rows)
    cat2 = gen_cat2(rows, relevance_scorer)
    cat0 = gen_cat0(rows, sts_scorer, threshold)
    swapped = []
    for provenance, base_samples in (("swap_from_4", cat4), ("swap_from_2", cat2)):
        for row_index, sample in enumerate(base_samples):
            spans = entity_provider(sample.sentence)
            swapped.append(
                swap_generate(
                    sample,
                    spans,
                    embeddings,
                    swap_prob,
                    rng_seed=_row_seed(seed, provenance, row_index),
                )
            )
    return cat4 + cat2 + cat0 + swapped


_TSV_CLEAN_RE = re.compile(r"[\t\n\r]")


def write_sia_tsv(samples: Sequence[SiaSample], path: str) -> None:
    """TSV "query<TAB>sentence<TAB>label<TAB>provenance"; internal tabs and
    newlines become spaces (the JSONL writer is the lossless form)."""
    with open(path, "w", encoding="utf-8") as fh:
        for sample in samples:
            query = _TSV_CLEAN_RE.sub(" ", sample.query)
            sentence = _TSV_CLEAN_RE.sub(" ", sample.sentence)
            fh.write(f"{query}\t{sentence}\t{sample.label}\t{sample.provenance}\n")


def write_sia_jsonl(samples: Sequence[SiaSample], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for sample in samples:
            fh.write(
                json.dumps(
                    {
                        "query": sample.query,
                        "sentence": sample.sentence,
                        "label": sample.label,
                        "provenance": sample.provenance,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
