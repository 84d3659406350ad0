"""Corpus and query-set data model: ingestion, sentence segmentation, splitting.

Documents are titled abstracts. Sentence spans index into the combined
text ``title + " " + abstract`` and carry a section tag so they can be
converted back to section-local offsets for the BioASQ JSON schema.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field

PUBMED_URL_PREFIX = "http://www.ncbi.nlm.nih.gov/pubmed/"
MAX_GOLD_ITEMS = 10

# Tokens that end with '.' without ending a sentence. Matched case-insensitively
# against the word immediately before the terminal punctuation; single uppercase
# letters (initials such as "E. coli", "J. Smith") are always protected.
DEFAULT_ABBREVIATIONS = frozenset(
    {
        "e.g", "i.e", "etc", "vs", "cf", "ca", "al", "et al",
        "fig", "figs", "eq", "eqs", "ref", "refs", "no", "nos",
        "dr", "prof", "mr", "mrs", "ms", "st",
        "sp", "spp", "subsp", "var", "approx", "resp",
        "mol", "wt", "vol", "conc", "dept", "univ", "inc", "ltd",
        "min", "max", "sec", "hr", "hrs",
    }
)


class CorpusError(ValueError):
    """Malformed corpus or gold file."""


@dataclass(frozen=True)
class SentenceSpan:
    """Half-open [begin, end) character span of one sentence."""

    sent_index: int
    begin: int
    end: int
    section: str  # "title" | "abstract"

    def __post_init__(self) -> None:
        if self.begin >= self.end:
            raise CorpusError(f"empty span [{self.begin}, {self.end})")
        if self.sent_index < 0:
            raise CorpusError("sent_index must be >= 0")
        if self.section not in ("title", "abstract"):
            raise CorpusError(f"unknown section {self.section!r}")


@dataclass(frozen=True)
class Document:
    doc_id: str
    title: str
    abstract: str
    sentences: tuple[SentenceSpan, ...] = field(default=())

    @property
    def full_text(self) -> str:
        return self.title + " " + self.abstract

    def sentence_text(self, span: SentenceSpan) -> str:
        return self.full_text[span.begin : span.end]

    def section_offsets(self, span: SentenceSpan) -> tuple[str, int, int]:
        """Span offsets local to its own section, as used by the JSON schema."""
        if span.section == "title":
            return "title", span.begin, span.end
        shift = len(self.title) + 1
        return "abstract", span.begin - shift, span.end - shift


@dataclass(frozen=True)
class Query:
    query_id: str
    body: str

    def __post_init__(self) -> None:
        if not self.body:
            raise CorpusError(f"query {self.query_id!r} has empty body")


@dataclass(frozen=True)
class Snippet:
    """A contiguous answer span with section-local offsets."""

    doc_id: str
    begin: int
    end: int
    text: str
    begin_section: str = "abstract"
    end_section: str = "abstract"

    def __post_init__(self) -> None:
        if self.begin < 0 or self.end <= self.begin:
            raise CorpusError(
                f"snippet offsets [{self.begin}, {self.end}) invalid for doc {self.doc_id}"
            )


@dataclass(frozen=True)
class GoldLabels:
    query_id: str
    gold_doc_ids: tuple[str, ...]
    gold_snippets: tuple[Snippet, ...]

    def __post_init__(self) -> None:
        if len(self.gold_doc_ids) > MAX_GOLD_ITEMS:
            raise CorpusError(
                f"query {self.query_id!r}: {len(self.gold_doc_ids)} gold documents "
                f"(limit {MAX_GOLD_ITEMS})"
            )
        if len(self.gold_snippets) > MAX_GOLD_ITEMS:
            raise CorpusError(
                f"query {self.query_id!r}: {len(self.gold_snippets)} gold snippets "
                f"(limit {MAX_GOLD_ITEMS})"
            )
        doc_set = set(self.gold_doc_ids)
        for snip in self.gold_snippets:
            if snip.doc_id not in doc_set:
                raise CorpusError(
                    f"query {self.query_id!r}: snippet references document "
                    f"{snip.doc_id!r} outside the gold document list"
                )


@dataclass
class QuerySet:
    """Queries with optional gold labels; immutable after construction."""

    items: list[tuple[Query, GoldLabels | None]]

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for query, _ in self.items:
            if query.query_id in seen:
                raise CorpusError(f"duplicate query_id {query.query_id!r}")
            seen.add(query.query_id)

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    @property
    def query_ids(self) -> list[str]:
        return [q.query_id for q, _ in self.items]

    def gold_for(self, query_id: str) -> GoldLabels | None:
        for query, gold in self.items:
            if query.query_id == query_id:
                return gold
        raise KeyError(query_id)


@dataclass
class Corpus:
    """Ordered, id-unique document collection."""

    documents: dict[str, Document]

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self):
        return iter(self.documents.values())

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self.documents

    def get(self, doc_id: str) -> Document:
        return self.documents[doc_id]


_TERMINAL_RE = re.compile(r"[.!?]+[\"')\]]*")
_WORD_BEFORE_RE = re.compile(r"[\w.]*\w$")


def _is_boundary(text: str, punct_start: int, punct_end: int, abbreviations: frozenset[str]) -> bool:
    """Boundary check for a terminal-punctuation run at [punct_start, punct_end)."""
    word_match = _WORD_BEFORE_RE.search(text, 0, punct_start)
    if word_match:
        word = word_match.group(0)
        if word.lower() in abbreviations:
            return False
    pos = punct_end
    n = len(text)
    if pos >= n:
        return True
    if not text[pos].isspace():
        return False
    while pos < n and text[pos].isspace():
        pos += 1
    if pos >= n:
        return True
    nxt = text[pos]
    return nxt.isupper() or nxt.isdigit()


def segment_sentences(
    text: str,
    section: str = "abstract",
    abbreviations: frozenset[str] = DEFAULT_ABBREVIATIONS,
    base_offset: int = 0,
    index_offset: int = 0,
) -> list[SentenceSpan]:
    """Split text into sentence spans.

    A boundary sits after a run of terminal punctuation that is (a) not
    preceded by a known abbreviation token and (b) followed by whitespace
    and an uppercase letter or digit, or by end of text. The lookahead
    also keeps species-style initials together ("E. coli"). Spans are
    trimmed of surrounding whitespace and, joined with the gaps between
    them, reconstruct the input exactly.
    """
    if not text or text.isspace():
        return []
    cut_points = []
    for m in _TERMINAL_RE.finditer(text):
        if _is_boundary(text, m.start(), m.end(), abbreviations):
            cut_points.append(m.end())
    if not cut_points or cut_points[-1] < len(text):
        cut_points.append(len(text))

    spans: list[SentenceSpan] = []
    start = 0
    for cut in cut_points:
        piece = text[start:cut]
        lead = len(piece) - len(piece.lstrip())
        trail = len(piece) - len(piece.rstrip())
        begin, end = start + lead, cut - trail
        if begin < end:
            spans.append(
                SentenceSpan(
                    sent_index=index_offset + len(spans),
                    begin=base_offset + begin,
                    end=base_offset + end,
                    section=section,
                )
            )
        start = cut
    return spans


def segment_document(
    doc_id: str,
    title: str,
    abstract: str,
    abbreviations: frozenset[str] = DEFAULT_ABBREVIATIONS,
) -> Document:
    """Build a Document with dense sentence spans over title + abstract.

    The title is one sentence unless it contains terminal punctuation.
    """
    spans: list[SentenceSpan] = []
    if title and not title.isspace():
        if _TERMINAL_RE.search(title):
            spans.extend(segment_sentences(title, "title", abbreviations))
        else:
            lead = len(title) - len(title.lstrip())
            trail = len(title) - len(title.rstrip())
            spans.append(SentenceSpan(0, lead, len(title) - trail, "title"))
    shift = len(title) + 1
    spans.extend(
        segment_sentences(
            abstract, "abstract", abbreviations,
            base_offset=shift, index_offset=len(spans),
        )
    )
    return Document(doc_id=doc_id, title=title, abstract=abstract, sentences=tuple(spans))


def ingest_corpus_jsonl(path: str, abbreviations: frozenset[str] = DEFAULT_ABBREVIATIONS) -> Corpus:
    """Read a corpus from JSONL ({"doc_id", "title", "abstract"} per line).

    Raises CorpusError citing the 1-based line number for malformed lines
    and for duplicate doc_ids (the later line is named).
    """
    documents: dict[str, Document] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise CorpusError(f"line {lineno}: expected a JSON object")
            for key in ("doc_id", "title", "abstract"):
                if key not in obj:
                    raise CorpusError(f"line {lineno}: missing key {key!r}")
            doc_id = str(obj["doc_id"])
            if not doc_id:
                raise CorpusError(f"line {lineno}: empty doc_id")
            if doc_id in documents:
                raise CorpusError(f"line {lineno}: duplicate doc_id {doc_id!r}")
            documents[doc_id] = segment_document(
                doc_id, str(obj["title"]), str(obj["abstract"]), abbreviations
            )
    return Corpus(documents=documents)


def write_corpus_jsonl(corpus: Corpus, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in corpus:
            fh.write(
                json.dumps(
                    {"doc_id": doc.doc_id, "title": doc.title, "abstract": doc.abstract},
                    ensure_ascii=False,
                )
                + "\n"
            )


def doc_id_from_url(url: str) -> str:
    """Final path segment of a PubMed-style document URL."""
    return url.rstrip("/").rsplit("/", 1)[-1]


def doc_id_to_url(doc_id: str) -> str:
    return PUBMED_URL_PREFIX + doc_id


def _parse_question_gold(obj: dict, pos: int) -> tuple[Query, GoldLabels]:
    where = f"questions[{pos}]"
    if "id" not in obj:
        raise CorpusError(f"{where}: missing 'id'")
    query = Query(query_id=str(obj["id"]), body=str(obj.get("body", "")))
    doc_ids = tuple(doc_id_from_url(str(u)) for u in obj.get("documents", []))
    snippets = []
    for j, snip in enumerate(obj.get("snippets", [])):
        try:
            snippets.append(
                Snippet(
                    doc_id=doc_id_from_url(str(snip["document"])),
                    begin=int(snip["offsetInBeginSection"]),
                    end=int(snip["offsetInEndSection"]),
                    text=str(snip["text"]),
                    begin_section=str(snip.get("beginSection", "abstract")),
                    end_section=str(snip.get("endSection", "abstract")),
                )
            )
        except KeyError as exc:
            raise CorpusError(f"{where}.snippets[{j}]: missing key {exc.args[0]!r}") from exc
    try:
        gold = GoldLabels(
            query_id=query.query_id, gold_doc_ids=doc_ids, gold_snippets=tuple(snippets)
        )
    except CorpusError as exc:
        raise CorpusError(f"{where}: {exc}") from exc
    return query, gold


def ingest_bioasq_gold(path: str) -> QuerySet:
    """Read a gold (or predictions) file into a QuerySet.

    Document URLs are reduced to doc_ids by taking the final path segment.
    """
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict) or "questions" not in data:
        raise CorpusError("missing top-level 'questions' key")
    items: list[tuple[Query, GoldLabels | None]] = []
    for pos, obj in enumerate(data["questions"]):
        items.append(_parse_question_gold(obj, pos))
    return QuerySet(items=items)


def split_train_dev(qs: QuerySet, seed: int, dev_count: int) -> tuple[QuerySet, QuerySet]:
    """Deterministic disjoint split; dev gets exactly dev_count queries."""
    n = len(qs)
    if dev_count >= n:
        raise CorpusError(f"dev_count {dev_count} must be < query count {n}")
    if dev_count < 0:
        raise CorpusError("dev_count must be >= 0")
    order = list(range(n))
    random.Random(seed).shuffle(order)
    dev_positions = set(order[:dev_count])
    train = [item for i, item in enumerate(qs.items) if i not in dev_positions]
    dev = [item for i, item in enumerate(qs.items) if i in dev_positions]
    return QuerySet(items=train), QuerySet(items=dev)
