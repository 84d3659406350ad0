import hashlib
import random

import pytest

from semir.corpus import Corpus, segment_document
from semir.scorers import EmbeddingTable, ScorerKind, ScorerSet


class HashScorer:
    """Deterministic pseudo-random scorer: a pure hash of (seed, kind,
    query, sentence) stretched over the kind's native range."""

    def __init__(self, kind: ScorerKind, seed: int = 0):
        self.kind = kind
        self.seed = seed
        self.scorer_id = f"hash-{kind.value}/{seed}"

    def score_raw(self, query: str, sentence: str) -> float:
        payload = f"{self.seed}|{self.kind.value}|{query}|{sentence}".encode("utf-8")
        digest = hashlib.sha256(payload).digest()
        unit = int.from_bytes(digest[:8], "big") / 2.0**64
        return unit * self.kind.native_max


def hash_scorer_set(seed: int = 0) -> ScorerSet:
    return ScorerSet(
        relevance=HashScorer(ScorerKind.relevance, seed),
        sts=HashScorer(ScorerKind.sts, seed + 1),
        sia=HashScorer(ScorerKind.sia, seed + 2),
    )


def make_corpus(rows) -> Corpus:
    """rows: iterable of (doc_id, title, abstract)."""
    documents = {}
    for doc_id, title, abstract in rows:
        documents[doc_id] = segment_document(doc_id, title, abstract)
    return Corpus(documents=documents)


_VOCAB = [
    "heart", "cardiac", "arrest", "pain", "fever", "cough", "lesion",
    "tumor", "cell", "gene", "protein", "therapy", "dose", "trial",
    "patient", "acute", "chronic", "renal", "hepatic", "neural",
]


def random_corpus(rng: random.Random, n_docs: int, sentences_per_doc=(2, 5), vocab=None) -> Corpus:
    """Synthetic corpus of capitalized word-salad sentences."""
    vocab = vocab or _VOCAB
    rows = []
    for i in range(n_docs):
        title = " ".join(rng.choices(vocab, k=rng.randint(2, 4))).capitalize()
        n_sent = rng.randint(*sentences_per_doc)
        sentences = []
        for _ in range(n_sent):
            words = rng.choices(vocab, k=rng.randint(3, 8))
            sentences.append(" ".join(words).capitalize() + ".")
        rows.append((f"d{i:04d}", title, " ".join(sentences)))
    return make_corpus(rows)


def random_query(rng: random.Random, vocab=None) -> str:
    vocab = vocab or _VOCAB
    return " ".join(rng.choices(vocab, k=rng.randint(1, 4)))


@pytest.fixture
def tiny_corpus() -> Corpus:
    return make_corpus(
        [
            ("101", "Cardiac arrest management.", "The heart stops. Therapy must start fast."),
            ("102", "Renal failure signs.", "Chronic renal disease progresses. Dose matters."),
            ("103", "Fever and cough.", "Acute fever with cough. Patient rest helps recovery."),
        ]
    )


EMBEDDING_VECTORS = {
    "heart": [1.0, 0.1, 0.0, 0.0],
    "cardiac": [0.9, 0.2, 0.1, 0.0],
    "arrest": [0.7, 0.5, 0.0, 0.1],
    "pain": [0.0, 1.0, 0.1, 0.0],
    "ache": [0.1, 0.9, 0.2, 0.0],
    "head": [0.0, 0.8, 0.5, 0.1],
    "fever": [0.0, 0.1, 1.0, 0.0],
    "cough": [0.1, 0.0, 0.9, 0.2],
    "renal": [0.0, 0.0, 0.1, 1.0],
    "kidney": [0.1, 0.0, 0.0, 0.9],
    "therapy": [0.5, 0.5, 0.5, 0.5],
    "dose": [0.4, 0.4, 0.6, 0.4],
}


@pytest.fixture
def embeddings() -> EmbeddingTable:
    return EmbeddingTable(EMBEDDING_VECTORS)
