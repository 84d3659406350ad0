import json
import random

import pytest

from semir.scorers import EmbeddingTable, ScorerKind
from semir.siagen import (
    DictionaryEntityMatcher,
    QascRow,
    SiaGenError,
    SiaSample,
    gen_cat0,
    gen_cat2,
    gen_cat4,
    generate_sia_dataset,
    knn_top5,
    read_qasc_jsonl,
    swap_generate,
    write_sia_jsonl,
    write_sia_tsv,
)

from conftest import EMBEDDING_VECTORS, HashScorer
from oracles import oracle_knn


def row(question, fact1="fact one here", fact2="fact two there", combined=None):
    return QascRow(
        question=question,
        possible_answers="(A) x (B) y",
        correct_answer="x",
        fact1=fact1,
        fact2=fact2,
        combined_fact=combined or f"{fact1} and {fact2}",
    )


class FixedScorer:
    """Scores from an explicit (query, sentence) -> value table."""

    def __init__(self, kind, table, default=0.0):
        self.kind = kind
        self.table = table
        self.default = default
        self.scorer_id = f"fixed-{kind.value}/1"

    def score_raw(self, query, sentence):
        return self.table.get((query, sentence), self.default)


class TestCat4:
    def test_one_sample_per_row(self):
        rows = [row("Why is the sky blue?"), row("What is rain?")]
        samples = gen_cat4(rows)
        assert [s.query for s in samples] == [r.question for r in rows]
        assert [s.sentence for s in samples] == [r.combined_fact for r in rows]
        assert all(s.label == 4 and s.provenance == "cat4_rule" for s in samples)

    def test_zero_rows(self):
        assert gen_cat4([]) == []


class TestCat2:
    def test_scorer_argmax_choice(self):
        r = row("Which fact wins?")
        table = {
            (r.question, r.fact1): 0.2,
            (r.question, r.fact2): 0.9,
        }
        scorer = FixedScorer(ScorerKind.relevance, table)
        samples = gen_cat2([r], scorer)
        assert samples[0].sentence == r.fact2
        assert samples[0].label == 2

    def test_tie_keeps_fact1(self):
        r = row("Equal facts?")
        scorer = FixedScorer(ScorerKind.relevance, {}, default=0.5)
        samples = gen_cat2([r], scorer)
        assert samples[0].sentence == r.fact1

    def test_choice_matches_rechecked_scores(self):
        rng = random.Random(13)
        rows = [row(f"Question number {i}?") for i in range(30)]
        scorer = HashScorer(ScorerKind.relevance, 3)
        samples = gen_cat2(rows, scorer)
        for r, sample in zip(rows, samples):
            s1 = scorer.score_raw(r.question, r.fact1)
            s2 = scorer.score_raw(r.question, r.fact2)
            expected = r.fact1 if s1 >= s2 else r.fact2
            assert sample.sentence == expected

    def test_wrong_kind_rejected(self):
        with pytest.raises(SiaGenError):
            gen_cat2([row("q?")], HashScorer(ScorerKind.sts))


class TestCat0:
    def test_identical_questions_skipped(self):
        rows = [row("Same question?"), row("Same question?")]
        scorer = FixedScorer(ScorerKind.sts, {}, default=5.0)
        assert gen_cat0(rows, scorer, threshold=4.0) == []

    def test_no_pair_above_threshold(self):
        rows = [row("One?"), row("Two?")]
        scorer = FixedScorer(ScorerKind.sts, {}, default=1.0)
        assert gen_cat0(rows, scorer, threshold=4.0) == []

    def test_qualifying_pair_emits_two_samples(self):
        a, b = row("How do plants eat?"), row("How do plants feed?")
        scorer = FixedScorer(ScorerKind.sts, {(a.question, b.question): 4.5})
        samples = gen_cat0([a, b], scorer, threshold=4.0)
        assert len(samples) == 2
        assert samples[0].query == a.question
        assert samples[0].sentence == b.combined_fact
        assert samples[1].query == b.question
        assert samples[1].sentence == a.combined_fact
        assert all(s.label == 0 and s.provenance == "cat0_rule" for s in samples)

    def test_no_sample_pairs_query_with_own_fact(self):
        rng = random.Random(5)
        rows = [
            row(
                f"Question {i} about topic {i % 3}?",
                fact1=f"fact one {i}",
                fact2=f"fact two {i}",
            )
            for i in range(12)
        ]
        scorer = HashScorer(ScorerKind.sts, 11)
        samples = gen_cat0(rows, scorer, threshold=2.0)
        own_fact = {r.question: r.combined_fact for r in rows}
        for sample in samples:
            assert own_fact[sample.query] != sample.sentence


class TestKnn:
    def test_matches_exhaustive_oracle(self, embeddings):
        for word in EMBEDDING_VECTORS:
            assert knn_top5(embeddings, word) == oracle_knn(EMBEDDING_VECTORS, word)

    def test_excludes_self(self, embeddings):
        for word in EMBEDDING_VECTORS:
            assert word not in knn_top5(embeddings, word)

    def test_tie_breaks_lexicographically(self):
        table = EmbeddingTable(
            {
                "anchor": [1.0, 0.0],
                "zeta": [1.0, 0.0],
                "beta": [1.0, 0.0],
                "far1": [0.0, 1.0],
                "far2": [-1.0, 0.0],
                "far3": [0.0, -1.0],
            }
        )
        neighbors = knn_top5(table, "anchor")
        assert neighbors[:2] == ["beta", "zeta"]

    def test_unknown_word(self, embeddings):
        with pytest.raises(SiaGenError):
            knn_top5(embeddings, "unknown")

    def test_small_vocabulary_rejected(self):
        table = EmbeddingTable({"a": [1.0], "b": [0.5], "c": [0.2]})
        with pytest.raises(SiaGenError, match="too small"):
            knn_top5(table, "a")


class TestSwapGenerate:
    def _sample(self, sentence="heart failure causes pain", label=4):
        provenance = "cat4_rule" if label == 4 else "cat2_rule"
        return SiaSample(query="What hurts?", sentence=sentence, label=label, provenance=provenance)

    def test_zero_probability_only_relabels(self, embeddings):
        sample = self._sample()
        out = swap_generate(sample, [(0, 5)], embeddings, swap_prob=0.0, rng_seed=1)
        assert out.sentence == sample.sentence
        assert out.label == 3
        assert out.provenance == "swap_from_4"

    def test_label_two_maps_to_one(self, embeddings):
        sample = self._sample(label=2)
        out = swap_generate(sample, [], embeddings, swap_prob=1.0, rng_seed=1)
        assert out.label == 1
        assert out.provenance == "swap_from_2"

    def test_certain_swap_stays_in_top5_sets(self, embeddings):
        sample = self._sample("heart pain")
        out = swap_generate(
            sample, [(0, len("heart pain"))], embeddings, swap_prob=1.0, rng_seed=7
        )
        words = out.sentence.split(" ")
        assert len(words) == 2
        assert words[0] in oracle_knn(EMBEDDING_VECTORS, "heart")
        assert words[1] in oracle_knn(EMBEDDING_VECTORS, "pain")

    def test_token_count_preserved(self, embeddings):
        rng = random.Random(23)
        vocab_words = list(EMBEDDING_VECTORS)
        for trial in range(30):
            words = rng.choices(vocab_words, k=rng.randint(2, 8))
            sentence = " ".join(words)
            sample = self._sample(sentence)
            out = swap_generate(
                sample, [(0, len(sentence))], embeddings, swap_prob=rng.random(), rng_seed=trial
            )
            assert len(out.sentence.split(" ")) == len(words)

    def test_unembedded_word_left_alone(self, embeddings):
        sample = self._sample("zzzunknown heart")
        out = swap_generate(
            sample, [(0, len("zzzunknown heart"))], embeddings, swap_prob=1.0, rng_seed=3
        )
        first, second = out.sentence.split(" ")
        assert first == "zzzunknown"
        assert second in oracle_knn(EMBEDDING_VECTORS, "heart")

    def test_deterministic_per_seed(self, embeddings):
        sample = self._sample("heart pain fever cough")
        spans = [(0, 10), (11, 22)]
        a = swap_generate(sample, spans, embeddings, 0.7, rng_seed=99)
        b = swap_generate(sample, spans, embeddings, 0.7, rng_seed=99)
        c = swap_generate(sample, spans, embeddings, 0.7, rng_seed=100)
        assert a == b
        assert a != c or a.sentence == sample.sentence

    def test_invalid_spans_rejected(self, embeddings):
        sample = self._sample()
        with pytest.raises(SiaGenError):
            swap_generate(sample, [(5, 2)], embeddings, 0.5, 1)
        with pytest.raises(SiaGenError):
            swap_generate(sample, [(0, 9999)], embeddings, 0.5, 1)
        with pytest.raises(SiaGenError):
            swap_generate(sample, [(0, 8), (4, 12)], embeddings, 0.5, 1)  # overlap

    def test_label_zero_input_rejected(self, embeddings):
        bad = SiaSample(query="q", sentence="s", label=0, provenance="cat0_rule")
        with pytest.raises(SiaGenError):
            swap_generate(bad, [], embeddings, 0.5, 1)


class TestEntityMatcher:
    def test_longest_match_wins(self):
        matcher = DictionaryEntityMatcher(["heart", "heart attack"])
        spans = matcher("A heart attack happened")
        assert spans == [(2, 14)]

    def test_case_insensitive_word_boundaries(self):
        matcher = DictionaryEntityMatcher(["Heart"])
        assert matcher("heartfelt heart") == [(10, 15)]

    def test_empty_lexicon_rejected(self):
        with pytest.raises(SiaGenError):
            DictionaryEntityMatcher(["", "  "])


class TestLabelProvenanceConsistency:
    def test_mismatch_rejected(self):
        with pytest.raises(SiaGenError):
            SiaSample(query="q", sentence="s", label=4, provenance="cat2_rule")

    def test_unknown_provenance_rejected(self):
        with pytest.raises(SiaGenError):
            SiaSample(query="q", sentence="s", label=4, provenance="mystery")


class TestEndToEndGeneration:
    def _fixture(self, n=10):
        rng = random.Random(31)
        vocab = list(EMBEDDING_VECTORS)
        rows = []
        for i in range(n):
            words = rng.choices(vocab, k=4)
            rows.append(
                row(
                    f"Question {i} about {' '.join(words[:2])}?",
                    fact1=f"{words[0]} relates to {words[1]}",
                    fact2=f"{words[2]} relates to {words[3]}",
                )
            )
        return rows

    def test_counts_and_reproducibility(self, embeddings, tmp_path):
        rows = self._fixture(10)
        relevance = HashScorer(ScorerKind.relevance, 1)
        sts = HashScorer(ScorerKind.sts, 2)
        matcher = DictionaryEntityMatcher(list(EMBEDDING_VECTORS))

        runs = []
        for _ in range(2):
            samples = generate_sia_dataset(
                rows, relevance, sts, embeddings, matcher,
                threshold=4.0, swap_prob=0.6, seed=97,
            )
            runs.append(samples)
        assert runs[0] == runs[1]

        samples = runs[0]
        by_label = {}
        for s in samples:
            by_label.setdefault(s.label, []).append(s)
        assert len(by_label[4]) == 10
        assert len(by_label[2]) == 10
        assert len(by_label[3]) == 10
        assert len(by_label[1]) == 10
        assert len(by_label.get(0, [])) % 2 == 0

        tsv = tmp_path / "sia.tsv"
        jsonl = tmp_path / "sia.jsonl"
        write_sia_tsv(samples, str(tsv))
        write_sia_jsonl(samples, str(jsonl))
        assert len(tsv.read_text().splitlines()) == len(samples)
        rec = json.loads(jsonl.read_text().splitlines()[0])
        assert set(rec) == {"query", "sentence", "label", "provenance"}


class TestQascIO:
    def test_read_jsonl_with_alias(self, tmp_path):
        path = tmp_path / "rows.jsonl"
        path.write_text(
            json.dumps(
                {
                    "question": "Why?",
                    "possible_answers": "(A) a (B) b",
                    "correct_answer": "a",
                    "fact1": "f1",
                    "fact2": "f2",
                    "combinedFact": "f1 and f2",
                }
            )
            + "\n"
        )
        rows = read_qasc_jsonl(str(path))
        assert rows[0].combined_fact == "f1 and f2"

    def test_empty_question_rejected(self, tmp_path):
        path = tmp_path / "rows.jsonl"
        path.write_text('{"question": "", "combined_fact": "x"}\n')
        with pytest.raises(SiaGenError, match="line 1"):
            read_qasc_jsonl(str(path))
