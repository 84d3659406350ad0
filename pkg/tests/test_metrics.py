import random

import pytest

from semir.corpus import GoldLabels, Query, QuerySet, Snippet
from semir.fusion import RankedEntry, RankedRun, ScoredDoc, ScoredSnippet
from semir.metrics import (
    MatchPolicy,
    MetricsError,
    average_precision,
    evaluate_run,
    gmap_score,
    json_to_run,
    map_score,
    precision_recall_f1,
    read_predictions,
    run_to_json,
    validate_run_against_corpus,
    write_predictions,
)

from oracles import oracle_ap, oracle_evaluate, oracle_prf

doc_eq = lambda a, b: a == b  # noqa: E731


class TestPrecisionRecallF1:
    def test_perfect(self):
        p, r, f = precision_recall_f1(list("abcde"), list("abcde"), doc_eq)
        assert (p, r, f) == (1.0, 1.0, 1.0)

    def test_disjoint(self):
        assert precision_recall_f1(["a"], ["b"], doc_eq) == (0.0, 0.0, 0.0)

    def test_half_precision_full_recall(self):
        p, r, f = precision_recall_f1(["a", "b", "c", "d"], ["a", "c"], doc_eq)
        assert p == 0.5
        assert r == 1.0
        assert f == pytest.approx(2 / 3)

    def test_empty_sides(self):
        assert precision_recall_f1([], ["a"], doc_eq) == (0.0, 0.0, 0.0)
        assert precision_recall_f1(["a"], [], doc_eq) == (0.0, 0.0, 0.0)


class TestAveragePrecision:
    def test_hand_case(self):
        assert average_precision(["a", "x", "b"], ["a", "b"], doc_eq) == pytest.approx(
            (1 / 1 + 2 / 3) / 2
        )

    def test_perfect_prefix(self):
        assert average_precision(["a", "b", "c"], ["a", "b", "c"], doc_eq) == 1.0

    def test_nothing_relevant(self):
        assert average_precision(["x", "y"], ["a"], doc_eq) == 0.0

    def test_empty_gold(self):
        assert average_precision(["a"], [], doc_eq) == 0.0

    def test_capped_mode_truncates(self):
        gold = [f"g{i}" for i in range(15)]
        preds = gold[:12]
        capped = average_precision(preds, gold, doc_eq, denom_mode="capped")
        assert capped == 1.0  # first 10 all relevant, denominator 10
        plain = average_precision(preds, gold, doc_eq, denom_mode="gold")
        assert plain == pytest.approx(12 / 15)

    def test_promotion_monotonicity(self):
        """Swapping a relevant item one rank earlier never lowers AP."""
        rng = random.Random(4)
        for _ in range(300):
            n = rng.randint(2, 12)
            gold = [f"g{i}" for i in range(rng.randint(1, 6))]
            pool = gold + [f"x{i}" for i in range(n)]
            rng.shuffle(pool)
            preds = pool[:n]
            base = average_precision(preds, gold, doc_eq)
            ks = [
                k
                for k in range(1, len(preds))
                if preds[k] in gold and preds[k - 1] not in gold
            ]
            if not ks:
                continue
            k = rng.choice(ks)
            promoted = list(preds)
            promoted[k - 1], promoted[k] = promoted[k], promoted[k - 1]
            assert average_precision(promoted, gold, doc_eq) >= base


class TestMapGmap:
    def test_map(self):
        assert map_score([1.0, 0.5]) == 0.75

    def test_gmap_constant(self):
        assert gmap_score([0.25, 0.25, 0.25], 0.01) == pytest.approx(0.26)

    def test_gmap_hand_case(self):
        assert gmap_score([0.0, 1.0], 0.01) == pytest.approx(0.100499, abs=1e-6)

    def test_empty_rejected(self):
        with pytest.raises(MetricsError):
            map_score([])
        with pytest.raises(MetricsError):
            gmap_score([])

    def test_gmap_permutation_invariant_and_monotone(self):
        rng = random.Random(8)
        for _ in range(100):
            values = [rng.random() for _ in range(rng.randint(1, 10))]
            shuffled = list(values)
            rng.shuffle(shuffled)
            assert gmap_score(values) == pytest.approx(gmap_score(shuffled), abs=1e-12)
            bumped = list(values)
            pos = rng.randrange(len(bumped))
            bumped[pos] = min(1.0, bumped[pos] + 0.05)
            if bumped[pos] > values[pos]:
                assert gmap_score(bumped) > gmap_score(values)


def _random_case(rng):
    """Random gold + prediction lists for one query (docs and snippets)."""
    doc_universe = [f"d{i}" for i in range(12)]
    gold_docs = rng.sample(doc_universe, rng.randint(0, 6))
    pred_docs = rng.sample(doc_universe, rng.randint(0, 10))

    def snippet(doc_id):
        begin = rng.randint(0, 40)
        return Snippet(
            doc_id=doc_id,
            begin=begin,
            end=begin + rng.randint(1, 25),
            text="t",
            begin_section=rng.choice(["title", "abstract"]),
            end_section="abstract",
        )

    gold_snips = [snippet(rng.choice(gold_docs))] if gold_docs else []
    for _ in range(rng.randint(0, 5)):
        if gold_docs:
            gold_snips.append(snippet(rng.choice(gold_docs)))
    pred_snips = [snippet(rng.choice(doc_universe)) for _ in range(rng.randint(0, 10))]
    return gold_docs, pred_docs, gold_snips[:10], pred_snips


class TestOracleEquivalence:
    def test_thousand_random_cases(self):
        rng = random.Random(99)
        policy = MatchPolicy()
        for case in range(1000):
            gold_docs, pred_docs, gold_snips, pred_snips = _random_case(rng)
            for mode in ("gold", "capped"):
                assert average_precision(
                    pred_docs, gold_docs, doc_eq, mode
                ) == pytest.approx(oracle_ap(pred_docs, gold_docs, doc_eq, mode), abs=1e-12)
                assert average_precision(
                    pred_snips, gold_snips, policy.snippets_match, mode
                ) == pytest.approx(
                    oracle_ap(pred_snips, gold_snips, policy.snippets_match, mode), abs=1e-12
                )
            assert precision_recall_f1(pred_docs, gold_docs, doc_eq) == pytest.approx(
                oracle_prf(pred_docs, gold_docs, doc_eq), abs=1e-12
            )
            assert precision_recall_f1(
                pred_snips, gold_snips, policy.snippets_match
            ) == pytest.approx(
                oracle_prf(pred_snips, gold_snips, policy.snippets_match), abs=1e-12
            )


def _run_and_gold(rng, n_queries):
    entries = []
    gold_items = []
    run_by_qid = {}
    gold_by_qid = {}
    for qi in range(n_queries):
        qid = f"q{qi}"
        gold_docs, pred_docs, gold_snips, pred_snips = _random_case(rng)
        # Gold snippets must cite gold docs (corpus invariant);
        # predictions have no such constraint.
        gold_items.append(
            (
                Query(query_id=qid, body=f"query {qi}"),
                GoldLabels(
                    query_id=qid,
                    gold_doc_ids=tuple(gold_docs),
                    gold_snippets=tuple(gold_snips),
                ),
            )
        )
        include = rng.random() > 0.1  # some queries missing from the run
        if include:
            entries.append(
                RankedEntry(
                    query_id=qid,
                    query_body=f"query {qi}",
                    documents=[ScoredDoc(d, None) for d in pred_docs],
                    snippets=[ScoredSnippet(s, None) for s in pred_snips],
                )
            )
            run_by_qid[qid] = (pred_docs, pred_snips)
        gold_by_qid[qid] = (gold_docs, gold_snips)
    return RankedRun(entries=entries), QuerySet(items=gold_items), run_by_qid, gold_by_qid


class TestEvaluateRun:
    def test_matches_independent_evaluator(self):
        rng = random.Random(1234)
        for trial in range(30):
            run, gold, run_by_qid, gold_by_qid = _run_and_gold(rng, 20)
            report = evaluate_run(run, gold)
            expected = oracle_evaluate(run_by_qid, gold_by_qid)
            for side_name, side in (("documents", report.documents), ("snippets", report.snippets)):
                exp = expected[side_name]
                assert side.mean_precision == pytest.approx(exp["mean_precision"], abs=1e-12)
                assert side.mean_recall == pytest.approx(exp["mean_recall"], abs=1e-12)
                assert side.mean_f1 == pytest.approx(exp["mean_f1"], abs=1e-12)
                assert side.map == pytest.approx(exp["map"], abs=1e-12)
                assert side.gmap == pytest.approx(exp["gmap"], abs=1e-12)

    def test_all_fields_unit_interval(self):
        rng = random.Random(77)
        run, gold, _, _ = _run_and_gold(rng, 25)
        report = evaluate_run(run, gold)
        for side in (report.documents, report.snippets):
            for value in (side.mean_precision, side.mean_recall, side.mean_f1, side.map):
                assert 0.0 <= value <= 1.0
            assert 0.0 <= side.gmap <= 1.0 + 0.01  # epsilon smoothing can nudge past a tiny bit

    def test_run_equals_gold_is_perfect(self):
        gold_items = []
        entries = []
        for qi in range(5):
            qid = f"q{qi}"
            docs = tuple(f"d{qi}{j}" for j in range(3))
            snips = tuple(
                Snippet(doc_id=docs[j], begin=0, end=5, text="abcde") for j in range(3)
            )
            gold_items.append(
                (Query(query_id=qid, body="b"), GoldLabels(qid, docs, snips))
            )
            entries.append(
                RankedEntry(
                    query_id=qid,
                    query_body="b",
                    documents=[ScoredDoc(d, 1.0) for d in docs],
                    snippets=[ScoredSnippet(s, 1.0) for s in snips],
                )
            )
        report = evaluate_run(RankedRun(entries=entries), QuerySet(items=gold_items))
        assert report.documents.map == 1.0
        assert report.snippets.map == 1.0
        assert report.documents.mean_f1 == 1.0

    def test_empty_run_all_zero_gmap_epsilon(self):
        gold_items = [
            (
                Query(query_id=f"q{i}", body="b"),
                GoldLabels(f"q{i}", (f"d{i}",), ()),
            )
            for i in range(5)
        ]
        report = evaluate_run(RankedRun(entries=[]), QuerySet(items=gold_items))
        assert report.documents.map == 0.0
        assert report.documents.gmap == pytest.approx(0.01)

    def test_unknown_run_query_rejected(self):
        gold = QuerySet(items=[(Query(query_id="q0", body="b"), GoldLabels("q0", (), ()))])
        run = RankedRun(
            entries=[RankedEntry(query_id="mystery", query_body="b", documents=[], snippets=[])]
        )
        with pytest.raises(MetricsError, match="mystery"):
            evaluate_run(run, gold)

    def test_report_table_shape(self):
        gold = QuerySet(items=[(Query(query_id="q0", body="b"), GoldLabels("q0", ("d",), ()))])
        run = RankedRun(entries=[])
        table = evaluate_run(run, gold).to_table()
        assert "MPrec" in table and "GMAP" in table
        assert len(table.splitlines()) == 3


class TestPredictionsIO:
    def _sample_run(self):
        snippet = Snippet(
            doc_id="12345", begin=3, end=18, text="relevant words.", begin_section="abstract",
            end_section="abstract",
        )
        entry = RankedEntry(
            query_id="q1",
            query_body="what is relevant?",
            documents=[ScoredDoc("12345", 2.5), ScoredDoc("777", 1.0)],
            snippets=[ScoredSnippet(snippet, 0.9, sent_index=1)],
        )
        return RankedRun(entries=[entry])

    def test_doc_id_to_url_suffix(self):
        data = run_to_json(self._sample_run())
        assert data["questions"][0]["documents"][0].endswith("/pubmed/12345")

    def test_write_read_identity(self, tmp_path):
        run = self._sample_run()
        path = str(tmp_path / "pred.json")
        write_predictions(run, path)
        back = read_predictions(path)
        assert run_to_json(back) == run_to_json(run)

    def test_read_rejects_bad_offsets(self):
        data = run_to_json(self._sample_run())
        data["questions"][0]["snippets"][0]["offsetInEndSection"] = 1  # end <= begin
        with pytest.raises(MetricsError, match=r"questions\[0\].snippets\[0\]"):
            json_to_run(data)

    def test_offsets_validated_against_corpus(self, tiny_corpus):
        snippet = Snippet(
            doc_id="101", begin=0, end=10_000, text="way out of range", begin_section="abstract",
            end_section="abstract",
        )
        run = RankedRun(
            entries=[
                RankedEntry(
                    query_id="q",
                    query_body="b",
                    documents=[ScoredDoc("101", 1.0)],
                    snippets=[ScoredSnippet(snippet, 1.0)],
                )
            ]
        )
        with pytest.raises(MetricsError, match="outside"):
            validate_run_against_corpus(run, tiny_corpus)

    def test_schema_diagnostics_carry_json_path(self):
        with pytest.raises(MetricsError, match=r"\$\.questions\[0\]"):
            json_to_run({"questions": [{"body": "missing id"}]})
