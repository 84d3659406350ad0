import json
import random

import pytest

from semir import cli
from semir.corpus import ingest_bioasq_gold, ingest_corpus_jsonl
from semir.fusion import Pipeline, RankingParams, reference_weights
from semir.lexindex import load_index
from semir.metrics import MatchPolicy, evaluate_run, read_predictions
from semir.scorers import reference_scorer_set

from conftest import EMBEDDING_VECTORS, random_corpus


@pytest.fixture
def workdir(tmp_path):
    """Corpus JSONL + gold JSON fixture on disk."""
    rng = random.Random(404)
    corpus = random_corpus(rng, 30)
    corpus_path = tmp_path / "corpus.jsonl"
    with open(corpus_path, "w") as fh:
        for doc in corpus:
            fh.write(
                json.dumps({"doc_id": doc.doc_id, "title": doc.title, "abstract": doc.abstract})
                + "\n"
            )

    questions = []
    doc_list = list(corpus)
    for qi in range(8):
        docs = rng.sample(doc_list, rng.randint(1, 3))
        snippets = []
        for doc in docs[:2]:
            span = doc.sentences[-1]
            section, begin, end = doc.section_offsets(span)
            snippets.append(
                {
                    "document": f"http://www.ncbi.nlm.nih.gov/pubmed/{doc.doc_id}",
                    "text": doc.sentence_text(span),
                    "offsetInBeginSection": begin,
                    "offsetInEndSection": end,
                    "beginSection": section,
                    "endSection": section,
                }
            )
        questions.append(
            {
                "id": f"q{qi}",
                "body": doc_list[qi].title.rstrip("."),
                "documents": [
                    f"http://www.ncbi.nlm.nih.gov/pubmed/{d.doc_id}" for d in docs
                ],
                "snippets": snippets,
            }
        )
    gold_path = tmp_path / "gold.json"
    gold_path.write_text(json.dumps({"questions": questions}))
    return tmp_path, str(corpus_path), str(gold_path)


def run_cli(args):
    return cli.main([str(a) for a in args])


class TestIngestIndex:
    def test_ingest_normalizes(self, workdir, capsys):
        tmp_path, corpus_path, _ = workdir
        out = tmp_path / "normalized.jsonl"
        assert run_cli(["ingest", "--input", corpus_path, "--output", out]) == 0
        assert "ingested 30 documents" in capsys.readouterr().out
        assert ingest_corpus_jsonl(str(out)) == ingest_corpus_jsonl(corpus_path)

    def test_index_build(self, workdir, capsys):
        tmp_path, corpus_path, _ = workdir
        out = tmp_path / "index.json"
        assert run_cli(["index", "--corpus", corpus_path, "--output", out]) == 0
        index = load_index(str(out))
        assert index.doc_count == 30

    def test_bad_input_is_nonzero_exit(self, tmp_path, capsys):
        bad = tmp_path / "bad.jsonl"
        bad.write_text("{broken\n")
        out = tmp_path / "out.jsonl"
        assert run_cli(["ingest", "--input", bad, "--output", out]) == 1
        assert "error:" in capsys.readouterr().err
        assert not out.exists()  # no partial output


@pytest.fixture
def indexed(workdir):
    tmp_path, corpus_path, gold_path = workdir
    index_path = tmp_path / "index.json"
    assert run_cli(["index", "--corpus", corpus_path, "--output", index_path]) == 0
    return tmp_path, corpus_path, gold_path, str(index_path)


class TestRankRunEvaluate:
    def test_rank_run_schema_and_round_trip(self, indexed, capsys):
        tmp_path, corpus_path, gold_path, index_path = indexed
        pred_path = tmp_path / "pred.json"
        code = run_cli(
            [
                "rank-run", "--corpus", corpus_path, "--index", index_path,
                "--queries", gold_path, "--output", pred_path,
            ]
        )
        assert code == 0
        data = json.loads(pred_path.read_text())
        assert len(data["questions"]) == 8
        for question in data["questions"]:
            assert len(question["documents"]) <= 10
            assert len(question["snippets"]) <= 10
        run = read_predictions(str(pred_path))
        assert len(run) == 8

    def test_cli_evaluate_equals_in_process(self, indexed, capsys):
        tmp_path, corpus_path, gold_path, index_path = indexed
        pred_path = tmp_path / "pred.json"
        run_cli(
            [
                "rank-run", "--corpus", corpus_path, "--index", index_path,
                "--queries", gold_path, "--output", pred_path,
            ]
        )
        capsys.readouterr()
        assert run_cli(["evaluate", "--pred", pred_path, "--gold", gold_path, "--json"]) == 0
        cli_report = json.loads(capsys.readouterr().out)

        corpus = ingest_corpus_jsonl(corpus_path)
        index = load_index(index_path)
        pipeline = Pipeline(corpus, index, reference_scorer_set(None))
        gold = ingest_bioasq_gold(gold_path)
        run = pipeline.rank_run(gold, reference_weights(), RankingParams())
        report = evaluate_run(run, gold, MatchPolicy())
        assert cli_report == report.to_dict()

    def test_evaluate_identical_files_is_perfect(self, workdir, capsys):
        _, _, gold_path = workdir
        assert run_cli(["evaluate", "--pred", gold_path, "--gold", gold_path, "--json"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["documents"]["map"] == 1.0
        assert report["documents"]["mean_f1"] == 1.0
        assert report["snippets"]["map"] == 1.0

    def test_search_cli_matches_api_payload(self, indexed, capsys):
        tmp_path, corpus_path, gold_path, index_path = indexed
        assert (
            run_cli(
                [
                    "search", "--corpus", corpus_path, "--index", index_path,
                    "--query", "heart therapy trial",
                ]
            )
            == 0
        )
        printed = json.loads(capsys.readouterr().out)

        from semir.gateway import GatewayState, build_search_answer

        state = GatewayState(
            scorers=reference_scorer_set(None),
            pipeline=Pipeline(
                ingest_corpus_jsonl(corpus_path), load_index(index_path), reference_scorer_set(None)
            ),
            weights_profiles={"default": reference_weights()},
        )
        assert printed == build_search_answer(state, "heart therapy trial", 10, 10, "default")

    def test_debug_tsv(self, indexed):
        tmp_path, corpus_path, gold_path, index_path = indexed
        pred_path = tmp_path / "pred.json"
        tsv_path = tmp_path / "debug.tsv"
        run_cli(
            [
                "rank-run", "--corpus", corpus_path, "--index", index_path,
                "--queries", gold_path, "--output", pred_path, "--debug-tsv", tsv_path,
            ]
        )
        header = tsv_path.read_text().splitlines()[0]
        assert header == "query_id\tdoc_id\tsent_index\tbase\tdoc_score\tfinal"


class TestOptimizeCli:
    def test_fixed_seed_reproduces_trace(self, indexed):
        tmp_path, corpus_path, gold_path, index_path = indexed
        config_path = tmp_path / "opt.json"
        config_path.write_text(
            json.dumps(
                {
                    "init": "balanced",
                    "strategy": {"kind": "guided", "budget": 8, "seed": 3},
                    "e_objective": "doc_map",
                    "m_objective": "sent_map",
                    "max_iters": 2,
                    "ranking": {"pool_k": 20, "top_docs": 10, "top_snippets": 10},
                }
            )
        )
        traces = []
        for idx in range(2):
            weights_path = tmp_path / f"weights{idx}.json"
            trace_path = tmp_path / f"trace{idx}.jsonl"
            code = run_cli(
                [
                    "optimize", "--corpus", corpus_path, "--index", index_path,
                    "--queries", gold_path, "--config", config_path,
                    "--output", weights_path, "--trace", trace_path,
                ]
            )
            assert code == 0
            traces.append(trace_path.read_bytes())
        assert traces[0] == traces[1]
        assert (tmp_path / "weights0.json").read_text() == (tmp_path / "weights1.json").read_text()


class TestDatagenCli:
    def test_generates_tsv_and_jsonl(self, tmp_path, capsys):
        qasc_path = tmp_path / "rows.jsonl"
        with open(qasc_path, "w") as fh:
            for i in range(5):
                fh.write(
                    json.dumps(
                        {
                            "question": f"What is item {i}?",
                            "possible_answers": "(A) a (B) b",
                            "correct_answer": "a",
                            "fact1": f"heart fact {i}",
                            "fact2": f"fever fact {i}",
                            "combinedFact": f"heart and fever fact {i}",
                        }
                    )
                    + "\n"
                )
        emb_path = tmp_path / "emb.txt"
        with open(emb_path, "w") as fh:
            for token, vec in EMBEDDING_VECTORS.items():
                fh.write(token + " " + " ".join(str(x) for x in vec) + "\n")
        lex_path = tmp_path / "terms.txt"
        lex_path.write_text("heart\nfever\n")
        out_tsv = tmp_path / "sia.tsv"
        out_jsonl = tmp_path / "sia.jsonl"
        code = run_cli(
            [
                "datagen", "--qasc", qasc_path, "--embeddings", emb_path,
                "--lexicon", lex_path, "--output", out_tsv, "--jsonl", out_jsonl,
                "--seed", "5",
            ]
        )
        assert code == 0
        assert "generated" in capsys.readouterr().out
        lines = out_tsv.read_text().splitlines()
        assert all(len(line.split("\t")) == 4 for line in lines)
        labels = {int(line.split("\t")[2]) for line in lines}
        assert {1, 2, 3, 4} <= labels
