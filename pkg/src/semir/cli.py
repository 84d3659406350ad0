"""Operator command line: ingest, index, search, rank-run, optimize,
evaluate, datagen, serve.

Every subcommand reads and writes only the paths named in its flags, and
output files are written temp-then-rename so failures never leave partial
files behind.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile

from . import corpus as corpus_mod
from . import fusion, gateway, lexindex, metrics, optimizer, siagen
from .cache import CachedScorer, ScoreCache
from .scorers import EmbeddingTable, ScorerSet, reference_scorer_set


def _atomic_write_text(path: str, content: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(content)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_write_via(path: str, writer) -> None:
    """Run writer(tmp_path), then rename tmp over path."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    os.close(fd)
    try:
        writer(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load_embeddings(path: str | None) -> EmbeddingTable | None:
    return EmbeddingTable.load(path) if path else None


def _build_scorers(args) -> ScorerSet:
    scorers = reference_scorer_set(_load_embeddings(getattr(args, "embeddings", None)))
    cache_path = getattr(args, "cache", None)
    if cache_path:
        cache = ScoreCache(cache_path)
        scorers = ScorerSet(
            relevance=CachedScorer(scorers.relevance, cache),
            sts=CachedScorer(scorers.sts, cache),
            sia=CachedScorer(scorers.sia, cache),
        )
    return scorers


def _load_weights(path: str | None) -> fusion.FusionWeights:
    if path:
        return fusion.load_weights(path)
    return fusion.reference_weights()


def _ranking_params(args) -> fusion.RankingParams:
    return fusion.RankingParams(
        pool_k=args.pool_k, top_docs=args.top_docs, top_snippets=args.top_snippets
    )


def _pipeline_from_args(args) -> fusion.Pipeline:
    corp = corpus_mod.ingest_corpus_jsonl(args.corpus)
    index = lexindex.load_index(args.index)
    return fusion.Pipeline(corpus=corp, index=index, scorers=_build_scorers(args))


def cmd_ingest(args) -> int:
    corp = corpus_mod.ingest_corpus_jsonl(args.input)
    _atomic_write_via(args.output, lambda tmp: corpus_mod.write_corpus_jsonl(corp, tmp))
    sentences = sum(len(doc.sentences) for doc in corp)
    print(f"ingested {len(corp)} documents, {sentences} sentences -> {args.output}")
    return 0


def cmd_index(args) -> int:
    corp = corpus_mod.ingest_corpus_jsonl(args.corpus)
    options = lexindex.TokenizerOptions(
        stopwords=lexindex.DEFAULT_STOPWORDS if args.stopwords else None,
        stem=args.stem,
    )
    index = lexindex.build_index(corp, field_policy=args.field_policy, options=options)
    _atomic_write_via(args.output, lambda tmp: lexindex.save_index(index, tmp))
    print(
        f"indexed {index.doc_count} documents, {len(index.postings)} terms, "
        f"avg length {index.avg_doc_length:.2f} -> {args.output}"
    )
    return 0


def _gateway_state(args, pipeline: fusion.Pipeline) -> gateway.GatewayState:
    return gateway.GatewayState(
        scorers=pipeline.scorers,
        pipeline=pipeline,
        weights_profiles={
            "default": _load_weights(getattr(args, "weights", None)),
            "reference": fusion.reference_weights(),
        },
        ranking=_ranking_params(args),
    )


def cmd_search(args) -> int:
    pipeline = _pipeline_from_args(args)
    state = _gateway_state(args, pipeline)
    answer = gateway.build_search_answer(
        state, args.query, args.top_docs, args.top_snippets, "default"
    )
    print(json.dumps(answer, ensure_ascii=False, indent=2))
    return 0


def cmd_rank_run(args) -> int:
    pipeline = _pipeline_from_args(args)
    queries = corpus_mod.ingest_bioasq_gold(args.queries)
    weights = _load_weights(args.weights)
    params = _ranking_params(args)
    if args.debug_tsv:
        entries = []
        rows = []
        for query, _ in queries:
            entry, details = pipeline.rank(
                query.query_id, query.body, weights, params, return_details=True
            )
            entries.append(entry)
            rows.extend(details)
        run = fusion.RankedRun(entries=entries)
        _atomic_write_via(args.debug_tsv, lambda tmp: fusion.write_debug_tsv(rows, tmp))
    else:
        run = pipeline.rank_run(queries, weights, params)
    _atomic_write_via(
        args.output, lambda tmp: metrics.write_predictions(run, tmp, pipeline.corpus)
    )
    print(f"ranked {len(run)} queries -> {args.output}")
    return 0


def cmd_optimize(args) -> int:
    pipeline = _pipeline_from_args(args)
    queries = corpus_mod.ingest_bioasq_gold(args.queries)
    config = optimizer.load_opt_config(args.config)
    prepared = optimizer.prepare_evaluation(
        pipeline, queries, config.params, config.policy, config.denom_mode
    )
    best, trace = optimizer.alternating_optimize(
        init=config.init,
        e_objective=config.e_objective,
        m_objective=config.m_objective,
        strategy=config.strategy,
        max_iters=config.max_iters,
        prepared=prepared,
    )
    _atomic_write_via(args.output, lambda tmp: fusion.save_weights(best, tmp))
    if args.trace:
        _atomic_write_via(args.trace, lambda tmp: trace.write_jsonl(tmp))
    final = optimizer.evaluate_weights(best, prepared)
    print(f"best weights -> {args.output}")
    print(
        f"doc_map={final.doc_map:.4f} sent_map={final.sent_map:.4f} "
        f"doc_f1={final.doc_f1:.4f} sent_f1={final.sent_f1:.4f}"
    )
    return 0


def cmd_evaluate(args) -> int:
    run = metrics.read_predictions(args.pred)
    gold = corpus_mod.ingest_bioasq_gold(args.gold)
    policy = metrics.MatchPolicy(min_overlap=args.min_overlap)
    report = metrics.evaluate_run(run, gold, policy, denom_mode=args.denom_mode)
    if args.json:
        print(json.dumps(report.to_dict(), indent=2))
    else:
        print(report.to_table())
    return 0


def cmd_datagen(args) -> int:
    rows = siagen.read_qasc_jsonl(args.qasc)
    embeddings = EmbeddingTable.load(args.embeddings)
    scorers = reference_scorer_set(embeddings)
    provider = siagen.DictionaryEntityMatcher.from_file(args.lexicon)
    samples = siagen.generate_sia_dataset(
        rows,
        relevance_scorer=scorers.relevance,
        sts_scorer=scorers.sts,
        embeddings=embeddings,
        entity_provider=provider,
        threshold=args.threshold,
        swap_prob=args.swap_prob,
        seed=args.seed,
    )
    _atomic_write_via(args.output, lambda tmp: siagen.write_sia_tsv(samples, tmp))
    if args.jsonl:
        _atomic_write_via(args.jsonl, lambda tmp: siagen.write_sia_jsonl(samples, tmp))
    by_label: dict[int, int] = {}
    for sample in samples:
        by_label[sample.label] = by_label.get(sample.label, 0) + 1
    counts = " ".join(f"label{k}={v}" for k, v in sorted(by_label.items()))
    print(f"generated {len(samples)} samples ({counts}) -> {args.output}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    scorers = _build_scorers(args)
    pipeline = None
    if args.corpus and args.index:
        corp = corpus_mod.ingest_corpus_jsonl(args.corpus)
        index = lexindex.load_index(args.index)
        pipeline = fusion.Pipeline(corpus=corp, index=index, scorers=scorers)
    repositories = {}
    for spec in args.repository or []:
        if "=" not in spec:
            raise SystemExit(f"--repository expects name=path, got {spec!r}")
        name, path = spec.split("=", 1)
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
        repositories[name] = [text[s.begin : s.end] for s in corpus_mod.segment_sentences(text)]
    state = gateway.GatewayState(
        scorers=scorers,
        repositories=repositories,
        pipeline=pipeline,
        weights_profiles={
            "default": _load_weights(args.weights),
            "reference": fusion.reference_weights(),
        },
        ranking=fusion.RankingParams(pool_k=args.pool_k),
        static_dir=args.static,
    )
    uvicorn.run(gateway.create_app(state), host=args.host, port=args.port)
    return 0


def _add_ranking_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--pool-k", type=int, default=100)
    parser.add_argument("--top-docs", type=int, default=10)
    parser.add_argument("--top-snippets", type=int, default=10)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="semir", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate and normalize a corpus JSONL")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(fn=cmd_ingest)

    p = sub.add_parser("index", help="build an inverted index snapshot")
    p.add_argument("--corpus", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--field-policy", default="title_abstract",
                   choices=("title_abstract", "title", "abstract"))
    p.add_argument("--stopwords", action="store_true", help="filter common stopwords")
    p.add_argument("--stem", action="store_true", help="apply light plural stemming")
    p.set_defaults(fn=cmd_index)

    p = sub.add_parser("search", help="run one query through the full pipeline")
    p.add_argument("--corpus", required=True)
    p.add_argument("--index", required=True)
    p.add_argument("--query", required=True)
    p.add_argument("--embeddings")
    p.add_argument("--weights")
    p.add_argument("--cache")
    _add_ranking_flags(p)
    p.set_defaults(fn=cmd_search)

    p = sub.add_parser("rank-run", help="produce a predictions file for a query set")
    p.add_argument("--corpus", required=True)
    p.add_argument("--index", required=True)
    p.add_argument("--queries", required=True, help="gold-format JSON with the queries")
    p.add_argument("--output", required=True)
    p.add_argument("--embeddings")
    p.add_argument("--weights")
    p.add_argument("--cache")
    p.add_argument("--debug-tsv", help="also dump per-sentence scores as TSV")
    _add_ranking_flags(p)
    p.set_defaults(fn=cmd_rank_run)

    p = sub.add_parser("optimize", help="tune fusion weights on a dev set")
    p.add_argument("--corpus", required=True)
    p.add_argument("--index", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--config", required=True, help="optimizer JSON config")
    p.add_argument("--output", required=True, help="best weights JSON")
    p.add_argument("--trace", help="JSONL trace of evaluated candidates")
    p.add_argument("--embeddings")
    p.add_argument("--cache")
    p.set_defaults(fn=cmd_optimize)

    p = sub.add_parser("evaluate", help="score a predictions file against gold")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--denom-mode", default="gold", choices=("gold", "capped"))
    p.add_argument("--min-overlap", type=int, default=1)
    p.add_argument("--json", action="store_true", help="emit the report as JSON")
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("datagen", help="generate an SIA dataset from QASC-style rows")
    p.add_argument("--qasc", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--lexicon", required=True, help="entity term list, one per line")
    p.add_argument("--output", required=True, help="TSV output path")
    p.add_argument("--jsonl", help="optional lossless JSONL output")
    p.add_argument("--threshold", type=float, default=4.0)
    p.add_argument("--swap-prob", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_datagen)

    p = sub.add_parser("serve", help="serve the HTTP API")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--corpus")
    p.add_argument("--index")
    p.add_argument("--embeddings")
    p.add_argument("--weights")
    p.add_argument("--cache")
    p.add_argument("--repository", action="append", metavar="NAME=PATH")
    p.add_argument("--static", help="directory of UI assets to serve at /ui")
    p.add_argument("--pool-k", type=int, default=100)
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (
        corpus_mod.CorpusError,
        lexindex.IndexingError,
        fusion.FusionError,
        metrics.MetricsError,
        optimizer.OptimizerError,
        siagen.SiaGenError,
        FileNotFoundError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
