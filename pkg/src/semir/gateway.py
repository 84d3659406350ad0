"""HTTP gateway: the interactive two-perspective ranking endpoint, the
full-pipeline search endpoint, and health/fingerprint introspection.

All loaded artifacts are immutable; handlers are pure per request, so
concurrent identical requests produce identical bodies. Wall time is
reported in the x-elapsed-ms header, keeping bodies deterministic.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, field

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .corpus import Corpus, segment_sentences
from .fusion import FusionWeights, Pipeline, RankedRun, RankingParams, medic_rank
from .lexindex import InvertedIndex
from .metrics import run_to_json
from .scorers import ScorerSet

DEFAULT_ALPHA = 0.8
DEFAULT_TOPN = 3
DEFAULT_REPOSITORY = "handbook"


def corpus_fingerprint(corpus: Corpus) -> str:
    digest = hashlib.sha256()
    for doc in corpus:
        digest.update(doc.doc_id.encode("utf-8"))
        digest.update(b"\x1f")
        digest.update(doc.title.encode("utf-8"))
        digest.update(b"\x1f")
        digest.update(doc.abstract.encode("utf-8"))
        digest.update(b"\x1e")
    return digest.hexdigest()[:16]


def index_fingerprint(index: InvertedIndex) -> str:
    digest = hashlib.sha256()
    digest.update(str(index.doc_count).encode())
    digest.update(repr(index.avg_doc_length).encode())
    for doc_id in sorted(index.doc_lengths):
        digest.update(doc_id.encode("utf-8"))
        digest.update(str(index.doc_lengths[doc_id]).encode())
    return digest.hexdigest()[:16]


@dataclass
class GatewayState:
    """Everything a serving process loads at startup, all read-only."""

    scorers: ScorerSet
    repositories: dict[str, list[str]] = field(default_factory=dict)
    pipeline: Pipeline | None = None
    weights_profiles: dict[str, FusionWeights] = field(default_factory=dict)
    default_profile: str = "default"
    ranking: RankingParams = field(default_factory=RankingParams)
    static_dir: str | None = None

    def fingerprints(self) -> dict:
        if self.pipeline is None:
            return {"index": None, "corpus": None}
        return {
            "index": index_fingerprint(self.pipeline.index),
            "corpus": corpus_fingerprint(self.pipeline.corpus),
        }


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(
        status_code=status, content={"error": {"code": code, "message": message}}
    )


def _parse_int(raw: str | None, default: int, name: str):
    if raw is None or raw == "":
        return default, None
    try:
        return int(raw), None
    except ValueError:
        return None, _error(400, "bad_parameter", f"{name} must be an integer, got {raw!r}")


def _parse_float(raw: str | None, default: float, name: str):
    if raw is None or raw == "":
        return default, None
    try:
        return float(raw), None
    except ValueError:
        return None, _error(400, "bad_parameter", f"{name} must be a number, got {raw!r}")


def build_search_answer(
    state: GatewayState,
    query: str,
    top_docs: int,
    top_snippets: int,
    profile: str,
) -> dict:
    """One predictions-file question entry for an ad-hoc query.

    Shared by GET /search and the CLI search subcommand, so their outputs
    are byte-identical.
    """
    weights = state.weights_profiles[profile]
    params = RankingParams(
        pool_k=state.ranking.pool_k, top_docs=top_docs, top_snippets=top_snippets
    )
    query_id = hashlib.sha1(query.encode("utf-8")).hexdigest()[:12]
    entry = state.pipeline.rank(query_id, query, weights, params)
    return run_to_json(RankedRun(entries=[entry]))["questions"][0]


def create_app(state: GatewayState) -> FastAPI:
    app = FastAPI(title="semir gateway", docs_url=None, redoc_url=None)

    @app.get("/health")
    def health() -> dict:
        body = {"status": "ok"}
        body.update(state.fingerprints())
        body["repositories"] = sorted(state.repositories)
        body["weights_profiles"] = sorted(state.weights_profiles)
        return body

    def medic_endpoint(request: Request):
        started = time.perf_counter()
        params = request.query_params
        query = params.get("query")
        if not query:
            return _error(400, "missing_query", "query parameter is required")
        topn, err = _parse_int(params.get("topn"), DEFAULT_TOPN, "topn")
        if err is not None:
            return err
        if topn < 1:
            return _error(400, "bad_parameter", f"topn must be >= 1, got {topn}")
        alpha, err = _parse_float(params.get("alpha"), DEFAULT_ALPHA, "alpha")
        if err is not None:
            return err
        if not 0.0 <= alpha <= 1.0:
            return _error(400, "bad_parameter", f"alpha must be in [0, 1], got {alpha}")

        raw_text = params.get("sentences")
        repository = params.get("repository") or DEFAULT_REPOSITORY
        if raw_text:
            sentences = [raw_text[s.begin : s.end] for s in segment_sentences(raw_text)]
            source = {"kind": "inline", "repository": None}
        else:
            if repository not in state.repositories:
                return _error(404, "unknown_repository", f"no repository named {repository!r}")
            sentences = state.repositories[repository]
            source = {"kind": "repository", "repository": repository}

        items = medic_rank(query, sentences, topn, alpha, state.scorers)
        body = {
            "query": query,
            "alpha": alpha,
            "topn": topn,
            "source": source,
            "items": [
                {
                    "sentence": item.sentence,
                    "score": item.score,
                    "context_before": item.context_before,
                    "context_after": item.context_after,
                    "source": {"repository": source["repository"], "index": item.index},
                }
                for item in items
            ],
            "scorers": state.scorers.ids,
        }
        elapsed = (time.perf_counter() - started) * 1000.0
        return JSONResponse(content=body, headers={"x-elapsed-ms": f"{elapsed:.3f}"})

    app.get("/bert-ir")(medic_endpoint)
    app.get("/rank")(medic_endpoint)  # alias

    @app.get("/search")
    def search_endpoint(request: Request):
        params = request.query_params
        query = params.get("query")
        if not query:
            return _error(400, "missing_query", "query parameter is required")
        if state.pipeline is None:
            return _error(503, "no_index", "no index/corpus loaded")
        top_docs, err = _parse_int(params.get("top_docs"), 10, "top_docs")
        if err is not None:
            return err
        top_snippets, err = _parse_int(params.get("top_snippets"), 10, "top_snippets")
        if err is not None:
            return err
        if not 0 <= top_docs <= 10:
            return _error(400, "bad_parameter", f"top_docs must be in [0, 10], got {top_docs}")
        if not 0 <= top_snippets <= 10:
            return _error(
                400, "bad_parameter", f"top_snippets must be in [0, 10], got {top_snippets}"
            )
        profile = params.get("profile") or state.default_profile
        if profile not in state.weights_profiles:
            return _error(404, "unknown_profile", f"no weights profile named {profile!r}")
        return JSONResponse(
            content=build_search_answer(state, query, top_docs, top_snippets, profile)
        )

    if state.static_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=state.static_dir, html=True), name="ui")

    return app
