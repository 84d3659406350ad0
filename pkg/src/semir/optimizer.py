"""Alternating optimization of fusion weights against MAP/F1 objectives.

The loop alternates a document phase (searching beta and w) with a
sentence phase (searching alpha), keeps the best-ever weights, and stops
once the sentence objective no longer strictly improves. Search
strategies: exhaustive grid, coarse-to-fine grid, and a guided strategy
(seeded random exploration plus expected improvement over a
distance-weighted surrogate).
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .corpus import QuerySet, Snippet
from .fusion import (
    FusionWeights,
    Pipeline,
    RankingParams,
    _fuse_pool,
    _score_pool,
)
from .lexindex import coarse_search
from .metrics import MatchPolicy, average_precision, map_score, precision_recall_f1

IMPROVEMENT_EPS = 1e-9

WEIGHT_NAMES = (
    "alpha1", "alpha2", "alpha3", "alpha4",
    "beta1", "beta2",
    "w1", "w2", "w3",
)
E_PHASE_FREE = ("beta1", "beta2", "w1", "w2", "w3")
M_PHASE_FREE = ("alpha1", "alpha2", "alpha3", "alpha4")


class OptimizerError(ValueError):
    """Invalid strategy, free-parameter set, or configuration."""


class Objective(str, enum.Enum):
    sent_map = "sent_map"
    doc_map = "doc_map"
    doc_f1 = "doc_f1"


@dataclass(frozen=True)
class WeightMetrics:
    doc_map: float
    sent_map: float
    doc_f1: float
    sent_f1: float

    def value(self, objective: Objective) -> float:
        return getattr(self, objective.value)

    def to_dict(self) -> dict:
        return {
            "doc_map": self.doc_map,
            "sent_map": self.sent_map,
            "doc_f1": self.doc_f1,
            "sent_f1": self.sent_f1,
        }


def weights_to_vector(wts: FusionWeights) -> list[float]:
    return [*wts.alpha, *wts.beta, *wts.w]


def vector_to_weights(vec) -> FusionWeights:
    vec = list(vec)
    return FusionWeights(
        alpha=(vec[0], vec[1], vec[2], vec[3]),
        beta=(vec[4], vec[5]),
        w=(vec[6], vec[7], vec[8]),
    )


def balanced_init(value: float = 0.5) -> FusionWeights:
    """All-equal starting weights; empirically a good neutral anchor."""
    return FusionWeights(alpha=(value,) * 4, beta=(value,) * 2, w=(value,) * 3)


@dataclass(frozen=True)
class GridStrategy:
    step: float

    def __post_init__(self) -> None:
        if not 0.0 < self.step <= 1.0:
            raise OptimizerError(f"grid step must be in (0, 1], got {self.step}")


@dataclass(frozen=True)
class CoarseFineStrategy:
    step1: float
    step2: float
    window: float

    def __post_init__(self) -> None:
        for name in ("step1", "step2"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise OptimizerError(f"{name} must be in (0, 1], got {value}")
        if self.window <= 0.0:
            raise OptimizerError(f"window must be > 0, got {self.window}")


@dataclass(frozen=True)
class GuidedStrategy:
    budget: int
    seed: int = 0

    def __post_init__(self) -> None:
        if self.budget < 1:
            raise OptimizerError(f"budget must be >= 1, got {self.budget}")


SearchStrategy = GridStrategy | CoarseFineStrategy | GuidedStrategy


@dataclass
class EvalRecord:
    step: int
    phase: str
    weights: FusionWeights
    metrics: WeightMetrics

    def to_json_line(self) -> str:
        return json.dumps(
            {
                "step": self.step,
                "phase": self.phase,
                "weights": self.weights.to_dict(),
                "objectives": self.metrics.to_dict(),
            }
        )


@dataclass
class PhaseRecord:
    iteration: int
    phase: str  # "E" | "M"
    tried: int
    best_objective: float
    accepted: FusionWeights


@dataclass
class OptTrace:
    phases: list[PhaseRecord] = field(default_factory=list)
    evaluations: list[EvalRecord] = field(default_factory=list)
    accepted_m_values: list[float] = field(default_factory=list)  # best-so-far per M phase

    def write_jsonl(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for record in self.evaluations:
                fh.write(record.to_json_line() + "\n")


@dataclass
class _PreparedQuery:
    query_id: str
    pooled: list  # fusion._PooledDoc, scored once
    snippet_objects: dict[str, list[Snippet]]  # doc_id -> per-sentence snippets
    gold_doc_ids: list[str]
    gold_snippets: list[Snippet]


class PreparedEvaluation:
    """Dev-set evaluation state with perspective scores computed once.

    Weight evaluation re-runs only the fusion arithmetic and ranking, via
    the same code path the live pipeline uses, so results are identical to
    ranking each query and evaluating the run. Not safe for concurrent
    evaluate() calls (pooled score buffers are reused).
    """

    def __init__(
        self,
        pipeline: Pipeline,
        dev_set: QuerySet,
        params: RankingParams | None = None,
        policy: MatchPolicy | None = None,
        denom_mode: str = "gold",
    ):
        self.params = params or RankingParams()
        self.policy = policy or MatchPolicy()
        self.denom_mode = denom_mode
        self.queries: list[_PreparedQuery] = []
        for query, gold in dev_set:
            if gold is None:
                raise OptimizerError(f"dev query {query.query_id!r} lacks gold labels")
            pool = coarse_search(
                pipeline.index, pipeline.bm25_params, query.body, self.params.pool_k
            )
            pooled = _score_pool(query.body, pipeline.corpus, pool, pipeline.scorers, pipeline.config)
            snippet_objects: dict[str, list[Snippet]] = {}
            for pd in pooled:
                doc = pd.doc
                per_doc = []
                for span in doc.sentences:
                    section, begin, end = doc.section_offsets(span)
                    per_doc.append(
                        Snippet(
                            doc_id=doc.doc_id,
                            begin=begin,
                            end=end,
                            text=doc.sentence_text(span),
                            begin_section=section,
                            end_section=section,
                        )
                    )
                snippet_objects[doc.doc_id] = per_doc
            self.queries.append(
                _PreparedQuery(
                    query_id=query.query_id,
                    pooled=pooled,
                    snippet_objects=snippet_objects,
                    gold_doc_ids=list(gold.gold_doc_ids),
                    gold_snippets=list(gold.gold_snippets),
                )
            )
        self.config = pipeline.config

    def evaluate(self, wts: FusionWeights) -> WeightMetrics:
        doc_ps, doc_aps, sent_ps, sent_aps = [], [], [], []
        doc_match = lambda a, b: a == b  # noqa: E731
        for pq in self.queries:
            finals = _fuse_pool(pq.pooled, wts, self.config)
            doc_order = sorted(pq.pooled, key=lambda pd: (-pd.doc_score, pd.doc.doc_id))
            kept = doc_order[: self.params.top_docs]
            pred_docs = [pd.doc.doc_id for pd in kept]
            candidates = []
            for pd in kept:
                doc_id = pd.doc.doc_id
                for span, final in zip(pd.doc.sentences, finals[doc_id]):
                    candidates.append((final, doc_id, span.sent_index))
            candidates.sort(key=lambda item: (-item[0], item[1], item[2]))
            pred_snips = [
                pq.snippet_objects[doc_id][sent_index]
                for _, doc_id, sent_index in candidates[: self.params.top_snippets]
            ]
            doc_ps.append(precision_recall_f1(pred_docs, pq.gold_doc_ids, doc_match))
            doc_aps.append(
                average_precision(pred_docs, pq.gold_doc_ids, doc_match, self.denom_mode)
            )
            sent_ps.append(
                precision_recall_f1(pred_snips, pq.gold_snippets, self.policy.snippets_match)
            )
            sent_aps.append(
                average_precision(
                    pred_snips, pq.gold_snippets, self.policy.snippets_match, self.denom_mode
                )
            )
        return WeightMetrics(
            doc_map=map_score(doc_aps),
            sent_map=map_score(sent_aps),
            doc_f1=map_score([f for _, _, f in doc_ps]),
            sent_f1=map_score([f for _, _, f in sent_ps]),
        )


def prepare_evaluation(
    pipeline: Pipeline,
    dev_set: QuerySet,
    params: RankingParams | None = None,
    policy: MatchPolicy | None = None,
    denom_mode: str = "gold",
) -> PreparedEvaluation:
    return PreparedEvaluation(pipeline, dev_set, params, policy, denom_mode)


def evaluate_weights(wts: FusionWeights, prepared: PreparedEvaluation) -> WeightMetrics:
    """(doc_map, sent_map, doc_f1, sent_f1) for one weight setting."""
    return prepared.evaluate(wts)


def _validate_free(free_params) -> list[int]:
    if not free_params:
        raise OptimizerError("free_params must name at least one weight")
    indices = []
    seen = set()
    for name in free_params:
        if name not in WEIGHT_NAMES:
            raise OptimizerError(f"unknown weight name {name!r}")
        if name in seen:
            raise OptimizerError(f"duplicate free parameter {name!r}")
        seen.add(name)
        indices.append(WEIGHT_NAMES.index(name))
    return indices


def _grid_values(step: float) -> list[float]:
    values = []
    k = 0
    while True:
        v = k * step
        if v > 1.0 + 1e-12:
            break
        values.append(min(v, 1.0))
        k += 1
    if values[-1] < 1.0 - 1e-12:
        values.append(1.0)
    return values


def _lattice(per_dim: list[list[float]]):
    """Deterministic cartesian product in coordinate order."""
    if not per_dim:
        yield ()
        return
    for head in per_dim[0]:
        for tail in _lattice(per_dim[1:]):
            yield (head, *tail)


class _SearchRun:
    """Shared candidate-evaluation loop with first-best tie keeping."""

    def __init__(self, objective_fn, base_vector: list[float], free_idx: list[int], trace: OptTrace, phase: str):
        self.objective_fn = objective_fn
        self.base_vector = base_vector
        self.free_idx = free_idx
        self.trace = trace
        self.phase = phase
        self.best_point: tuple[float, ...] | None = None
        self.best_value = -math.inf
        self.tried = 0
        self.evaluated: list[tuple[tuple[float, ...], float]] = []

    def try_point(self, point: tuple[float, ...]) -> float:
        vec = list(self.base_vector)
        for idx, value in zip(self.free_idx, point):
            vec[idx] = value
        wts = vector_to_weights(vec)
        metrics = self.objective_fn(wts)
        value = metrics if isinstance(metrics, float) else metrics[0]
        self.tried += 1
        if isinstance(metrics, tuple):
            self.trace.evaluations.append(
                EvalRecord(
                    step=len(self.trace.evaluations),
                    phase=self.phase,
                    weights=wts,
                    metrics=metrics[1],
                )
            )
        if value > self.best_value:
            self.best_value = value
            self.best_point = point
        self.evaluated.append((point, value))
        return value

    def result(self) -> tuple[FusionWeights, float]:
        vec = list(self.base_vector)
        for idx, value in zip(self.free_idx, self.best_point):
            vec[idx] = value
        return vector_to_weights(vec), self.best_value


def _norm_pdf(z: float) -> float:
    return math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)


def _norm_cdf(z: float) -> float:
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


def _expected_improvement(candidate, points: np.ndarray, values: np.ndarray, best: float) -> float:
    dists = np.sqrt(np.sum((points - candidate) ** 2, axis=1))
    nearest = float(dists.min())
    if nearest < 1e-12:
        return 0.0
    weights = 1.0 / (dists + 1e-12) ** 2
    mu = float(np.dot(weights, values) / weights.sum())
    spread = max(float(values.max() - values.min()), 1e-3)
    sigma = spread * math.sqrt(nearest)
    z = (mu - best) / sigma
    return (mu - best) * _norm_cdf(z) + sigma * _norm_pdf(z)


def _guided_candidates(run: _SearchRun, strategy: GuidedStrategy, dim: int) -> None:
    rng = np.random.default_rng(strategy.seed)
    n_init = min(strategy.budget, max(4, strategy.budget // 5))
    for _ in range(n_init):
        run.try_point(tuple(float(x) for x in rng.uniform(0.0, 1.0, size=dim)))
    remaining = strategy.budget - n_init
    for _ in range(remaining):
        points = np.array([p for p, _ in run.evaluated])
        values = np.array([v for _, v in run.evaluated])
        pool = rng.uniform(0.0, 1.0, size=(64, dim))
        best_ei, best_candidate = -math.inf, pool[0]
        for candidate in pool:
            ei = _expected_improvement(candidate, points, values, run.best_value)
            if ei > best_ei:
                best_ei = ei
                best_candidate = candidate
        run.try_point(tuple(float(x) for x in best_candidate))


def search(
    strategy: SearchStrategy,
    free_params,
    init_weights: FusionWeights,
    objective_fn,
    trace: OptTrace | None = None,
    phase: str = "S",
):
    """Maximize the objective over the free coordinates, the rest frozen
    at init_weights. The incumbent is always evaluated first, so the
    returned objective is >= the initial one; ties keep the first best in
    deterministic enumeration order.

    objective_fn takes FusionWeights and returns either a float or a
    (float, WeightMetrics) pair; the metrics variant adds per-candidate
    trace records.
    """
    free_idx = _validate_free(free_params)
    dim = len(free_idx)
    trace = trace if trace is not None else OptTrace()
    base_vector = weights_to_vector(init_weights)
    run = _SearchRun(objective_fn, base_vector, free_idx, trace, phase)

    incumbent = tuple(base_vector[i] for i in free_idx)
    run.try_point(incumbent)

    if isinstance(strategy, GridStrategy):
        if dim > 6 and strategy.step <= 0.1:
            raise OptimizerError(
                f"grid over {dim} free dims at step {strategy.step} is too large"
            )
        values = _grid_values(strategy.step)
        for point in _lattice([values] * dim):
            run.try_point(point)
    elif isinstance(strategy, CoarseFineStrategy):
        if dim > 6 and strategy.step1 <= 0.1:
            raise OptimizerError(
                f"grid over {dim} free dims at step {strategy.step1} is too large"
            )
        for point in _lattice([_grid_values(strategy.step1)] * dim):
            run.try_point(point)
        center = run.best_point
        fine_axes = []
        for c in center:
            lo = max(0.0, c - strategy.window)
            hi = min(1.0, c + strategy.window)
            axis = {round(c, 12)}
            v = lo
            while v <= hi + 1e-12:
                axis.add(round(min(v, 1.0), 12))
                v += strategy.step2
            fine_axes.append(sorted(axis))
        for point in _lattice(fine_axes):
            run.try_point(point)
    elif isinstance(strategy, GuidedStrategy):
        _guided_candidates(run, strategy, dim)
    else:
        raise OptimizerError(f"unknown strategy {strategy!r}")

    best_wts, best_value = run.result()
    return best_wts, best_value, run.tried


def alternating_optimize(
    init: FusionWeights,
    e_objective: Objective,
    m_objective: Objective,
    strategy: SearchStrategy,
    max_iters: int,
    prepared: PreparedEvaluation,
) -> tuple[FusionWeights, OptTrace]:
    """Alternate document-phase (beta, w) and sentence-phase (alpha) search.

    Loops while the sentence objective strictly improves (epsilon 1e-9),
    stops at max_iters, and returns the best weights ever evaluated on the
    m-objective. Trace "accepted" values are the best-so-far after each M
    phase, a non-decreasing sequence.
    """
    if max_iters < 1:
        raise OptimizerError(f"max_iters must be >= 1, got {max_iters}")
    trace = OptTrace()

    def objective_for(objective: Objective):
        def fn(wts: FusionWeights):
            metrics = evaluate_weights(wts, prepared)
            return (metrics.value(objective), metrics)

        return fn

    e_fn = objective_for(e_objective)
    m_fn = objective_for(m_objective)

    init_metrics = evaluate_weights(init, prepared)
    trace.evaluations.append(
        EvalRecord(step=0, phase="init", weights=init, metrics=init_metrics)
    )
    best_wts, best_m = init, init_metrics.value(m_objective)
    prev_m = best_m
    wts = init

    for iteration in range(1, max_iters + 1):
        wts, e_value, e_tried = search(
            strategy, E_PHASE_FREE, wts, e_fn, trace, phase=f"E{iteration}"
        )
        trace.phases.append(
            PhaseRecord(
                iteration=iteration, phase="E", tried=e_tried,
                best_objective=e_value, accepted=wts,
            )
        )
        wts, m_value, m_tried = search(
            strategy, M_PHASE_FREE, wts, m_fn, trace, phase=f"M{iteration}"
        )
        trace.phases.append(
            PhaseRecord(
                iteration=iteration, phase="M", tried=m_tried,
                best_objective=m_value, accepted=wts,
            )
        )
        if m_value > best_m:
            best_wts, best_m = wts, m_value
        trace.accepted_m_values.append(best_m)
        if m_value <= prev_m + IMPROVEMENT_EPS:
            break
        prev_m = m_value

    return best_wts, trace


def parse_strategy(data: dict) -> SearchStrategy:
    kind = data.get("kind")
    if kind == "grid":
        return GridStrategy(step=float(data["step"]))
    if kind == "coarse_fine":
        return CoarseFineStrategy(
            step1=float(data["step1"]),
            step2=float(data["step2"]),
            window=float(data["window"]),
        )
    if kind == "guided":
        return GuidedStrategy(budget=int(data["budget"]), seed=int(data.get("seed", 0)))
    raise OptimizerError(f"unknown strategy kind {kind!r}")


@dataclass
class OptimizeConfig:
    init: FusionWeights
    strategy: SearchStrategy
    e_objective: Objective
    m_objective: Objective
    max_iters: int
    params: RankingParams
    policy: MatchPolicy
    denom_mode: str

    @classmethod
    def from_dict(cls, data: dict) -> "OptimizeConfig":
        init_spec = data.get("init", "balanced")
        init = balanced_init() if init_spec == "balanced" else FusionWeights.from_dict(init_spec)
        ranking = data.get("ranking", {})
        return cls(
            init=init,
            strategy=parse_strategy(data["strategy"]),
            e_objective=Objective(data.get("e_objective", "doc_map")),
            m_objective=Objective(data.get("m_objective", "sent_map")),
            max_iters=int(data.get("max_iters", 10)),
            params=RankingParams(
                pool_k=int(ranking.get("pool_k", 100)),
                top_docs=int(ranking.get("top_docs", 10)),
                top_snippets=int(ranking.get("top_snippets", 10)),
            ),
            policy=MatchPolicy(min_overlap=int(data.get("min_overlap", 1))),
            denom_mode=str(data.get("denom_mode", "gold")),
        )


def load_opt_config(path: str) -> OptimizeConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return OptimizeConfig.from_dict(json.load(fh))
