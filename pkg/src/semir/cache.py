"""Persistent (query, sentence) score cache.

Values are deterministic per scorer_id, so last-write-wins on identical
keys is harmless. Reads are lock-free on the in-memory dict; writes are
serialized.
"""

from __future__ import annotations

import json
import logging
import os
import tempfile
import threading

from .scorers import Scorer, ScorerKind, ScoreCacheKey, cache_key

logger = logging.getLogger(__name__)


class ScoreCache:
    """Dict-backed cache, optionally persisted as JSON lines.

    A corrupt persistence file is discarded with a warning and the cache
    rebuilds from empty (the file is rewritten fresh).
    """

    def __init__(self, path: str | None = None):
        self.path = path
        self._data: dict[ScoreCacheKey, float] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0
        if path is not None and os.path.exists(path):
            self._load(path)

    def _load(self, path: str) -> None:
        loaded: dict[ScoreCacheKey, float] = {}
        try:
            with open(path, "r", encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    rec = json.loads(line)
                    key = ScoreCacheKey(rec["scorer_id"], rec["query_hash"], rec["sentence_hash"])
                    loaded[key] = float(rec["score"])
        except (ValueError, KeyError, TypeError) as exc:
            logger.warning("corrupt score cache %s (%s); rebuilding from empty", path, exc)
            self._data = {}
            self._rewrite()
            return
        self._data = loaded

    def _rewrite(self) -> None:
        if self.path is None:
            return
        directory = os.path.dirname(os.path.abspath(self.path))
        fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            for key, value in self._data.items():
                fh.write(self._record_line(key, value))
        os.replace(tmp, self.path)

    @staticmethod
    def _record_line(key: ScoreCacheKey, value: float) -> str:
        return (
            json.dumps(
                {
                    "scorer_id": key.scorer_id,
                    "query_hash": key.query_hash,
                    "sentence_hash": key.sentence_hash,
                    "score": value,
                }
            )
            + "\n"
        )

    def get(self, key: ScoreCacheKey) -> float | None:
        """Stored score, or None as the miss signal."""
        value = self._data.get(key)
        with self._lock:
            if value is None:
                self.misses += 1
            else:
                self.hits += 1
        return value

    def put(self, key: ScoreCacheKey, score: float) -> None:
        with self._lock:
            self._data[key] = score
            if self.path is not None:
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(self._record_line(key, score))

    def __len__(self) -> int:
        return len(self._data)

    def reset_counters(self) -> None:
        with self._lock:
            self.hits = 0
            self.misses = 0


class CachedScorer:
    """Wraps a scorer with cache lookups; counts backend invocations."""

    def __init__(self, inner: Scorer, cache: ScoreCache):
        self.inner = inner
        self.cache = cache
        self.backend_calls = 0

    @property
    def kind(self) -> ScorerKind:
        return self.inner.kind

    @property
    def scorer_id(self) -> str:
        return self.inner.scorer_id

    def score_raw(self, query: str, sentence: str) -> float:
        key = cache_key(self.inner.scorer_id, query, sentence)
        cached = self.cache.get(key)
        if cached is not None:
            return cached
        self.backend_calls += 1
        value = self.inner.score_raw(query, sentence)
        self.cache.put(key, value)
        return value
