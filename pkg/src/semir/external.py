"""Wire protocol for external (neural) scorers, plus the offline TSV mode.

Protocol, line-oriented over a subprocess's standard streams or a TCP
socket:

    request:   SCORE <kind> <pair_id> <urlencoded query> <urlencoded sentence>
    response:  <pair_id> <score>

One response per request, any order, one line each, flushed per line.
Out-of-range or missing scores raise; a transport failure is never
silently turned into a zero.
"""

from __future__ import annotations

import hashlib
import queue
import socket
import subprocess
import threading
import urllib.parse
from typing import Iterable, Sequence

from .scorers import ScorerKind

DEFAULT_TIMEOUT = 30.0


class TransportError(RuntimeError):
    """External scorer unreachable or connection lost."""


class ProtocolError(RuntimeError):
    """External scorer sent something the protocol does not allow."""


def encode_request(kind: ScorerKind, pair_id: int, query: str, sentence: str) -> str:
    quoted_q = urllib.parse.quote(query, safe="")
    quoted_s = urllib.parse.quote(sentence, safe="")
    return f"SCORE {kind.value} {pair_id} {quoted_q} {quoted_s}\n"


def decode_response(line: str) -> tuple[int, float]:
    parts = line.strip().split()
    if len(parts) != 2:
        raise ProtocolError(f"malformed response line {line!r}")
    try:
        return int(parts[0]), float(parts[1])
    except ValueError as exc:
        raise ProtocolError(f"malformed response line {line!r}") from exc


class SubprocessTransport:
    """Talks the protocol to a child process over stdin/stdout.

    A reader thread feeds a queue so response waits honor the timeout
    even when the child hangs.
    """

    def __init__(self, argv: Sequence[str], timeout: float = DEFAULT_TIMEOUT):
        self.argv = list(argv)
        self.timeout = timeout
        try:
            self._proc = subprocess.Popen(
                self.argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise TransportError(f"cannot start scorer process {self.argv}: {exc}") from exc
        self._lines: queue.Queue[str | None] = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()

    def _pump(self) -> None:
        for line in self._proc.stdout:
            self._lines.put(line)
        self._lines.put(None)  # EOF marker

    def exchange(self, requests: list[str]) -> Iterable[str]:
        proc = self._proc
        if proc.poll() is not None and self._lines.empty():
            raise TransportError("scorer process has exited")
        try:
            for req in requests:
                proc.stdin.write(req)
            proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise TransportError(f"scorer process pipe failure: {exc}") from exc
        for _ in requests:
            try:
                line = self._lines.get(timeout=self.timeout)
            except queue.Empty:
                raise TransportError(
                    f"scorer process gave no response within {self.timeout}s"
                ) from None
            if line is None:
                raise TransportError("scorer process closed its output early")
            yield line

    def close(self) -> None:
        if self._proc.poll() is None:
            self._proc.terminate()
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()


class TcpTransport:
    """Talks the protocol over a TCP connection, one per batch."""

    def __init__(self, host: str, port: int, timeout: float = DEFAULT_TIMEOUT):
        self.host = host
        self.port = port
        self.timeout = timeout

    def exchange(self, requests: list[str]) -> Iterable[str]:
        try:
            with socket.create_connection((self.host, self.port), timeout=self.timeout) as sock:
                sock.sendall("".join(requests).encode("utf-8"))
                sock.shutdown(socket.SHUT_WR)
                with sock.makefile("r", encoding="utf-8") as reader:
                    for _ in requests:
                        line = reader.readline()
                        if not line:
                            raise TransportError("scorer connection closed early")
                        yield line
        except socket.timeout as exc:
            raise TransportError(
                f"scorer at {self.host}:{self.port} timed out after {self.timeout}s"
            ) from exc
        except OSError as exc:
            raise TransportError(f"cannot reach scorer at {self.host}:{self.port}: {exc}") from exc

    def close(self) -> None:
        pass


def external_score_batch(
    transport, kind: ScorerKind, pairs: Sequence[tuple[str, str]]
) -> list[float]:
    """Score pairs through a transport; result aligned with the input order.

    Responses may arrive in any order; every pair must be answered exactly
    once and every score must sit inside the kind's native range.
    """
    if not pairs:
        raise ProtocolError("pairs must be non-empty")
    requests = [
        encode_request(kind, i, query, sentence) for i, (query, sentence) in enumerate(pairs)
    ]
    results: dict[int, float] = {}
    for line in transport.exchange(requests):
        pair_id, value = decode_response(line)
        if pair_id < 0 or pair_id >= len(pairs):
            raise ProtocolError(f"response for unknown pair_id {pair_id}")
        if pair_id in results:
            raise ProtocolError(f"duplicate response for pair_id {pair_id}")
        if not 0.0 <= value <= kind.native_max:
            raise ProtocolError(
                f"pair {pair_id}: score {value} outside [0, {kind.native_max}] for {kind.value}"
            )
        results[pair_id] = value
    return [results[i] for i in range(len(pairs))]


class ExternalScorer:
    """Scorer-interface adapter over a protocol transport."""

    def __init__(self, kind: ScorerKind, transport, scorer_id: str | None = None):
        self.kind = kind
        self.transport = transport
        self.scorer_id = scorer_id or f"external-{kind.value}/1"

    def score_raw(self, query: str, sentence: str) -> float:
        return external_score_batch(self.transport, self.kind, [(query, sentence)])[0]

    def score_batch(self, pairs: Sequence[tuple[str, str]]) -> list[float]:
        return external_score_batch(self.transport, self.kind, pairs)


def text_key(text: str) -> str:
    """Key used by the offline score-file mode for both queries and sentences."""
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


class ScoreLookupError(KeyError):
    """A pair the score file does not cover."""


class FileScorer:
    """Fully offline scorer reading a TSV of precomputed scores.

    File format: one "<query_key>\\t<sentence_key>\\t<score>" per line.
    Keys default to text_key() of the raw texts; pass key functions to use
    externally assigned identifiers instead.
    """

    def __init__(self, kind: ScorerKind, path: str, query_key=text_key, sentence_key=text_key):
        self.kind = kind
        self.scorer_id = f"file-{kind.value}/1"
        self._query_key = query_key
        self._sentence_key = sentence_key
        self._table: dict[tuple[str, str], float] = {}
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                parts = line.rstrip("\n").split("\t")
                if len(parts) != 3:
                    raise ProtocolError(f"{path}:{lineno}: expected 3 tab-separated fields")
                value = float(parts[2])
                if not 0.0 <= value <= kind.native_max:
                    raise ProtocolError(
                        f"{path}:{lineno}: score {value} outside [0, {kind.native_max}]"
                    )
                self._table[(parts[0], parts[1])] = value

    def score_raw(self, query: str, sentence: str) -> float:
        key = (self._query_key(query), self._sentence_key(sentence))
        if key not in self._table:
            raise ScoreLookupError(f"no precomputed {self.kind.value} score for pair {key}")
        return self._table[key]
