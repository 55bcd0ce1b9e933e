"""Reader contract and the four bundled implementations.

A reader maps (question, context) to an answer. Bundled readers:

* ``LexicalReader`` — deterministic keyword/span heuristic, a desk-scale
  stand-in for a fine-tuned model.
* ``ScriptedReader`` — exact question -> answer table, for fixtures.
* ``HttpReader`` — client for a remote model service speaking the wire
  protocol (POST /v1/answer, optional /v1/batch_answer).
* ``corrupt(base, spec)`` — noisy-oracle wrapper for error-propagation
  simulation.
"""
from __future__ import annotations

import hashlib
import json
import random
import re
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Protocol, Sequence, runtime_checkable

import requests

# Frozen stopword list; determinism across runs depends on it never changing.
STOPWORDS = frozenset(
    "a an the is are was were of in on at to who what when where which that and or for from by did does if both".split()
)

BOOLEAN_LEADS = ("is", "are", "if", "did", "does", "was", "were")
ANSWER_SPAN_CAP = 8
FIXED_CORRUPTION = "CORRUPTED"
CORRUPTION_MODES = ("distractor_span", "token_shuffle", "fixed_string")

_TOKEN = re.compile(r"[0-9A-Za-z]+")
_SENTENCE = re.compile(r"[^.?!]+")


@dataclass(frozen=True)
class ReaderRequest:
    question: str
    context: str = ""


@dataclass(frozen=True)
class ReaderResponse:
    answer: str
    score: Optional[float] = None


class ReaderError(Exception):
    """Base class; the executor records any of these as a failed trace."""


class MissingScript(ReaderError):
    pass


class EmptyContext(ReaderError):
    pass


class Timeout(ReaderError):
    pass


class RemoteError(ReaderError):
    def __init__(self, status: Optional[int], message: str = ""):
        super().__init__(message or f"remote service returned status {status}")
        self.status = status


class MalformedResponse(ReaderError):
    pass


@runtime_checkable
class Reader(Protocol):
    reader_id: str

    def answer(self, request: ReaderRequest) -> ReaderResponse: ...


class ScriptedReader:
    """Answers from an exact question -> answer table; unmapped questions fail."""

    def __init__(self, table: dict[str, str], reader_id: str = "scripted"):
        self.table = dict(table)
        self.reader_id = reader_id

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedReader":
        with open(path, encoding="utf-8") as f:
            return cls(json.load(f), reader_id=f"scripted:{path}")

    def answer(self, request: ReaderRequest) -> ReaderResponse:
        if request.question not in self.table:
            raise MissingScript(f"no scripted answer for question: {request.question!r}")
        return ReaderResponse(answer=self.table[request.question], score=1.0)


def _lower_tokens(text: str) -> list[str]:
    return [t.lower() for t in _TOKEN.findall(text)]


def question_keywords(question: str) -> set[str]:
    return set(_lower_tokens(question)) - STOPWORDS


def _token_spans(text: str, offset: int = 0) -> list[tuple[str, int, int]]:
    return [(m.group(0).lower(), offset + m.start(), offset + m.end()) for m in _TOKEN.finditer(text)]


def _eligible_runs(tokens: list[tuple[str, int, int]], keywords: set[str]) -> list[list[tuple[str, int, int]]]:
    runs: list[list[tuple[str, int, int]]] = []
    current: list[tuple[str, int, int]] = []
    for tok in tokens:
        if tok[0] in keywords or tok[0] in STOPWORDS:
            if current:
                runs.append(current)
                current = []
        else:
            current.append(tok)
    if current:
        runs.append(current)
    return runs


def eligible_spans(question: str, context: str) -> list[str]:
    """All maximal answer-eligible spans of the context, capped at the span limit.

    Used by the lexical reader (per best sentence) and by distractor_span
    corruption (over the whole context).
    """
    keywords = question_keywords(question)
    spans = []
    for sent in _SENTENCE.finditer(context):
        for run in _eligible_runs(_token_spans(sent.group(0), sent.start()), keywords):
            run = run[:ANSWER_SPAN_CAP]
            spans.append(context[run[0][1] : run[-1][2]])
    return spans


class LexicalReader:
    """Deterministic two-stage span picker.

    Stage 1 picks the sentence sharing the most keywords with the question
    (tie: earliest). Stage 2 answers with the longest run of tokens in that
    sentence that are neither question keywords nor stopwords, capped at
    eight tokens (tie: earliest), returned in original case. Questions
    leading with an is/are/if/did/does/was/were token are answered yes/no by
    keyword coverage over the whole context.
    """

    reader_id = "lexical"

    def answer(self, request: ReaderRequest) -> ReaderResponse:
        if not request.context:
            raise EmptyContext("lexical reader needs a non-empty context")
        question_tokens = _lower_tokens(request.question)
        keywords = set(question_tokens) - STOPWORDS

        if question_tokens and question_tokens[0] in BOOLEAN_LEADS:
            context_tokens = set(_lower_tokens(request.context))
            return ReaderResponse(answer="yes" if keywords <= context_tokens else "no")

        best_tokens: list[tuple[str, int, int]] = []
        best_score = -1
        for sent in _SENTENCE.finditer(request.context):
            tokens = _token_spans(sent.group(0), sent.start())
            score = len({t[0] for t in tokens} & keywords)
            if score > best_score:
                best_score = score
                best_tokens = tokens

        runs = _eligible_runs(best_tokens, keywords)
        if not runs:
            return ReaderResponse(answer="")  # abstain: sentence had no eligible tokens
        best_run = max(runs, key=lambda r: min(len(r), ANSWER_SPAN_CAP))
        best_run = best_run[:ANSWER_SPAN_CAP]
        return ReaderResponse(answer=request.context[best_run[0][1] : best_run[-1][2]])


class HttpReader:
    """Client for a remote reader service.

    Bounded retries with exponential backoff on timeouts, connection errors,
    and 5xx statuses; 4xx statuses fail immediately. A success after a retry
    yields exactly one response.
    """

    def __init__(
        self,
        base_url: str,
        timeout: float = 30.0,
        attempts: int = 3,
        backoff: float = 0.5,
        session: Optional[requests.Session] = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.attempts = attempts
        self.backoff = backoff
        self.session = session or requests.Session()
        self.reader_id = f"http:{self.base_url}"

    def _post(self, path: str, payload) -> object:
        last_error: ReaderError = RemoteError(None, "no attempts made")
        for attempt in range(self.attempts):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                response = self.session.post(self.base_url + path, json=payload, timeout=self.timeout)
            except requests.Timeout:
                last_error = Timeout(f"POST {path} timed out after {self.timeout}s")
                continue
            except requests.RequestException as exc:
                last_error = RemoteError(None, f"POST {path} failed: {exc}")
                continue
            if response.status_code == 200:
                try:
                    return response.json()
                except ValueError as exc:
                    raise MalformedResponse(f"POST {path} returned non-JSON body: {exc}") from exc
            if 500 <= response.status_code < 600:
                last_error = RemoteError(response.status_code)
                continue
            raise RemoteError(response.status_code)
        raise last_error

    @staticmethod
    def _parse_response(body) -> ReaderResponse:
        if not isinstance(body, dict) or "answer" not in body or not isinstance(body["answer"], str):
            raise MalformedResponse(f"expected {{'answer': str, 'score': number|null}}, got {body!r}")
        score = body.get("score")
        if score is not None and not isinstance(score, (int, float)):
            raise MalformedResponse(f"score must be a number or null, got {score!r}")
        return ReaderResponse(answer=body["answer"], score=None if score is None else float(score))

    def answer(self, request: ReaderRequest) -> ReaderResponse:
        body = self._post("/v1/answer", {"question": request.question, "context": request.context})
        return self._parse_response(body)

    def batch_answer(self, requests_: Sequence[ReaderRequest]) -> list[ReaderResponse]:
        payload = [{"question": r.question, "context": r.context} for r in requests_]
        body = self._post("/v1/batch_answer", payload)
        if not isinstance(body, list) or len(body) != len(requests_):
            raise MalformedResponse(f"batch response must be a list of {len(requests_)} items")
        return [self._parse_response(item) for item in body]


@dataclass(frozen=True)
class NoiseSpec:
    error_probability: float
    corruption_mode: str
    seed: int

    def __post_init__(self):
        if not 0.0 <= self.error_probability <= 1.0:
            raise ValueError(f"error_probability must be in [0, 1], got {self.error_probability}")
        if self.corruption_mode not in CORRUPTION_MODES:
            raise ValueError(f"corruption_mode must be one of {CORRUPTION_MODES}, got {self.corruption_mode!r}")


class NoisyReader:
    """Wraps a base reader, corrupting each answer with probability p.

    Randomness is derived from (seed, question, context), not call order, so
    outcomes are identical under any parallelism or execution order.
    """

    def __init__(self, base: Reader, spec: NoiseSpec):
        self.base = base
        self.spec = spec
        self.reader_id = f"noisy({getattr(base, 'reader_id', type(base).__name__)},p={spec.error_probability},{spec.corruption_mode})"

    def _rng(self, request: ReaderRequest) -> random.Random:
        digest = hashlib.blake2b(
            f"{self.spec.seed}\x1f{request.question}\x1f{request.context}".encode("utf-8"),
            digest_size=8,
        ).digest()
        return random.Random(int.from_bytes(digest, "big"))

    def _corrupted(self, base_answer: str, request: ReaderRequest, rng: random.Random) -> str:
        mode = self.spec.corruption_mode
        if mode == "fixed_string":
            return FIXED_CORRUPTION
        if mode == "token_shuffle":
            tokens = base_answer.split()
            rng.shuffle(tokens)
            return " ".join(tokens)
        candidates = [s for s in eligible_spans(request.question, request.context) if s != base_answer]
        if not candidates:
            return FIXED_CORRUPTION  # context offers no distinct span
        return rng.choice(candidates)

    def answer(self, request: ReaderRequest) -> ReaderResponse:
        response = self.base.answer(request)
        rng = self._rng(request)
        if rng.random() >= self.spec.error_probability:
            return response
        return ReaderResponse(answer=self._corrupted(response.answer, request, rng), score=response.score)


def corrupt(base: Reader, spec: NoiseSpec) -> NoisyReader:
    """Noisy-oracle wrapper simulating intermediate-step error propagation."""
    return NoisyReader(base, spec)
