"""Scoring interface: request kinds, label logits, and the scorer contract.

A scorer is a relevance judge. It takes one of four request kinds and
returns raw log-likelihoods per answer label:

  pointwise  (query, doc)          labels yes / no
  triplet    (query, doc, ref)     labels A (candidate) / B (reference)
  duel       (query, doc_a, doc_b) labels A / B
  setwise    (query, docs[2..26])  labels A.. one letter per group member

Normalization of logits into scores lives in the strategies module; scorers
return raw values. Every successful call increments the shared CallLedger
exactly once with the request kind.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from typing import ClassVar

from ..datamodel import CallLedger, DocCandidate, HarnessError, Query, ValidationError

SETWISE_MAX_GROUP = 26  # labels are single letters A..Z


def setwise_labels(size: int) -> tuple[str, ...]:
    return tuple(chr(ord("A") + i) for i in range(size))


class ScoringError(HarnessError):
    """A scorer failed to produce logits for a request."""


class TransientBackendError(ScoringError):
    """The backend failed transiently (network, timeout, 429/5xx) after retries."""


class DegenerateResponseError(ScoringError):
    """The backend answered, but no usable label logits could be extracted.

    Not retried: the response is semantically unusable, so retrying would
    burn quota for the same outcome. Carries the raw payload for debugging.
    """

    def __init__(self, message: str, payload=None):
        super().__init__(message)
        self.payload = payload


class TemplateError(HarnessError):
    """A prompt template is missing or misusing a placeholder."""

    def __init__(self, placeholder: str, detail: str = ""):
        self.placeholder = placeholder
        message = f"template problem with placeholder {placeholder}"
        if detail:
            message += f": {detail}"
        super().__init__(message)


class BatchScoringError(ScoringError):
    """Some requests in a batch failed; successful results are preserved.

    ``results[i]`` holds the logits for request i or None where it failed;
    ``errors`` maps the failed indices to their exceptions.
    """

    def __init__(self, results, errors: Mapping[int, Exception]):
        self.results = list(results)
        self.errors = dict(errors)
        shown = ", ".join(str(i) for i in sorted(self.errors)[:8])
        if len(self.errors) > 8:
            shown += ", ..."
        super().__init__(
            f"{len(self.errors)} of {len(self.results)} requests failed "
            f"(indices {shown})"
        )


def _require_text(label: str, text: str) -> None:
    if not text or text.isspace():
        raise ValidationError(f"{label}: text is empty")


@dataclass(frozen=True)
class PointwiseRequest:
    """Judge one document's relevance to the query."""

    kind: ClassVar[str] = "pointwise"

    query: Query
    doc: DocCandidate
    request_id: str = ""

    def __post_init__(self):
        _require_text(f"doc {self.doc.doc_id}", self.doc.text)

    @property
    def labels(self) -> tuple[str, ...]:
        return ("yes", "no")


@dataclass(frozen=True)
class TripletRequest:
    """Judge the candidate (slot A) against the reference anchor (slot B)."""

    kind: ClassVar[str] = "triplet"

    query: Query
    doc: DocCandidate
    ref: DocCandidate
    request_id: str = ""

    def __post_init__(self):
        _require_text(f"doc {self.doc.doc_id}", self.doc.text)
        _require_text(f"ref {self.ref.doc_id}", self.ref.text)

    @property
    def labels(self) -> tuple[str, ...]:
        return ("A", "B")


@dataclass(frozen=True)
class DuelRequest:
    """Judge which of two documents is more relevant to the query."""

    kind: ClassVar[str] = "duel"

    query: Query
    doc_a: DocCandidate
    doc_b: DocCandidate
    request_id: str = ""

    def __post_init__(self):
        _require_text(f"doc {self.doc_a.doc_id}", self.doc_a.text)
        _require_text(f"doc {self.doc_b.doc_id}", self.doc_b.text)

    @property
    def labels(self) -> tuple[str, ...]:
        return ("A", "B")


@dataclass(frozen=True)
class SetwiseRequest:
    """Pick the most relevant document out of a small group."""

    kind: ClassVar[str] = "setwise"

    query: Query
    docs: tuple[DocCandidate, ...]
    request_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "docs", tuple(self.docs))
        if not 2 <= len(self.docs) <= SETWISE_MAX_GROUP:
            raise ValidationError(
                f"setwise group size must be in 2..{SETWISE_MAX_GROUP}, "
                f"got {len(self.docs)}"
            )
        for doc in self.docs:
            _require_text(f"doc {doc.doc_id}", doc.text)

    @property
    def labels(self) -> tuple[str, ...]:
        return setwise_labels(len(self.docs))


ScoreRequest = PointwiseRequest | TripletRequest | DuelRequest | SetwiseRequest


@dataclass(frozen=True)
class LabelLogits:
    """Raw label log-likelihoods returned by a judge."""

    logits: Mapping[str, float]

    def __post_init__(self):
        object.__setattr__(self, "logits", dict(self.logits))
        for label, value in self.logits.items():
            if not math.isfinite(value):
                raise ValidationError(f"logit for label {label!r} is not finite")

    def __getitem__(self, label: str) -> float:
        return self.logits[label]

    def labels(self) -> tuple[str, ...]:
        return tuple(self.logits)


class Scorer(ABC):
    """Uniform interface over relevance judges.

    Implementations must be safe to call from multiple threads and must
    return one finite logit per request label. ``score_batch`` results are
    positionally aligned with the requests regardless of completion order.
    """

    def __init__(self, ledger: CallLedger | None = None):
        self.ledger = ledger if ledger is not None else CallLedger()

    @abstractmethod
    def _score_one(self, request: ScoreRequest) -> tuple[LabelLogits, int]:
        """Return (logits, prompt character count) for one request."""

    def score(self, request: ScoreRequest) -> LabelLogits:
        logits, prompt_chars = self._score_one(request)
        missing = [label for label in request.labels if label not in logits.logits]
        if missing:
            raise DegenerateResponseError(
                f"backend produced no logit for labels {missing}", payload=logits.logits
            )
        self.ledger.record(request.kind, prompt_chars)
        return logits

    def score_batch(self, requests: Sequence[ScoreRequest]) -> list[LabelLogits]:
        """Score all requests, preserving order.

        On partial failure raises BatchScoringError carrying both the
        per-index errors and every successful result; the ledger still
        counts each successful request exactly once.
        """
        results: list[LabelLogits | None] = [None] * len(requests)
        errors: dict[int, Exception] = {}
        for index, request in enumerate(requests):
            try:
                results[index] = self.score(request)
            except HarnessError as exc:
                errors[index] = exc
        if errors:
            raise BatchScoringError(results, errors)
        return results  # type: ignore[return-value]
