"""Core domain types shared across the reranking harness.

Everything here is immutable after construction and free of I/O and scoring
logic. The one exception is CallLedger, which accumulates judge-call counts
behind a lock so concurrent workers can share a single instance; only its
final totals are meaningful.
"""

from __future__ import annotations

import math
import threading
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass


class HarnessError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(HarnessError):
    """A domain invariant was violated."""


class DuplicateDocError(ValidationError):
    """The same doc_id appeared twice where uniqueness is required."""

    def __init__(self, doc_id: str, context: str = ""):
        self.doc_id = doc_id
        message = f"duplicate doc_id {doc_id!r}"
        if context:
            message += f" ({context})"
        super().__init__(message)


class NonContiguousRanksError(ValidationError):
    """First-stage ranks must form a contiguous 1..n permutation."""

    def __init__(self, missing_rank: int):
        self.missing_rank = missing_rank
        super().__init__(
            f"first-stage ranks are not contiguous: missing rank {missing_rank}"
        )


@dataclass(frozen=True)
class Query:
    """A search query: stable identifier plus verbatim text."""

    id: str
    text: str

    def __post_init__(self):
        if not self.id:
            raise ValidationError("query id must be nonempty")
        if not self.text or self.text.isspace():
            raise ValidationError(f"query {self.id!r}: text is empty")


@dataclass(frozen=True)
class DocCandidate:
    """One first-stage candidate: passage text plus its initial rank and score.

    Text is stored verbatim; truncation to a prompt budget is a scorer
    concern, not a datamodel concern.
    """

    doc_id: str
    text: str
    first_stage_rank: int
    first_stage_score: float

    def __post_init__(self):
        if not self.doc_id:
            raise ValidationError("doc_id must be nonempty")
        if self.first_stage_rank < 1:
            raise ValidationError(
                f"doc {self.doc_id!r}: first_stage_rank must be >= 1, "
                f"got {self.first_stage_rank}"
            )


def tiebreak_key(candidate: DocCandidate) -> int:
    """Secondary sort key wherever scores tie: the first-stage rank, ascending.

    Deterministic and reproducible, and it favors the stronger first-stage
    prior. Equal scores with equal ranks cannot occur because ranks are
    unique within a list.
    """
    return candidate.first_stage_rank


@dataclass(frozen=True)
class CandidateList:
    """A query with its candidate documents ordered by first-stage rank.

    Use make_candidate_list to build one from unsorted docs; the constructor
    itself rejects out-of-order input.
    """

    query: Query
    docs: tuple[DocCandidate, ...]

    def __post_init__(self):
        object.__setattr__(self, "docs", tuple(self.docs))
        self.validate()

    def validate(self) -> None:
        """Re-check all invariants; idempotent on an already-valid list."""
        if not self.docs:
            raise ValidationError(f"query {self.query.id!r}: candidate list is empty")
        seen: set[str] = set()
        for doc in self.docs:
            if doc.doc_id in seen:
                raise DuplicateDocError(doc.doc_id, context=f"query {self.query.id}")
            seen.add(doc.doc_id)
        ranks = [doc.first_stage_rank for doc in self.docs]
        present = set(ranks)
        for expected in range(1, len(self.docs) + 1):
            if expected not in present:
                raise NonContiguousRanksError(expected)
        if any(ranks[i] > ranks[i + 1] for i in range(len(ranks) - 1)):
            raise ValidationError(
                f"query {self.query.id!r}: docs are not sorted by first_stage_rank"
            )

    def __len__(self) -> int:
        return len(self.docs)

    @property
    def doc_ids(self) -> tuple[str, ...]:
        return tuple(doc.doc_id for doc in self.docs)

    def doc_at_rank(self, rank: int) -> DocCandidate:
        """The doc with the given first-stage rank (ranks are contiguous 1..n)."""
        if not 1 <= rank <= len(self.docs):
            raise ValidationError(f"rank {rank} out of range 1..{len(self.docs)}")
        return self.docs[rank - 1]


def make_candidate_list(query: Query, docs: Sequence[DocCandidate]) -> CandidateList:
    """Sort docs by first-stage rank and validate the resulting list."""
    if not docs:
        raise ValidationError(f"query {query.id!r}: no candidate docs given")
    return CandidateList(query, tuple(sorted(docs, key=tiebreak_key)))


@dataclass(frozen=True)
class RankEntry:
    doc_id: str
    score: float
    rank: int


@dataclass(frozen=True)
class Ranking:
    """An ordered reranking result for one query.

    Entries are sorted by score descending with ties broken by the source
    candidates' first-stage rank; ranks run contiguously from 1. Build
    through build_ranking, which enforces the tie-break.
    """

    query_id: str
    entries: tuple[RankEntry, ...]
    strategy_tag: str

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        if not self.query_id:
            raise ValidationError("query_id must be nonempty")
        if not self.entries:
            raise ValidationError(f"ranking for {self.query_id!r} is empty")
        seen: set[str] = set()
        for position, entry in enumerate(self.entries, start=1):
            if entry.rank != position:
                raise ValidationError(
                    f"ranking for {self.query_id!r}: rank {entry.rank} at "
                    f"position {position}, expected {position}"
                )
            if not math.isfinite(entry.score):
                raise ValidationError(
                    f"ranking for {self.query_id!r}: non-finite score for "
                    f"{entry.doc_id!r}"
                )
            if entry.doc_id in seen:
                raise DuplicateDocError(entry.doc_id, context=f"ranking {self.query_id}")
            seen.add(entry.doc_id)
        for left, right in zip(self.entries, self.entries[1:]):
            if left.score < right.score:
                raise ValidationError(
                    f"ranking for {self.query_id!r}: scores increase between "
                    f"ranks {left.rank} and {right.rank}"
                )

    @property
    def doc_ids(self) -> tuple[str, ...]:
        return tuple(entry.doc_id for entry in self.entries)


def build_ranking(
    query_id: str,
    scored: Sequence[tuple[DocCandidate, float]],
    strategy_tag: str,
) -> Ranking:
    """Order (candidate, score) pairs into a Ranking.

    Sorting is total and deterministic: score descending, then first-stage
    rank ascending, and (score, first_stage_rank) pairs are unique within a
    candidate list.
    """
    for doc, score in scored:
        if not math.isfinite(score):
            raise ValidationError(f"doc {doc.doc_id!r}: non-finite score {score}")
    ordered = sorted(scored, key=lambda pair: (-pair[1], tiebreak_key(pair[0])))
    entries = tuple(
        RankEntry(doc.doc_id, score, position)
        for position, (doc, score) in enumerate(ordered, start=1)
    )
    return Ranking(query_id, entries, strategy_tag)


def _as_grade(value) -> int:
    try:
        grade = int(value)
    except (TypeError, ValueError):
        raise ValidationError(f"relevance grade {value!r} is not an integer") from None
    if grade != value:
        raise ValidationError(f"relevance grade {value!r} is not an integer")
    if grade < 0:
        raise ValidationError(f"relevance grade must be nonnegative, got {grade}")
    return grade


class Qrels:
    """Graded relevance judgments keyed by (query_id, doc_id).

    Absent pairs mean grade 0. Treat instances as read-only after
    construction.
    """

    def __init__(self, grades: Mapping[str, Mapping[str, int]] | None = None):
        by_query: dict[str, dict[str, int]] = {}
        if grades:
            for query_id, docs in grades.items():
                by_query[query_id] = {
                    doc_id: _as_grade(grade) for doc_id, grade in docs.items()
                }
        self._by_query = by_query

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, str, int]]) -> Qrels:
        """Build from (query_id, doc_id, grade) triples; later pairs win."""
        by_query: dict[str, dict[str, int]] = {}
        for query_id, doc_id, grade in pairs:
            by_query.setdefault(query_id, {})[doc_id] = _as_grade(grade)
        return cls(by_query)

    def grade(self, query_id: str, doc_id: str) -> int:
        return self._by_query.get(query_id, {}).get(doc_id, 0)

    def judged(self, query_id: str) -> Mapping[str, int]:
        """All judged docs for a query; treat the mapping as read-only."""
        return self._by_query.get(query_id, {})

    def max_grade(self, query_id: str) -> int:
        judged = self._by_query.get(query_id)
        return max(judged.values()) if judged else 0

    @property
    def query_ids(self) -> tuple[str, ...]:
        return tuple(self._by_query)

    def __len__(self) -> int:
        return sum(len(docs) for docs in self._by_query.values())


class CallLedger:
    """Counts judge calls by kind, prompt characters, and per-query wall time.

    Increment-only and lock-protected: concurrent workers may share one
    instance, and only the final totals are observable.
    """

    KINDS = ("pointwise", "triplet", "duel", "setwise")

    def __init__(self):
        self._lock = threading.Lock()
        self._counts = dict.fromkeys(self.KINDS, 0)
        self._prompt_chars = 0
        self._query_seconds: dict[str, float] = {}

    def record(self, kind: str, prompt_chars: int = 0) -> None:
        if kind not in self._counts:
            raise ValidationError(f"unknown request kind {kind!r}")
        with self._lock:
            self._counts[kind] += 1
            self._prompt_chars += prompt_chars

    def record_query_seconds(self, query_id: str, seconds: float) -> None:
        with self._lock:
            self._query_seconds[query_id] = (
                self._query_seconds.get(query_id, 0.0) + seconds
            )

    def count(self, kind: str) -> int:
        return self._counts[kind]

    @property
    def counts(self) -> dict[str, int]:
        with self._lock:
            return dict(self._counts)

    @property
    def total_calls(self) -> int:
        with self._lock:
            return sum(self._counts.values())

    @property
    def prompt_chars(self) -> int:
        return self._prompt_chars

    @property
    def query_seconds(self) -> dict[str, float]:
        with self._lock:
            return dict(self._query_seconds)
