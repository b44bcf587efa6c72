"""Ranking-quality metrics (NDCG@k) and judge-call efficiency accounting."""

from __future__ import annotations

import csv
import json
import math
from collections.abc import Mapping, Sequence
from dataclasses import asdict, dataclass, field

from .datamodel import CallLedger, Qrels, Ranking, ValidationError
from .io import RunEntry

GAIN_MODES = ("exp", "linear")


@dataclass(frozen=True)
class MetricConfig:
    """NDCG cutoff and gain convention.

    Exponential gain (2^rel - 1) is the default; linear gain (rel) is
    provided because evaluator conventions differ between tools.
    """

    k: int = 10
    gain: str = "exp"

    def __post_init__(self):
        if self.k < 1:
            raise ValidationError(f"metric cutoff k must be >= 1, got {self.k}")
        if self.gain not in GAIN_MODES:
            raise ValidationError(f"gain must be one of {GAIN_MODES}, got {self.gain!r}")

    @property
    def name(self) -> str:
        return f"ndcg@{self.k}"


def _dcg(grades: Sequence[int], k: int, gain: str) -> float:
    total = 0.0
    for position, grade in enumerate(grades[:k], start=1):
        if grade:
            value = float(grade) if gain == "linear" else float(2**grade - 1)
            total += value / math.log2(position + 1)
    return total


def ndcg_for_doc_ids(
    query_id: str,
    doc_ids: Sequence[str],
    qrels: Qrels,
    config: MetricConfig = MetricConfig(),
) -> float:
    """NDCG@k for docs given in rank order.

    The ideal DCG is computed over all judged docs for the query, not just
    the retrieved pool, so first-stage recall misses are penalized. Unjudged
    docs count as grade 0; a query with no positive judgments scores 0.
    """
    judged = qrels.judged(query_id)
    if not judged:
        return 0.0
    ideal = sorted(judged.values(), reverse=True)
    idcg = _dcg(ideal, config.k, config.gain)
    if idcg <= 0.0:
        return 0.0
    grades = [judged.get(doc_id, 0) for doc_id in doc_ids]
    return _dcg(grades, config.k, config.gain) / idcg


def ndcg_at_k(
    ranking: Ranking, qrels: Qrels, config: MetricConfig = MetricConfig()
) -> float:
    """NDCG@k of a Ranking; see ndcg_for_doc_ids for conventions."""
    return ndcg_for_doc_ids(ranking.query_id, ranking.doc_ids, qrels, config)


def mean_metric(per_query: Mapping[str, float]) -> float:
    """Arithmetic mean of per-query metric values."""
    if not per_query:
        raise ValidationError("cannot average a metric over zero queries")
    return sum(per_query.values()) / len(per_query)


@dataclass
class EvalReport:
    """Per-query metric values plus the mean over judged queries.

    Queries with no judgments are excluded from the mean and counted in
    unjudged_queries; with no judged queries at all the mean is 0.0.
    """

    metric: str
    per_query: dict[str, float]
    mean: float
    judged_queries: int
    unjudged_queries: int


def evaluate_rankings(
    rankings: Sequence[Ranking], qrels: Qrels, config: MetricConfig = MetricConfig()
) -> EvalReport:
    per_query: dict[str, float] = {}
    unjudged = 0
    for ranking in rankings:
        if qrels.judged(ranking.query_id):
            per_query[ranking.query_id] = ndcg_at_k(ranking, qrels, config)
        else:
            unjudged += 1
    mean = mean_metric(per_query) if per_query else 0.0
    return EvalReport(config.name, per_query, mean, len(per_query), unjudged)


def evaluate_run_map(
    run: Mapping[str, Sequence[RunEntry]],
    qrels: Qrels,
    config: MetricConfig = MetricConfig(),
) -> EvalReport:
    """Evaluate a parsed run file (entries already sorted by rank)."""
    per_query: dict[str, float] = {}
    unjudged = 0
    for query_id, entries in run.items():
        if qrels.judged(query_id):
            doc_ids = [entry.doc_id for entry in entries]
            per_query[query_id] = ndcg_for_doc_ids(query_id, doc_ids, qrels, config)
        else:
            unjudged += 1
    mean = mean_metric(per_query) if per_query else 0.0
    return EvalReport(config.name, per_query, mean, len(per_query), unjudged)


@dataclass(frozen=True)
class EfficiencyReport:
    """Judge-call counts and wall time, per query on average.

    Call counts are the ledger totals, preserved exactly.
    """

    query_count: int
    calls: dict[str, int]
    avg_calls_per_query: dict[str, float]
    total_calls: int
    prompt_chars: int
    query_seconds: dict[str, float]
    total_seconds: float
    avg_seconds_per_query: float


def efficiency_report(ledger: CallLedger, query_count: int) -> EfficiencyReport:
    if query_count < 1:
        raise ValidationError(f"query_count must be >= 1, got {query_count}")
    calls = ledger.counts
    seconds = ledger.query_seconds
    total_seconds = sum(seconds.values())
    return EfficiencyReport(
        query_count=query_count,
        calls=calls,
        avg_calls_per_query={kind: count / query_count for kind, count in calls.items()},
        total_calls=sum(calls.values()),
        prompt_chars=ledger.prompt_chars,
        query_seconds=seconds,
        total_seconds=total_seconds,
        avg_seconds_per_query=total_seconds / query_count,
    )


@dataclass
class ExperimentReport:
    """Everything one reranking run produces: metrics, call accounting, and
    the exact configuration snapshot needed to reproduce it."""

    config: dict
    strategy: str
    metric: str | None = None
    per_query: dict[str, float] = field(default_factory=dict)
    mean: float | None = None
    judged_queries: int = 0
    unjudged_queries: int = 0
    calls: dict[str, int] = field(default_factory=dict)
    total_calls: int = 0
    prompt_chars: int = 0
    query_seconds: dict[str, float] = field(default_factory=dict)
    total_seconds: float = 0.0

    def to_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as out:
            json.dump(asdict(self), out, indent=2, sort_keys=True)
            out.write("\n")

    def to_csv(self, path) -> None:
        """Flat per-query table: query_id, metric value, judge seconds."""
        with open(path, "w", encoding="utf-8", newline="") as out:
            writer = csv.writer(out)
            writer.writerow(["query_id", self.metric or "metric", "seconds"])
            for query_id, value in self.per_query.items():
                writer.writerow(
                    [query_id, repr(value), repr(self.query_seconds.get(query_id, 0.0))]
                )
            if self.mean is not None:
                writer.writerow(["ALL", repr(self.mean), repr(self.total_seconds)])
