"""Reference-index and ensemble-size sweeps with min-max normalization.

The sweeps answer three questions about anchor choice. How does ranking
quality move as the anchor comes from deeper in the first-stage order
(reference sweep, one cell per index r)? What quality should a uniform
random anchor from the top k deliver (the prefix mean of the reference
sweep)? And what does averaging scores over the top-m anchors buy (ensemble
sweep, one cell per m)?

Sweep cells are independent, but results are reduced in (query, cell) order
so identical seeds and configs reproduce a SweepResult bit for bit.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

from .datamodel import CandidateList, Qrels, ValidationError
from .eval import MetricConfig, ndcg_at_k
from .scorer.base import Scorer
from .strategies import (
    EnsembleConfig,
    FixedIndex,
    rank_refrank_multiple,
    rank_refrank_single,
)


def minmax_normalize(values: Sequence[float]) -> list[float]:
    """(v - min) / (max - min) per value; a constant vector maps to all zeros."""
    if len(values) == 0:
        raise ValidationError("cannot normalize an empty sequence")
    low = min(values)
    high = max(values)
    if high == low:
        return [0.0] * len(values)
    span = high - low
    return [(value - low) / span for value in values]


@dataclass(frozen=True)
class SweepResult:
    """Per-query metric matrix over sweep cells, plus aggregates.

    ``per_query[i][j]`` is query i's metric at cell j; ``mean`` averages
    each cell over queries and ``normalized`` is its min-max rescaling.
    """

    tag: str
    kind: str  # "reference" or "ensemble"
    cells: tuple[int, ...]
    query_ids: tuple[str, ...]
    per_query: tuple[tuple[float, ...], ...]
    mean: tuple[float, ...]
    normalized: tuple[float, ...]

    def __post_init__(self):
        if len(self.per_query) != len(self.query_ids):
            raise ValidationError("per_query rows must match query_ids")
        for row in self.per_query:
            if len(row) != len(self.cells):
                raise ValidationError("per_query row length must match cells")
        if len(self.mean) != len(self.cells) or len(self.normalized) != len(self.cells):
            raise ValidationError("aggregate lengths must match cells")
        if any(not 0.0 <= value <= 1.0 for value in self.normalized):
            raise ValidationError("normalized values must lie in [0, 1]")

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as out:
            out.write("cell,mean,normalized\n")
            for cell, mean, norm in zip(self.cells, self.mean, self.normalized):
                out.write(f"{cell},{mean!r},{norm!r}\n")


def _sweep(lists, scorer, qrels, cells, run_cell, metric, tag, kind) -> SweepResult:
    rows = []
    for candidate_list in lists:
        row = tuple(
            ndcg_at_k(run_cell(candidate_list, cell), qrels, metric) for cell in cells
        )
        rows.append(row)
    means = tuple(
        sum(row[j] for row in rows) / len(rows) for j in range(len(cells))
    )
    return SweepResult(
        tag=tag,
        kind=kind,
        cells=tuple(cells),
        query_ids=tuple(cl.query.id for cl in lists),
        per_query=tuple(rows),
        mean=means,
        normalized=tuple(minmax_normalize(means)),
    )


def sweep_reference_quality(
    lists: Sequence[CandidateList],
    scorer: Scorer,
    qrels: Qrels,
    depth_r: int,
    metric: MetricConfig = MetricConfig(),
    tag: str = "dataset",
) -> SweepResult:
    """Mean ranking quality when anchoring on first-stage rank r, r = 1..depth_r."""
    if not lists:
        raise ValidationError("no candidate lists to sweep")
    shortest = min(len(cl) for cl in lists)
    if not 1 <= depth_r <= shortest:
        raise ValidationError(
            f"depth_r={depth_r} must be within 1..{shortest} (shortest list)"
        )

    def run_cell(candidate_list, r):
        return rank_refrank_single(candidate_list, scorer, FixedIndex(r))

    return _sweep(
        lists, scorer, qrels, range(1, depth_r + 1), run_cell, metric, tag, "reference"
    )


def sweep_topk_selection(sweep: SweepResult, k_max: int) -> list[float]:
    """Expected quality of a uniform random anchor from the top k: prefix means.

    value[k-1] is the mean of the reference sweep's first k cells.
    """
    if not 1 <= k_max <= len(sweep.cells):
        raise ValidationError(f"k_max={k_max} must be within 1..{len(sweep.cells)}")
    out: list[float] = []
    running = 0.0
    for k in range(1, k_max + 1):
        running += sweep.mean[k - 1]
        out.append(running / k)
    return out


def sweep_ensemble_size(
    lists: Sequence[CandidateList],
    scorer: Scorer,
    qrels: Qrels,
    m_max: int,
    metric: MetricConfig = MetricConfig(),
    tag: str = "dataset",
) -> SweepResult:
    """Mean ranking quality of the uniform top-m anchor ensemble, m = 1..m_max."""
    if not lists:
        raise ValidationError("no candidate lists to sweep")
    shortest = min(len(cl) for cl in lists)
    if not 1 <= m_max <= shortest:
        raise ValidationError(
            f"m_max={m_max} must be within 1..{shortest} (shortest list)"
        )

    def run_cell(candidate_list, m):
        return rank_refrank_multiple(candidate_list, scorer, EnsembleConfig(m))

    return _sweep(
        lists, scorer, qrels, range(1, m_max + 1), run_cell, metric, tag, "ensemble"
    )


def write_topk_csv(values: Sequence[float], path) -> None:
    """CSV for the top-k selection curve, same 3-column shape as SweepResult."""
    normalized = minmax_normalize(list(values))
    with open(path, "w", encoding="utf-8") as out:
        out.write("cell,mean,normalized\n")
        for cell, (mean, norm) in enumerate(zip(values, normalized), start=1):
            out.write(f"{cell},{mean!r},{norm!r}\n")
