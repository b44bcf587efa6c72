"""The six ranking strategies.

Each strategy consumes a CandidateList plus a Scorer and emits a Ranking
whose doc_ids are a permutation of the input. Judge-call counts are exact:

    pointwise            n
    refrank-single       n
    refrank-multiple     m * n
    pairwise-allpairs    n(n-1)      (n(n-1)/2 in half-matrix mode)
    pairwise-bubblesort  k(n-1) - k(k-1)/2
    setwise-heapsort     data-dependent; the ledger reports it exactly

Batchable strategies (pointwise, refrank, allpairs) issue all their
requests in one score_batch call; bubblesort and heapsort depend on earlier
outcomes and score serially. Score aggregation always walks candidates in
first-stage-rank order so floating-point sums are reproducible.
"""

from __future__ import annotations

import math
import warnings as _warnings
from dataclasses import dataclass

from ._seeded import unit_uniform
from .datamodel import (
    CandidateList,
    DocCandidate,
    Ranking,
    ValidationError,
    build_ranking,
    tiebreak_key,
)
from .scorer.base import (
    BatchScoringError,
    DuelRequest,
    LabelLogits,
    PointwiseRequest,
    Scorer,
    ScoreRequest,
    ScoringError,
    SetwiseRequest,
    TripletRequest,
)


def _two_way_softmax(first: float, second: float) -> float:
    """exp(first) / (exp(first) + exp(second)), safe for large magnitudes."""
    if not (math.isfinite(first) and math.isfinite(second)):
        raise ValidationError("logits must be finite")
    top = first if first >= second else second
    e_first = math.exp(first - top)
    e_second = math.exp(second - top)
    return e_first / (e_first + e_second)


def pointwise_score(s_yes: float, s_no: float) -> float:
    """Relevance probability from the yes/no label logits."""
    return _two_way_softmax(s_yes, s_no)


def refrank_score(s_a: float, s_b: float) -> float:
    """Probability mass on the candidate slot (A) against the reference slot (B).

    The candidate always occupies slot A and the reference slot B; there is
    no built-in position-swap debiasing (swap_slots on the single-reference
    strategy averages both orientations as an optional extension).
    """
    return _two_way_softmax(s_a, s_b)


@dataclass(frozen=True)
class FixedIndex:
    """Always anchor on the document at first-stage rank r."""

    r: int = 1

    def __post_init__(self):
        if self.r < 1:
            raise ValidationError(f"reference index must be >= 1, got {self.r}")


@dataclass(frozen=True)
class RandomTopK:
    """Anchor on a seeded uniform draw from the top-k first-stage ranks.

    The draw is deterministic per (seed, query_id): reranking the same
    query twice picks the same anchor.
    """

    k: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValidationError(f"top-k must be >= 1, got {self.k}")


RefPolicy = FixedIndex | RandomTopK


def resolve_reference(candidates: CandidateList, policy: RefPolicy) -> DocCandidate:
    """Pick the anchor document a policy names for this query."""
    n = len(candidates)
    if isinstance(policy, FixedIndex):
        if policy.r > n:
            raise ValidationError(
                f"reference index {policy.r} exceeds list length {n}"
            )
        return candidates.docs[policy.r - 1]
    if policy.k > n:
        raise ValidationError(f"reference top-k {policy.k} exceeds list length {n}")
    u = unit_uniform(str(policy.seed), "reference-pick", candidates.query.id)
    rank = 1 + min(int(u * policy.k), policy.k - 1)
    return candidates.docs[rank - 1]


@dataclass(frozen=True)
class EnsembleConfig:
    """How many top-ranked anchors to combine, and their weights.

    Weights default to the uniform 1/m and must be nonnegative and sum to 1
    within 1e-9.
    """

    m: int
    weights: tuple[float, ...] = ()

    def __post_init__(self):
        if self.m < 1:
            raise ValidationError(f"ensemble size m must be >= 1, got {self.m}")
        weights = tuple(self.weights)
        if not weights:
            weights = (1.0 / self.m,) * self.m
        object.__setattr__(self, "weights", weights)
        if len(weights) != self.m:
            raise ValidationError(
                f"expected {self.m} weights, got {len(weights)}"
            )
        if any(w < 0 for w in weights):
            raise ValidationError("weights must be nonnegative")
        if abs(sum(weights) - 1.0) > 1e-9:
            raise ValidationError(f"weights must sum to 1, got {sum(weights)!r}")

    def check_budget(self, n: int) -> None:
        """Warn when m exceeds floor(log2 n).

        Past that point the m*n judge calls cost more than an O(n log n)
        comparison sort would; large m stays allowed for sweep experiments.
        """
        if n >= 1 and self.m > int(math.log2(n)):
            _warnings.warn(
                f"ensemble size m={self.m} exceeds the log2(n)~{int(math.log2(n))} "
                f"call-budget guideline at n={n}",
                stacklevel=3,
            )


def _scored_batch(scorer: Scorer, requests: list[ScoreRequest]) -> list[LabelLogits]:
    try:
        return scorer.score_batch(requests)
    except BatchScoringError as exc:
        failed = ", ".join(
            requests[i].request_id or f"#{i}" for i in sorted(exc.errors)[:8]
        )
        raise ScoringError(f"scoring failed for: {failed}") from exc


def rank_pointwise(candidates: CandidateList, scorer: Scorer) -> Ranking:
    """Independent yes/no judgment per document; exactly n judge calls."""
    query = candidates.query
    requests = [
        PointwiseRequest(query, doc, request_id=doc.doc_id) for doc in candidates.docs
    ]
    results = _scored_batch(scorer, requests)
    scored = [
        (doc, pointwise_score(logits["yes"], logits["no"]))
        for doc, logits in zip(candidates.docs, results)
    ]
    return build_ranking(query.id, scored, "pointwise")


def rank_refrank_single(
    candidates: CandidateList,
    scorer: Scorer,
    policy: RefPolicy = FixedIndex(1),
    swap_slots: bool = False,
) -> Ranking:
    """Score every document against one anchor; exactly n triplet calls.

    The anchor is scored too (its triplet pairs it with itself), keeping the
    call count at n with no special-cased score; a symmetric judge gives the
    self-pair 0.5, so the anchor's final rank rests on the tie-break. With
    swap_slots both orientations are judged and averaged (2n calls).
    """
    query = candidates.query
    ref = resolve_reference(candidates, policy)
    requests: list[ScoreRequest] = [
        TripletRequest(query, doc, ref, request_id=doc.doc_id)
        for doc in candidates.docs
    ]
    if swap_slots:
        requests += [
            TripletRequest(query, ref, doc, request_id=f"{doc.doc_id}~swap")
            for doc in candidates.docs
        ]
    results = _scored_batch(scorer, requests)
    scored = []
    for index, doc in enumerate(candidates.docs):
        logits = results[index]
        value = refrank_score(logits["A"], logits["B"])
        if swap_slots:
            swapped = results[len(candidates.docs) + index]
            value = 0.5 * (value + (1.0 - refrank_score(swapped["A"], swapped["B"])))
        scored.append((doc, value))
    return build_ranking(query.id, scored, "refrank-single")


def rank_refrank_multiple(
    candidates: CandidateList, scorer: Scorer, config: EnsembleConfig
) -> Ranking:
    """Weighted anchor ensemble over the top-m first-stage documents.

    Anchors are the m top-ranked docs in first-stage order; each candidate's
    score is the weighted sum of its per-anchor scores. Exactly m*n triplet
    calls. With m=1 this reduces to rank_refrank_single(FixedIndex(1))
    score for score.
    """
    n = len(candidates)
    if config.m > n:
        raise ValidationError(f"ensemble size m={config.m} exceeds list length {n}")
    config.check_budget(n)
    query = candidates.query
    refs = candidates.docs[: config.m]
    requests = [
        TripletRequest(query, doc, ref, request_id=f"{doc.doc_id}|{ref.doc_id}")
        for doc in candidates.docs
        for ref in refs
    ]
    results = _scored_batch(scorer, requests)
    scored = []
    position = 0
    for doc in candidates.docs:
        total = 0.0
        for weight in config.weights:
            logits = results[position]
            position += 1
            total += weight * refrank_score(logits["A"], logits["B"])
        scored.append((doc, total))
    return build_ranking(query.id, scored, "refrank-multiple")


def rank_pairwise_allpairs(
    candidates: CandidateList, scorer: Scorer, both_orders: bool = True
) -> Ranking:
    """Duel every pair of documents and average win probabilities.

    Both orientations of each pair are judged by default, n(n-1) calls, so
    slot preference cancels in the aggregate; half-matrix mode judges each
    unordered pair once, n(n-1)/2 calls, treating the complement as 1 - p.
    """
    docs = candidates.docs
    n = len(docs)
    query = candidates.query
    if n == 1:
        return build_ranking(query.id, [(docs[0], 1.0)], "pairwise-allpairs")
    requests: list[ScoreRequest] = []
    index: dict[tuple[int, int], int] = {}
    for i, doc_a in enumerate(docs):
        for j, doc_b in enumerate(docs):
            if i == j or (not both_orders and i > j):
                continue
            index[(i, j)] = len(requests)
            requests.append(
                DuelRequest(query, doc_a, doc_b, request_id=f"{doc_a.doc_id}|{doc_b.doc_id}")
            )
    results = _scored_batch(scorer, requests)

    def prob_a(i: int, j: int) -> float:
        logits = results[index[(i, j)]]
        return refrank_score(logits["A"], logits["B"])

    scored = []
    for i, doc in enumerate(docs):
        total = 0.0
        for j in range(n):
            if j == i:
                continue
            if both_orders:
                total += prob_a(i, j) + (1.0 - prob_a(j, i))
            else:
                total += prob_a(i, j) if i < j else 1.0 - prob_a(j, i)
        denominator = 2.0 * (n - 1) if both_orders else float(n - 1)
        scored.append((doc, total / denominator))
    return build_ranking(query.id, scored, "pairwise-allpairs")


def rank_pairwise_bubblesort(
    candidates: CandidateList, scorer: Scorer, k: int = 10
) -> Ranking:
    """k bubble passes over the first-stage order, settling the top k.

    Each pass sweeps from the bottom of the unsettled region toward the top,
    swapping adjacent docs whenever the lower-positioned one wins its duel
    (probability above 0.5 judged from slot A). Docs beyond the settled
    top-k fall back to first-stage order. Exactly k(n-1) - k(k-1)/2 calls.
    """
    n = len(candidates)
    if not 1 <= k <= n:
        raise ValidationError(f"bubble passes k={k} must be within 1..{n}")
    query = candidates.query
    order = list(candidates.docs)
    for settled in range(k):
        for i in range(n - 2, settled - 1, -1):
            upper, lower = order[i], order[i + 1]
            logits = scorer.score(
                DuelRequest(query, lower, upper, request_id=f"{lower.doc_id}|{upper.doc_id}")
            )
            if refrank_score(logits["A"], logits["B"]) > 0.5:
                order[i], order[i + 1] = lower, upper
    final = order[:k] + sorted(order[k:], key=tiebreak_key)
    scored = [(doc, float(n - position)) for position, doc in enumerate(final)]
    return build_ranking(query.id, scored, "pairwise-bubblesort")


def rank_setwise_heapsort(
    candidates: CandidateList, scorer: Scorer, c: int = 3, k: int = 10
) -> Ranking:
    """c-ary max-heap built with set comparisons, then k extractions.

    Every sift step asks one setwise question over a parent and its up-to-c
    children and promotes the winner, so each judge call replaces up to c
    duels. Extracted docs take the top ranks; the rest keep first-stage
    order. The exact comparison count depends on how far winners sift and is
    reported by the ledger.
    """
    n = len(candidates)
    if c < 2:
        raise ValidationError(f"setwise fanout c must be >= 2, got {c}")
    if not 1 <= k <= n:
        raise ValidationError(f"extraction count k={k} must be within 1..{n}")
    query = candidates.query
    heap = list(candidates.docs)

    def most_relevant(group: list[DocCandidate]) -> int:
        request = SetwiseRequest(
            query, tuple(group), request_id="|".join(d.doc_id for d in group)
        )
        logits = scorer.score(request)
        labels = request.labels
        best = 0
        for position in range(1, len(group)):
            if logits[labels[position]] > logits[labels[best]]:
                best = position
        return best

    def sift_down(position: int, size: int) -> None:
        while True:
            first_child = c * position + 1
            if first_child >= size:
                return
            children = range(first_child, min(first_child + c, size))
            group = [heap[position]] + [heap[child] for child in children]
            winner = most_relevant(group)
            if winner == 0:
                return
            child = first_child + winner - 1
            heap[position], heap[child] = heap[child], heap[position]
            position = child

    size = n
    for position in range((size - 2) // c, -1, -1):
        sift_down(position, size)
    extracted: list[DocCandidate] = []
    for _ in range(k):
        extracted.append(heap[0])
        size -= 1
        if size == 0:
            break
        heap[0] = heap[size]
        sift_down(0, size)
    final = extracted + sorted(heap[:size], key=tiebreak_key)
    scored = [(doc, float(n - position)) for position, doc in enumerate(final)]
    return build_ranking(query.id, scored, "setwise-heapsort")
