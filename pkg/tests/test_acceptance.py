"""Acceptance suite: one test per criterion, each printing a pass line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines as they pass. Criterion 12 needs externally supplied TREC-DL runs and
qrels (see the env vars below) and is skipped without them.
"""

import math
import os

import numpy as np
import pytest
from scipy import stats

from refrank.datamodel import CallLedger, DocCandidate, Query, build_ranking
from refrank.eval import MetricConfig, evaluate_run_map, ndcg_at_k
from refrank.io import parse_qrels, parse_run_file, write_run_file
from refrank.scorer import OracleConfig, OracleScorer, TripletRequest
from refrank.strategies import (
    EnsembleConfig,
    FixedIndex,
    rank_pairwise_allpairs,
    rank_pairwise_bubblesort,
    rank_pointwise,
    rank_refrank_multiple,
    rank_refrank_single,
    rank_setwise_heapsort,
    refrank_score,
)
from refrank.analysis import sweep_reference_quality, sweep_topk_selection

from synth import make_synth

METRIC = MetricConfig()


def _pass(number: int, detail: str) -> None:
    print(f"PASS criterion {number}: {detail}")


def oracle_for(data, seed=0, **kwargs):
    return OracleScorer(OracleConfig(seed=seed, **kwargs), latents=data.latents)


def paired_lower_95(diffs: np.ndarray) -> float:
    return float(diffs.mean() - 1.96 * diffs.std(ddof=1) / math.sqrt(len(diffs)))


def test_criterion_01_call_complexity_exact():
    """n=100: pointwise 100, refrank-single 100, refrank-multiple(5) 500,
    allpairs 9900, bubblesort(k=10) 945. Zero tolerance."""
    data = make_synth(1, 100, seed=42)
    cl = data.lists[0]
    expected = {
        "pointwise": ("pointwise", lambda sc: rank_pointwise(cl, sc), 100),
        "refrank-single": ("triplet", lambda sc: rank_refrank_single(cl, sc), 100),
        "refrank-multiple(m=5)": (
            "triplet",
            lambda sc: rank_refrank_multiple(cl, sc, EnsembleConfig(5)),
            500,
        ),
        "allpairs": ("duel", lambda sc: rank_pairwise_allpairs(cl, sc), 9900),
        "bubblesort(k=10)": (
            "duel",
            lambda sc: rank_pairwise_bubblesort(cl, sc, k=10),
            945,
        ),
    }
    observed = {}
    for name, (kind, run, want) in expected.items():
        scorer = oracle_for(data)
        run(scorer)
        observed[name] = scorer.ledger.count(kind)
        assert observed[name] == want, f"{name}: {observed[name]} != {want}"
        assert scorer.ledger.total_calls == want  # no stray calls of other kinds
    _pass(1, f"exact ledger counts at n=100: {observed}")


def test_criterion_02_noiseless_consistency():
    """sigma=0, bias=0, distinct latents: all six strategies emit the identical
    ranking and mean NDCG@10 is exactly 1.0 over a 50-query fixture."""
    data = make_synth(50, 40, seed=7, rank_correlation=0.0)
    n = 40
    runners = [
        lambda cl, sc: rank_pointwise(cl, sc),
        lambda cl, sc: rank_refrank_single(cl, sc),
        lambda cl, sc: rank_refrank_multiple(cl, sc, EnsembleConfig(5)),
        lambda cl, sc: rank_pairwise_allpairs(cl, sc),
        lambda cl, sc: rank_pairwise_bubblesort(cl, sc, k=n),
        lambda cl, sc: rank_setwise_heapsort(cl, sc, c=3, k=n),
    ]
    scorer = oracle_for(data)
    ndcg_by_strategy = [[] for _ in runners]
    for cl in data.lists:
        orders = set()
        for values, run in zip(ndcg_by_strategy, runners):
            ranking = run(cl, scorer)
            orders.add(ranking.doc_ids)
            values.append(ndcg_at_k(ranking, data.qrels, METRIC))
        assert len(orders) == 1, f"strategies disagree on {cl.query.id}"
    for values in ndcg_by_strategy:
        mean = sum(values) / len(values)
        assert mean == 1.0, f"mean NDCG@10 {mean!r} != 1.0 exactly"
    _pass(2, "all six strategies agree; mean NDCG@10 == 1.0 exactly on 50 queries")


def test_criterion_03_score_unit_vectors():
    """Two-way softmax: (0,0) -> 0.5 exact; (ln 3, 0) -> 0.75 within 1e-12;
    (1000, 0) -> 1.0 within 1e-12 with no overflow."""
    from refrank.strategies import pointwise_score

    assert pointwise_score(0.0, 0.0) == 0.5
    assert refrank_score(0.0, 0.0) == 0.5
    assert abs(pointwise_score(math.log(3.0), 0.0) - 0.75) < 1e-12
    assert abs(refrank_score(math.log(3.0), 0.0) - 0.75) < 1e-12
    assert abs(pointwise_score(1000.0, 0.0) - 1.0) < 1e-12
    assert abs(refrank_score(1000.0, 0.0) - 1.0) < 1e-12
    assert abs(refrank_score(-1000.0, 0.0) - 0.0) < 1e-12
    _pass(3, "softmax unit vectors exact, overflow-safe at logit 1000")


def test_criterion_04_ensemble_reduction_bitwise():
    """m=1 uniform ensemble equals the single-reference ranking bitwise."""
    data = make_synth(20, 30, seed=11, rank_correlation=0.3)
    scorer = oracle_for(data, noise_sigma=0.6)
    for cl in data.lists:
        single = rank_refrank_single(cl, scorer, FixedIndex(1))
        multi = rank_refrank_multiple(cl, scorer, EnsembleConfig(1))
        assert multi.doc_ids == single.doc_ids
        assert [e.score for e in multi.entries] == [e.score for e in single.entries]
        assert [e.rank for e in multi.entries] == [e.rank for e in single.entries]
    _pass(4, "m=1 ensemble bitwise equal to single reference on 20 noisy queries")


def test_criterion_05_symmetry_sums_to_one():
    """Over 1,000 random triplets, score(q,d,r) + score(q,r,d) = 1 within 1e-12."""
    data = make_synth(10, 25, seed=13)
    scorer = oracle_for(data, noise_sigma=0.8)
    rng = np.random.default_rng(99)
    worst = 0.0
    for _ in range(1000):
        cl = data.lists[int(rng.integers(0, len(data.lists)))]
        i, j = rng.integers(0, len(cl.docs), size=2)
        a, b = cl.docs[int(i)], cl.docs[int(j)]
        forward = scorer.score(TripletRequest(cl.query, a, b))
        backward = scorer.score(TripletRequest(cl.query, b, a))
        total = refrank_score(forward["A"], forward["B"]) + refrank_score(
            backward["A"], backward["B"]
        )
        worst = max(worst, abs(total - 1.0))
    assert worst < 1e-12
    _pass(5, f"1,000 random triplets: max |score+swapped-1| = {worst:.2e}")


def test_criterion_06_ensemble_beats_single_under_noise():
    """Symmetric oracle, sigma 0.5, 200 queries x 5 seeds, n=100: multi(m=5)
    at least matches single(1) with paired mean difference >= 0 at 95%."""
    diffs = []
    for seed in range(5):
        data = make_synth(200, 100, seed=1000 + seed, rank_correlation=0.5)
        scorer = oracle_for(data, seed=seed, noise_sigma=0.5)
        for cl in data.lists:
            single = ndcg_at_k(
                rank_refrank_single(cl, scorer, FixedIndex(1)), data.qrels, METRIC
            )
            multi = ndcg_at_k(
                rank_refrank_multiple(cl, scorer, EnsembleConfig(5)), data.qrels, METRIC
            )
            diffs.append(multi - single)
    diffs = np.array(diffs)
    lower = paired_lower_95(diffs)
    assert diffs.mean() >= 0.0
    assert lower >= 0.0
    _pass(6, f"mean NDCG gain multi-single = {diffs.mean():.4f} (95% lower {lower:.4f})")


def test_criterion_07_reference_beats_biased_pointwise():
    """Pointwise bias amplitude 0.5, sigma 0.25: refrank-single beats pointwise
    by a positive paired margin over 200 queries x 5 seeds."""
    diffs = []
    for seed in range(5):
        data = make_synth(200, 100, seed=2000 + seed, rank_correlation=0.5)
        scorer = oracle_for(data, seed=seed, noise_sigma=0.25, bias_amplitude=0.5)
        for cl in data.lists:
            pointwise = ndcg_at_k(rank_pointwise(cl, scorer), data.qrels, METRIC)
            anchored = ndcg_at_k(
                rank_refrank_single(cl, scorer, FixedIndex(1)), data.qrels, METRIC
            )
            diffs.append(anchored - pointwise)
    diffs = np.array(diffs)
    lower = paired_lower_95(diffs)
    assert diffs.mean() > 0.0
    assert lower > 0.0
    _pass(7, f"mean NDCG margin over biased pointwise = {diffs.mean():.4f} "
             f"(95% lower {lower:.4f})")


def test_criterion_08_reference_depth_trend():
    """Relevance-dependent-noise oracle: Spearman(r, mean N(r)) < 0 for
    r = 1..20 across 200 queries x 5 seeds."""
    curves = []
    for seed in range(5):
        data = make_synth(200, 30, seed=3000 + seed, rank_correlation=0.8)
        scorer = oracle_for(data, seed=seed, noise_sigma=0.05, ref_noise_scale=1.2)
        sweep = sweep_reference_quality(data.lists, scorer, data.qrels, depth_r=20)
        curves.append(sweep.mean)
    mean_curve = np.mean(curves, axis=0)
    rho = stats.spearmanr(np.arange(1, 21), mean_curve).statistic
    assert rho < 0.0
    _pass(8, f"Spearman(r, N(r)) = {rho:.3f} over r=1..20")


def test_criterion_09_prefix_mean_exactness():
    """S(k) equals the prefix means of N(r) within 1e-12 on a noisy sweep."""
    data = make_synth(20, 15, seed=17)
    scorer = oracle_for(data, noise_sigma=0.7)
    sweep = sweep_reference_quality(data.lists, scorer, data.qrels, depth_r=12)
    values = sweep_topk_selection(sweep, 12)
    worst = 0.0
    for k in range(1, 13):
        expected = float(np.sum(sweep.mean[:k]) / k)
        worst = max(worst, abs(values[k - 1] - expected))
    assert worst < 1e-12
    _pass(9, f"S(k) vs independent prefix means: max abs error {worst:.2e}")


def test_criterion_10_ndcg_oracle_equivalence():
    """100 random small instances (<= 8 docs, grades 0..3): ndcg_at_k matches a
    brute-force DCG/IDCG computation within 1e-10 in both gain modes."""

    def brute_force(doc_ids, judged, k, gain):
        def one_gain(rel):
            return float(rel) if gain == "linear" else 2.0**rel - 1.0

        def dcg(grades):
            return sum(
                one_gain(g) / math.log2(pos + 2) for pos, g in enumerate(grades[:k])
            )

        actual = dcg([judged.get(d, 0) for d in doc_ids])
        ideal = dcg(sorted(judged.values(), reverse=True))
        return actual / ideal if ideal > 0 else 0.0

    from refrank.datamodel import Qrels
    from refrank.eval import ndcg_for_doc_ids

    rng = np.random.default_rng(23)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 9))
        doc_ids = [f"d{i}" for i in range(n)]
        judged = {}
        for i in range(n + 3):  # judged pool may exceed the retrieved pool
            if rng.random() < 0.65:
                grade = int(rng.integers(0, 4))
                if grade:
                    judged[f"d{i}"] = grade
        qrels = Qrels({"q": judged})
        order = list(rng.permutation(doc_ids))
        k = int(rng.integers(1, 11))
        for gain in ("exp", "linear"):
            ours = ndcg_for_doc_ids("q", order, qrels, MetricConfig(k=k, gain=gain))
            reference = brute_force(order, judged, k, gain)
            worst = max(worst, abs(ours - reference))
    assert worst < 1e-10
    _pass(10, f"100 instances, both gains: max abs error vs brute force {worst:.2e}")


def test_criterion_11_run_file_round_trip(tmp_path):
    """write_run_file then parse_run_file is the identity on (qid, docid, rank)
    for 1,000 random rankings."""
    rng = np.random.default_rng(31)
    rankings = []
    for qi in range(1000):
        n = int(rng.integers(1, 15))
        docs = [DocCandidate(f"q{qi}_d{i}", "text", i + 1, 0.0) for i in range(n)]
        scores = rng.normal(size=n)
        rankings.append(build_ranking(f"q{qi}", list(zip(docs, scores)), "t"))
    path = tmp_path / "roundtrip.run"
    write_run_file(rankings, "t", path)
    parsed = parse_run_file(path)
    assert list(parsed) == [r.query_id for r in rankings]
    for ranking in rankings:
        got = [(e.doc_id, e.rank) for e in parsed[ranking.query_id]]
        want = [(e.doc_id, e.rank) for e in ranking.entries]
        assert got == want
    _pass(11, "1,000 rankings round-trip exactly on (qid, docid, rank)")


DL19_RUN = os.environ.get("REFRANK_DL19_RUN")
DL19_QRELS = os.environ.get("REFRANK_DL19_QRELS")
DL20_RUN = os.environ.get("REFRANK_DL20_RUN")
DL20_QRELS = os.environ.get("REFRANK_DL20_QRELS")


@pytest.mark.skipif(
    not (DL19_RUN and DL19_QRELS and DL20_RUN and DL20_QRELS),
    reason="external TREC-DL runs/qrels not supplied "
    "(set REFRANK_DL19_RUN/QRELS and REFRANK_DL20_RUN/QRELS)",
)
def test_criterion_12_external_bm25_ndcg():
    """User-supplied first-stage BM25 runs + official qrels reproduce 0.506
    (DL-19) and 0.480 (DL-20) within +/-0.005 in the matching gain mode."""
    for run_path, qrels_path, target in (
        (DL19_RUN, DL19_QRELS, 0.506),
        (DL20_RUN, DL20_QRELS, 0.480),
    ):
        run = parse_run_file(run_path)
        qrels = parse_qrels(qrels_path)
        means = {
            gain: evaluate_run_map(run, qrels, MetricConfig(k=10, gain=gain)).mean
            for gain in ("exp", "linear")
        }
        best_gain = min(means, key=lambda g: abs(means[g] - target))
        assert abs(means[best_gain] - target) <= 0.005, (
            f"{run_path}: neither gain mode matches {target}: {means}"
        )
    _pass(12, "external BM25 rows reproduced within tolerance")
