import json

import pytest
from click.testing import CliRunner

from refrank.cli import cli

from synth import make_synth, write_experiment_files


@pytest.fixture
def fixture_files(tmp_path):
    data = make_synth(3, 12, seed=17, rank_correlation=0.4)
    return data, write_experiment_files(data, tmp_path / "data")


def invoke(args):
    return CliRunner().invoke(cli, args, catch_exceptions=False)


def rerank_args(paths, out, strategy="refrank-single", extra=()):
    run, corpus, queries, qrels = paths
    return [
        "rerank",
        "--run", str(run),
        "--corpus", str(corpus),
        "--queries", str(queries),
        "--qrels", str(qrels),
        "--out", str(out),
        "--strategy", strategy,
        "--seed", "7",
        "--depth", "12",
        *extra,
    ]


class TestRerank:
    def test_writes_run_and_report(self, fixture_files, tmp_path):
        data, paths = fixture_files
        out = tmp_path / "out"
        result = invoke(rerank_args(paths, out))
        assert result.exit_code == 0, result.output
        run_file = out / "refrank-single.run"
        report_file = out / "refrank-single.report.json"
        assert run_file.exists() and report_file.exists()
        lines = run_file.read_text().strip().splitlines()
        assert len(lines) == 3 * 12
        report = json.loads(report_file.read_text())
        assert report["calls"]["triplet"] == 3 * 12
        assert report["metric"] == "ndcg@10"
        assert report["mean"] == 1.0  # noiseless oracle on judged fixture
        assert report["config"]["seed"] == 7

    def test_unknown_strategy_is_usage_error(self, fixture_files, tmp_path):
        data, paths = fixture_files
        result = CliRunner().invoke(
            cli, rerank_args(paths, tmp_path / "out", strategy="quicksort")
        )
        assert result.exit_code == 2

    def test_missing_seed_with_oracle_is_usage_error(self, fixture_files, tmp_path):
        data, paths = fixture_files
        args = rerank_args(paths, tmp_path / "out")
        seed_at = args.index("--seed")
        del args[seed_at : seed_at + 2]
        result = CliRunner().invoke(cli, args)
        assert result.exit_code == 2
        assert "--seed" in result.output

    def test_deterministic_output_bytes(self, fixture_files, tmp_path):
        data, paths = fixture_files
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert invoke(rerank_args(paths, out_a)).exit_code == 0
        assert invoke(rerank_args(paths, out_b)).exit_code == 0
        assert (out_a / "refrank-single.run").read_bytes() == (
            out_b / "refrank-single.run"
        ).read_bytes()
        report_a = json.loads((out_a / "refrank-single.report.json").read_text())
        report_b = json.loads((out_b / "refrank-single.report.json").read_text())
        for report in (report_a, report_b):
            report.pop("query_seconds")
            report.pop("total_seconds")
        assert report_a == report_b

    def test_refuses_overwrite_without_force(self, fixture_files, tmp_path):
        data, paths = fixture_files
        out = tmp_path / "out"
        assert invoke(rerank_args(paths, out)).exit_code == 0
        denied = CliRunner().invoke(cli, rerank_args(paths, out))
        assert denied.exit_code == 1
        assert "--force" in denied.output
        forced = invoke(rerank_args(paths, out, extra=["--force"]))
        assert forced.exit_code == 0

    def test_concurrency_preserves_output(self, fixture_files, tmp_path):
        data, paths = fixture_files
        serial, parallel = tmp_path / "serial", tmp_path / "parallel"
        assert invoke(rerank_args(paths, serial)).exit_code == 0
        assert (
            invoke(rerank_args(paths, parallel, extra=["--concurrency", "4"])).exit_code
            == 0
        )
        assert (serial / "refrank-single.run").read_bytes() == (
            parallel / "refrank-single.run"
        ).read_bytes()

    def test_refrank_multiple_line_count(self, fixture_files, tmp_path):
        data, paths = fixture_files
        out = tmp_path / "out"
        result = invoke(
            rerank_args(paths, out, strategy="refrank-multiple", extra=["--m", "3"])
        )
        assert result.exit_code == 0
        report = json.loads((out / "refrank-multiple.report.json").read_text())
        assert report["calls"]["triplet"] == 3 * 12 * 3

    def test_ref_topk_requires_seed(self, fixture_files, tmp_path):
        data, paths = fixture_files
        args = rerank_args(paths, tmp_path / "out", extra=["--ref-topk", "2"])
        seed_at = args.index("--seed")
        del args[seed_at : seed_at + 2]
        result = CliRunner().invoke(cli, args)
        assert result.exit_code == 2

    def test_endpoint_requires_url_and_model(self, fixture_files, tmp_path):
        data, paths = fixture_files
        args = rerank_args(paths, tmp_path / "out", extra=["--backend", "endpoint"])
        result = CliRunner().invoke(cli, args)
        assert result.exit_code == 2

    def test_missing_input_file_is_usage_error(self, fixture_files, tmp_path):
        data, paths = fixture_files
        args = rerank_args(paths, tmp_path / "out")
        args[args.index("--run") + 1] = str(tmp_path / "nope.run")
        result = CliRunner().invoke(cli, args)
        assert result.exit_code == 2


class TestAnalyze:
    def test_writes_three_csvs(self, fixture_files, tmp_path):
        data, paths = fixture_files
        run, corpus, queries, qrels = paths
        out = tmp_path / "analysis"
        result = invoke(
            [
                "analyze",
                "--run", str(run),
                "--corpus", str(corpus),
                "--queries", str(queries),
                "--qrels", str(qrels),
                "--out", str(out),
                "--seed", "7",
                "--depth", "12",
                "--ref-topk", "10",
                "--m", "4",
            ]
        )
        assert result.exit_code == 0, result.output
        reference = (out / "reference_sweep.csv").read_text().strip().splitlines()
        topk = (out / "topk_selection.csv").read_text().strip().splitlines()
        ensemble = (out / "ensemble_sweep.csv").read_text().strip().splitlines()
        assert len(reference) == 11  # header + 10 rows
        assert len(topk) == 11
        assert len(ensemble) == 5

    def test_topk_is_prefix_mean_of_reference(self, fixture_files, tmp_path):
        data, paths = fixture_files
        run, corpus, queries, qrels = paths
        out = tmp_path / "analysis"
        invoke(
            [
                "analyze",
                "--run", str(run),
                "--corpus", str(corpus),
                "--queries", str(queries),
                "--qrels", str(qrels),
                "--out", str(out),
                "--seed", "7",
                "--depth", "12",
                "--ref-topk", "6",
                "--m", "2",
            ]
        )
        reference = [
            float(line.split(",")[1])
            for line in (out / "reference_sweep.csv").read_text().strip().splitlines()[1:]
        ]
        topk = [
            float(line.split(",")[1])
            for line in (out / "topk_selection.csv").read_text().strip().splitlines()[1:]
        ]
        for k in range(1, 7):
            assert topk[k - 1] == pytest.approx(sum(reference[:k]) / k, abs=1e-12)

    def test_m_max_exceeding_n_is_runtime_error(self, fixture_files, tmp_path):
        data, paths = fixture_files
        run, corpus, queries, qrels = paths
        result = CliRunner().invoke(
            cli,
            [
                "analyze",
                "--run", str(run),
                "--corpus", str(corpus),
                "--queries", str(queries),
                "--qrels", str(qrels),
                "--out", str(tmp_path / "x"),
                "--seed", "7",
                "--depth", "12",
                "--m", "50",
            ],
        )
        assert result.exit_code == 1


class TestEval:
    def test_ideal_run_scores_one(self, fixture_files, tmp_path):
        data, paths = fixture_files
        run, corpus, queries, qrels = paths
        out = tmp_path / "out"
        invoke(rerank_args(paths, out))  # noiseless oracle gives the ideal order
        result = invoke(
            [
                "eval",
                "--run", str(out / "refrank-single.run"),
                "--qrels", str(qrels),
            ]
        )
        assert result.exit_code == 0, result.output
        assert "mean\tndcg@10\t1.000000" in result.output

    def test_json_written(self, fixture_files, tmp_path):
        data, paths = fixture_files
        run, corpus, queries, qrels = paths
        out = tmp_path / "evalout"
        result = invoke(
            ["eval", "--run", str(run), "--qrels", str(qrels), "--out", str(out)]
        )
        assert result.exit_code == 0
        payload = json.loads((out / "eval.json").read_text())
        assert payload["metric"] == "ndcg@10"
        assert 0.0 <= payload["mean"] <= 1.0

    def test_empty_qrels_intersection_warns_and_zero(self, fixture_files, tmp_path):
        data, paths = fixture_files
        run, *_ = paths
        alien_qrels = tmp_path / "alien.qrels"
        alien_qrels.write_text("zz9 0 nosuchdoc 1\n")
        result = CliRunner().invoke(
            cli, ["eval", "--run", str(run), "--qrels", str(alien_qrels)]
        )
        assert result.exit_code == 0
        assert "mean\tndcg@10\t0.000000" in result.output
        assert "warning" in result.output


class TestBench:
    def test_reports_call_counts(self, fixture_files, tmp_path):
        data, paths = fixture_files
        run, corpus, queries, qrels = paths
        result = invoke(
            [
                "bench",
                "--run", str(run),
                "--corpus", str(corpus),
                "--queries", str(queries),
                "--strategy", "pointwise,refrank-single,refrank-multiple",
                "--seed", "7",
                "--depth", "12",
                "--m", "3",
            ]
        )
        assert result.exit_code == 0, result.output
        lines = {
            line.split()[0]: line for line in result.output.strip().splitlines()[2:]
        }
        assert "pointwise=12" in lines["pointwise"]
        assert "triplet=12" in lines["refrank-single"]
        assert "triplet=36" in lines["refrank-multiple"]

    def test_unknown_strategy_in_list(self, fixture_files):
        data, paths = fixture_files
        run, corpus, queries, qrels = paths
        result = CliRunner().invoke(
            cli,
            [
                "bench",
                "--run", str(run),
                "--corpus", str(corpus),
                "--queries", str(queries),
                "--strategy", "pointwise,mystery",
                "--seed", "1",
            ],
        )
        assert result.exit_code == 2

    def test_refrank_single_wall_time_within_2x_pointwise(self):
        # oracle-backend latency: anchored scoring issues the same number of
        # calls as pointwise, so per-query wall time stays comparable
        import statistics
        import time

        from refrank.scorer import OracleConfig, OracleScorer
        from refrank.strategies import FixedIndex, rank_pointwise, rank_refrank_single

        data = make_synth(5, 100, seed=55)

        def median_seconds(run):
            samples = []
            for _ in range(5):
                scorer = OracleScorer(OracleConfig(seed=1), latents=data.latents)
                started = time.perf_counter()
                for cl in data.lists:
                    run(cl, scorer)
                samples.append(time.perf_counter() - started)
            return statistics.median(samples)

        pointwise = median_seconds(lambda cl, sc: rank_pointwise(cl, sc))
        anchored = median_seconds(
            lambda cl, sc: rank_refrank_single(cl, sc, FixedIndex(1))
        )
        assert anchored < 2.0 * pointwise

    def test_refrank_multiple_vs_allpairs_calls_at_n100(self, tmp_path):
        data = make_synth(1, 100, seed=77)
        run, corpus, queries, qrels = write_experiment_files(data, tmp_path / "big")
        result = invoke(
            [
                "bench",
                "--run", str(run),
                "--corpus", str(corpus),
                "--queries", str(queries),
                "--strategy", "refrank-multiple,pairwise-allpairs",
                "--seed", "3",
                "--m", "5",
            ]
        )
        assert result.exit_code == 0, result.output
        lines = {
            line.split()[0]: line for line in result.output.strip().splitlines()[2:]
        }
        assert "triplet=500" in lines["refrank-multiple"]
        assert "duel=9900" in lines["pairwise-allpairs"]
