import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from goai import fixtures
from goai.cli import main
from goai.records import read_records


@pytest.fixture()
def runner():
    return CliRunner()


def run_ok(runner, args):
    result = runner.invoke(main, args, catch_exceptions=False)
    assert result.exit_code == 0, result.output
    return result


class TestExplore:
    def test_figure2_listing(self, runner, fixture_dir, tmp_path):
        result = run_ok(runner, [
            "explore",
            "--graph", str(fixture_dir / "fig2.snapshot"),
            "--key", "tree-of-thoughts",
            "--query", fixtures.QUERY,
            "--width", "5", "--depth", "1",
            "--script", str(fixture_dir / "fig2.script"),
            "--out", str(tmp_path / "paths.jsonl"),
        ])
        lines = [l for l in result.output.splitlines() if l and l[0].isdigit()]
        assert len(lines) == 5
        assert "self-consistency" in lines[0] and "(Background, B&E)" in lines[0]
        assert "controlllm" in lines[4]

    def test_records_mode_emits_jsonl(self, runner, fixture_dir, tmp_path):
        result = run_ok(runner, [
            "--records", "explore",
            "--graph", str(fixture_dir / "fig2.snapshot"),
            "--key", "tree-of-thoughts",
            "--query", fixtures.QUERY,
            "--width", "5", "--depth", "1",
            "--script", str(fixture_dir / "fig2.script"),
            "--out", str(tmp_path / "paths.jsonl"),
        ])
        records = [json.loads(l) for l in result.output.splitlines() if l.strip()]
        assert len(records) == 5
        assert all(r["kind"] == "path" for r in records)

    def test_manifest_written(self, runner, fixture_dir, tmp_path):
        out = tmp_path / "paths.jsonl"
        run_ok(runner, [
            "explore", "--graph", str(fixture_dir / "fig2.snapshot"),
            "--key", "tree-of-thoughts", "--query", fixtures.QUERY,
            "--width", "5", "--depth", "1",
            "--script", str(fixture_dir / "fig2.script"),
            "--out", str(out),
        ])
        manifest = json.loads(out.with_suffix(".jsonl.manifest.json").read_text())
        assert manifest["kind"] == "run_manifest"
        assert manifest["backend_id"] == "scripted"
        assert manifest["outputs"] == ["paths.jsonl"]
        assert len(manifest["template_checksums"]) == 9

    def test_unknown_flag_is_usage_error(self, runner):
        result = runner.invoke(main, ["explore", "--nonsense"])
        assert result.exit_code == 2

    def test_pipeline_error_exits_one_with_code(self, runner, fixture_dir, tmp_path):
        result = runner.invoke(main, [
            "explore", "--graph", str(fixture_dir / "fig2.snapshot"),
            "--key", "ghost-paper", "--width", "5", "--depth", "1",
            "--script", str(fixture_dir / "fig2.script"),
            "--out", str(tmp_path / "paths.jsonl"),
        ])
        assert result.exit_code == 1
        assert "unknown-entity" in result.output


class TestIngestClassify:
    def test_ingest_fixture_network(self, runner, fixture_dir, tmp_path):
        out = tmp_path / "graph.snapshot"
        result = run_ok(runner, [
            "ingest", "--topic", fixtures.TOPIC,
            "--network", str(fixture_dir / "fig2.network.jsonl"),
            "--k", "4", "--n", "2", "--floor", "0.0",
            "--out", str(out),
        ])
        assert "key reference: tree-of-thoughts" in result.output
        assert out.exists()

    def test_classify_reproduces_fixture_graph(self, runner, fixture_dir, tmp_path):
        raw = tmp_path / "raw.snapshot"
        classified = tmp_path / "classified.snapshot"
        run_ok(runner, [
            "ingest", "--topic", fixtures.TOPIC,
            "--network", str(fixture_dir / "fig2.network.jsonl"),
            "--k", "4", "--n", "2", "--floor", "0.0", "--out", str(raw),
        ])
        run_ok(runner, [
            "classify", "--graph", str(raw),
            "--sections", str(fixture_dir / "fig2.sections.jsonl"),
            "--script", str(fixture_dir / "fig2.script"),
            "--out", str(classified),
        ])
        assert classified.read_bytes() == (fixture_dir / "fig2.snapshot").read_bytes()


class TestReplayTrace:
    def test_replay_is_byte_identical(self, runner, fixture_dir, tmp_path):
        paths1 = tmp_path / "p1.jsonl"
        paths2 = tmp_path / "p2.jsonl"
        trace = tmp_path / "t.trace"
        run_ok(runner, [
            "explore", "--graph", str(fixture_dir / "fig2.snapshot"),
            "--key", "tree-of-thoughts", "--query", fixtures.QUERY,
            "--width", "5", "--depth", "1",
            "--script", str(fixture_dir / "fig2.script"),
            "--out", str(paths1), "--trace", str(trace),
        ])
        run_ok(runner, [
            "replay-trace", "--graph", str(fixture_dir / "fig2.snapshot"),
            "--trace", str(trace), "--out", str(paths2),
        ])
        assert paths1.read_bytes() == paths2.read_bytes()


class TestReviewCommands:
    def test_review_verdict(self, runner, fixture_dir, tmp_path):
        idea_file = tmp_path / "idea.txt"
        idea_file.write_text(fixtures.DEMO_IDEA, encoding="utf-8")
        out = tmp_path / "review.jsonl"
        result = run_ok(runner, [
            "review", "--idea-file", str(idea_file),
            "--agents", "3",
            "--script", str(fixture_dir / "fig2.script"),
            "--out", str(out),
        ])
        assert "verdict: promising (2/3 votes, threshold 5)" in result.output
        records = [rec for _, rec in read_records(out)]
        assert records[0]["kind"] == "verdict"
        assert [r["score"] for r in records[1:]] == [6, 7, 4]

    def test_prepare_dataset_counts_skips(self, runner, fixture_dir, tmp_path):
        out = tmp_path / "sft.jsonl"
        result = run_ok(runner, [
            "prepare-dataset",
            "--dump", str(fixture_dir / "sft_dump_dirty.jsonl"),
            "--out", str(out),
        ])
        assert "exported 50 records" in result.output
        records = [rec for _, rec in read_records(out)]
        assert sum(1 for r in records if r["kind"] == "sft") == 50
        counts = next(r for r in records if r["kind"] == "skip_counts")["counts"]
        assert sum(counts.values()) == 6

    def test_evaluate_correlation(self, runner, fixture_dir, tmp_path):
        out = tmp_path / "report.json"
        result = run_ok(runner, [
            "evaluate-correlation",
            "--pairs", str(fixture_dir / "pairs.jsonl"),
            "--out", str(out),
        ])
        assert "pearson=" in result.output
        report = json.loads(out.read_text())
        assert report["n"] == 8
        assert -1.0 <= report["pearson"] <= 1.0


class TestFullPipelineDeterminism:
    STAGES = ("graph.snapshot", "classified.snapshot", "paths.jsonl",
              "bundles.jsonl", "review.jsonl")

    def _run_pipeline(self, runner, fixture_dir, root: Path) -> dict[str, bytes]:
        root.mkdir()
        graph = root / "graph.snapshot"
        classified = root / "classified.snapshot"
        paths = root / "paths.jsonl"
        bundles = root / "bundles.jsonl"
        review = root / "review.jsonl"
        run_ok(runner, ["ingest", "--topic", fixtures.TOPIC,
                        "--network", str(fixture_dir / "fig2.network.jsonl"),
                        "--k", "4", "--n", "2", "--floor", "0.0",
                        "--out", str(graph)])
        run_ok(runner, ["classify", "--graph", str(graph),
                        "--sections", str(fixture_dir / "fig2.sections.jsonl"),
                        "--script", str(fixture_dir / "fig2.script"),
                        "--out", str(classified)])
        run_ok(runner, ["explore", "--graph", str(classified),
                        "--key", "tree-of-thoughts", "--query", fixtures.QUERY,
                        "--width", "5", "--depth", "1",
                        "--script", str(fixture_dir / "fig2.script"),
                        "--out", str(paths)])
        run_ok(runner, ["synthesize", "--graph", str(classified),
                        "--paths", str(paths), "--query", fixtures.QUERY,
                        "--script", str(fixture_dir / "fig2.script"),
                        "--out", str(bundles)])
        from goai.synthesis import load_bundles
        first_fp = min(load_bundles(bundles))
        idea = load_bundles(bundles)[first_fp].idea
        idea_file = root / "idea.txt"
        idea_file.write_text(
            fixtures.idea_to_text(idea.motivation, idea.novelty, idea.method),
            encoding="utf-8")
        run_ok(runner, ["review", "--idea-file", str(idea_file), "--agents", "3",
                        "--script", str(fixture_dir / "fig2.script"),
                        "--out", str(review)])
        out: dict[str, bytes] = {}
        for f in root.iterdir():
            out[f.name] = f.read_bytes()
        return out

    def test_two_runs_byte_identical(self, runner, fixture_dir, tmp_path):
        run_a = self._run_pipeline(runner, fixture_dir, tmp_path / "a")
        run_b = self._run_pipeline(runner, fixture_dir, tmp_path / "b")
        assert set(run_a) == set(run_b)
        for name in sorted(run_a):
            assert run_a[name] == run_b[name], f"artifact {name} differs"
        assert any(name.endswith(".manifest.json") for name in run_a)
