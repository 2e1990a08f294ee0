import json
from pathlib import Path

import pytest

from chartcot.client import ClientConfig
from chartcot.errors import ConfigError, EmptyError
from chartcot.pipeline import (
    STAGES,
    DatasetManifest,
    PipelineConfig,
    compute_stats,
    emit_dataset,
    run,
    write_stats,
)
from chartcot.util import read_jsonl


def small_config(**overrides) -> PipelineConfig:
    base = dict(seed=23, n_charts=12, workers=2)
    base.update(overrides)
    return PipelineConfig(**base)


class TestConfig:
    def test_unknown_keys(self):
        with pytest.raises(ConfigError):
            PipelineConfig.from_json({"seed": 1, "shards": 4})

    def test_bad_fault_stage(self):
        with pytest.raises(ConfigError):
            PipelineConfig(fault_injection={"ocr": 0.5})

    def test_bad_probability(self):
        with pytest.raises(ConfigError):
            PipelineConfig(fault_injection={"render": 1.5})

    def test_nested_client(self):
        cfg = PipelineConfig.from_json({"client": {"mode": "stub", "stub_seed": 7}})
        assert cfg.client.stub_seed == 7

    def test_roundtrip(self):
        cfg = small_config(cap=3.24, fault_injection={"render": 0.1})
        assert PipelineConfig.from_json(cfg.to_json()).config_hash() == cfg.config_hash()


class TestFaultFreeRun:
    def test_all_charts_reach_qa(self, tmp_path):
        cfg = PipelineConfig(seed=2, n_charts=50, workers=2)
        manifest = run(cfg, out_dir=tmp_path)
        for report in manifest.stage_reports():
            assert report["attempted"] == 50
            assert report["passed"] == 50
        dataset = emit_dataset(manifest)
        lines = read_jsonl(dataset)
        assert lines            # non-empty
        assert (tmp_path / "manifest.json").exists()
        assert (tmp_path / "stage_reports.json").exists()

    def test_referenced_images_exist(self, tmp_path):
        cfg = small_config()
        manifest = run(cfg, out_dir=tmp_path)
        emit_dataset(manifest)
        records = read_jsonl(tmp_path / "dataset.jsonl")
        assert records
        for rec in records:
            assert (tmp_path / rec["image"]["file"]).exists(), rec["image"]

    def test_dataset_sorted(self, tmp_path):
        manifest = run(small_config(), out_dir=tmp_path)
        emit_dataset(manifest)
        records = read_jsonl(tmp_path / "dataset.jsonl")
        keys = [(r["chart_id"], r["kind"]) for r in records]
        assert keys == sorted(keys)

    def test_reemit_identical(self, tmp_path):
        manifest = run(small_config(), out_dir=tmp_path)
        emit_dataset(manifest)
        first = (tmp_path / "dataset.jsonl").read_bytes()
        emit_dataset(manifest)
        assert (tmp_path / "dataset.jsonl").read_bytes() == first


class TestAccounting:
    def test_gate_identity_and_monotonicity(self):
        cfg = PipelineConfig(
            seed=5, n_charts=300, workers=2,
            fault_injection={"cot": 0.1, "code": 0.2, "render": 0.3, "detect": 0.2},
        )
        manifest = run(cfg)
        reports = manifest.stage_reports()
        for prev, cur in zip(reports, reports[1:]):
            assert cur["attempted"] == prev["passed"]
        passed_sets = [
            {c.id for c in manifest.charts if c.passed(stage)} for stage in STAGES
        ]
        for earlier, later in zip(passed_sets, passed_sets[1:]):
            assert later <= earlier

    def test_failures_only_injected(self):
        cfg = PipelineConfig(seed=5, n_charts=150, workers=2, fault_injection={"render": 0.5})
        manifest = run(cfg)
        for c in manifest.charts:
            for status in c.stages.values():
                assert status in ("pass", "fail:injected")

    def test_worker_count_never_changes_outcomes(self):
        cfg1 = PipelineConfig(seed=5, n_charts=60, workers=1, fault_injection={"render": 0.4})
        cfg8 = PipelineConfig(seed=5, n_charts=60, workers=8, fault_injection={"render": 0.4})
        m1, m8 = run(cfg1), run(cfg8)
        assert m1.digest() == m8.digest()


class TestResume:
    def test_stage_by_stage_equals_straight_run(self, tmp_path):
        cfg = small_config()
        staged_dir = tmp_path / "staged"
        straight_dir = tmp_path / "straight"
        for stage in STAGES:
            run(cfg, out_dir=staged_dir, stop_after=stage)
        staged = run(cfg, out_dir=staged_dir)
        emit_dataset(staged)
        straight = run(cfg, out_dir=straight_dir)
        emit_dataset(straight)
        assert staged.digest() == straight.digest()
        assert (staged_dir / "dataset.jsonl").read_bytes() == (straight_dir / "dataset.jsonl").read_bytes()

    def test_resume_skips_completed_charts(self, tmp_path):
        cfg = small_config(client=ClientConfig(mode="stub"))
        run(cfg, out_dir=tmp_path)
        before = {p: p.stat().st_mtime_ns for p in (tmp_path / "renders").iterdir()}
        run(cfg, out_dir=tmp_path)  # nothing left to do
        after = {p: p.stat().st_mtime_ns for p in (tmp_path / "renders").iterdir()}
        assert before == after

    def test_config_mismatch_rejected(self, tmp_path):
        run(small_config(), out_dir=tmp_path)
        with pytest.raises(ConfigError, match="different config"):
            run(small_config(seed=99), out_dir=tmp_path)

    def test_only_stage_requires_previous(self, tmp_path):
        cfg = small_config()
        manifest = run(cfg, out_dir=tmp_path, only_stage="cot")
        # meta never ran, so cot is never attempted
        assert all("cot" not in c.stages for c in manifest.charts)
        run(cfg, out_dir=tmp_path, stop_after="meta")
        manifest = run(cfg, out_dir=tmp_path, only_stage="cot")
        assert all(c.passed("cot") for c in manifest.charts)

    def test_unknown_stage(self):
        with pytest.raises(ConfigError):
            run(small_config(), stop_after="ocr")

    def test_passed_stage_has_artifacts_on_disk(self, tmp_path):
        cfg = small_config()
        manifest = run(cfg, out_dir=tmp_path, stop_after="render")
        for c in manifest.charts:
            assert (tmp_path / f"specs/{c.id}.json").exists()
            if c.passed("cot"):
                assert (tmp_path / f"cot/{c.id}.json").exists()
            if c.passed("render"):
                assert (tmp_path / f"renders/{c.id}.svg").exists()
                assert (tmp_path / f"renders/{c.id}.ppm").exists()


class TestStats:
    def test_histogram_totals_match_passed(self):
        manifest = run(PipelineConfig(seed=6, n_charts=40, workers=2))
        stats = compute_stats(manifest)
        n = stats["passed_charts"]
        for key in ("grounding", "reasoning", "total"):
            assert sum(stats["step_histograms"][key].values()) == n
        assert stats["total_step_mode"] in (3, 4, 5)
        assert abs(sum(stats["chart_type_distribution"].values()) - 1.0) < 1e-9

    def test_single_chart(self):
        manifest = run(PipelineConfig(seed=6, n_charts=1, type_mix={"bar": 1.0}))
        stats = compute_stats(manifest)
        assert stats["passed_charts"] == 1
        assert list(stats["step_histograms"]["total"].values()) == [1]

    def test_empty_raises(self):
        manifest = run(PipelineConfig(seed=6, n_charts=5, fault_injection={"cot": 1.0}))
        with pytest.raises(EmptyError):
            compute_stats(manifest)

    def test_stats_recount_matches_cot_files(self, tmp_path):
        manifest = run(small_config(), out_dir=tmp_path)
        stats = compute_stats(manifest)
        from chartcot.cot import validate_cot
        totals = {}
        for path in sorted((tmp_path / "cot").glob("*.json")):
            sample = validate_cot(path.read_text(encoding="utf-8"))
            totals[len(sample.steps)] = totals.get(len(sample.steps), 0) + 1
        assert {int(k): v for k, v in stats["step_histograms"]["total"].items()} == totals


class TestEmitEdgeCases:
    def test_empty_passed_set(self, tmp_path):
        cfg = PipelineConfig(seed=4, n_charts=5, fault_injection={"cot": 1.0})
        manifest = run(cfg, out_dir=tmp_path)
        dataset = emit_dataset(manifest)
        assert dataset.read_text(encoding="utf-8") == ""
        reports = json.loads((tmp_path / "stage_reports.json").read_text())
        assert [r["stage"] for r in reports] == list(STAGES)

    def test_emit_requires_directory(self):
        manifest = run(PipelineConfig(seed=4, n_charts=2))
        with pytest.raises(ConfigError):
            emit_dataset(manifest)

    def test_manifest_load_roundtrip(self, tmp_path):
        manifest = run(small_config(), out_dir=tmp_path)
        write_stats(manifest)
        loaded = DatasetManifest.load(tmp_path / "manifest.json")
        assert loaded.digest() == manifest.digest()
        assert Path(tmp_path / "stats.json").exists()
