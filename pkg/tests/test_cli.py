import json
import re
from pathlib import Path

import pytest

from chartcot.cli import main
from chartcot.pipeline import DatasetManifest, PipelineConfig
from chartcot.util import read_jsonl


def write_config(tmp_path: Path, **overrides) -> Path:
    obj = {"seed": 12, "n_charts": 10, **overrides}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(obj), encoding="utf-8")
    return path


class TestBuild:
    def test_build_happy_path(self, tmp_path, capsys):
        cfg = write_config(tmp_path, n_charts=50)
        out = tmp_path / "run1"
        assert main(["build", "--config", str(cfg), "--out", str(out)]) == 0
        assert (out / "dataset.jsonl").exists()
        assert (out / "manifest.json").exists()
        assert (out / "stats.json").exists()
        stdout = capsys.readouterr().out
        assert "qa: 50/50" in stdout.replace("  ", " ")

    def test_seed_override_changes_output(self, tmp_path):
        cfg = write_config(tmp_path, n_charts=4)
        main(["build", "--config", str(cfg), "--out", str(tmp_path / "a")])
        main(["build", "--config", str(cfg), "--out", str(tmp_path / "b"), "--seed", "99"])
        a = (tmp_path / "a/dataset.jsonl").read_bytes()
        b = (tmp_path / "b/dataset.jsonl").read_bytes()
        assert a != b

    def test_stage_commands_chain(self, tmp_path, capsys):
        cfg = write_config(tmp_path, n_charts=6)
        out = tmp_path / "run"
        for command in ("gen", "cot", "edit", "render", "detect"):
            assert main([command, "--config", str(cfg), "--out", str(out)]) == 0
        manifest = DatasetManifest.load(out / "manifest.json")
        assert all(c.passed("detect") for c in manifest.charts)
        assert main(["build", "--config", str(cfg), "--out", str(out)]) == 0
        assert (out / "dataset.jsonl").exists()

    def test_stats_command(self, tmp_path, capsys):
        cfg = write_config(tmp_path, n_charts=6)
        out = tmp_path / "run"
        main(["build", "--config", str(cfg), "--out", str(out)])
        assert main(["stats", "--out", str(out)]) == 0
        assert "step_histograms" in capsys.readouterr().out


class TestUsageErrors:
    def test_unknown_flag_exits_2(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["detect", "--unknown-flag", "--out", str(tmp_path / "x")])
        assert exc.value.code == 2
        assert not (tmp_path / "x").exists()

    def test_no_arguments_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2

    def test_version(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0
        assert "chartcot" in capsys.readouterr().out

    def test_domain_error_exits_1(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"seed": 1, "bogus_key": True}), encoding="utf-8")
        code = main(["build", "--config", str(bad), "--out", str(tmp_path / "x")])
        assert code == 1
        assert "error" in capsys.readouterr().err
        assert not (tmp_path / "x").exists()

    def test_unparsable_config_exits_1(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{oops", encoding="utf-8")
        assert main(["build", "--config", str(bad), "--out", str(tmp_path / "x")]) == 1
        assert "not valid JSON" in capsys.readouterr().err
        assert not (tmp_path / "x").exists()


class TestEvalCommand:
    def test_eval_writes_report(self, tmp_path, capsys):
        gold = tmp_path / "gold.jsonl"
        pred = tmp_path / "pred.jsonl"
        gold.write_text(
            "\n".join(
                json.dumps(o)
                for o in (
                    {"sample_id": "s1", "answer": 100.0, "group": "human"},
                    {"sample_id": "s2", "answer": 50.0, "group": "aug"},
                )
            ),
            encoding="utf-8",
        )
        pred.write_text(
            "\n".join(
                json.dumps(o)
                for o in (
                    {"sample_id": "s1", "raw_text": "\\box{104}"},
                    {"sample_id": "s2", "raw_text": "\\box{80}"},
                )
            ),
            encoding="utf-8",
        )
        code = main([
            "eval", "--gold", str(gold), "--pred", str(pred),
            "--margins", "0.05,0.1,0.2", "--mode", "match", "--out", str(tmp_path),
        ])
        assert code == 0
        report = json.loads((tmp_path / "eval_report.json").read_text())
        assert report["cells"]["0.05"]["human"]["correct"] == 1
        assert report["cells"]["0.05"]["aug"]["correct"] == 0
        stdout = capsys.readouterr().out
        assert "Avg." in stdout and "ALL" in stdout

    def test_eval_missing_gold_is_domain_error(self, tmp_path, capsys):
        gold = tmp_path / "gold.jsonl"
        pred = tmp_path / "pred.jsonl"
        gold.write_text("", encoding="utf-8")
        pred.write_text(json.dumps({"sample_id": "s1", "raw_text": "\\box{1}"}), encoding="utf-8")
        assert main(["eval", "--gold", str(gold), "--pred", str(pred)]) == 1
        assert "error" in capsys.readouterr().err


def _links(html_text: str) -> list[str]:
    return re.findall(r'(?:href|src)="([^"]+)"', html_text)


class TestGallery:
    def test_pages_and_links_resolve(self, tmp_path):
        cfg = write_config(tmp_path, n_charts=10)
        out = tmp_path / "run"
        main(["build", "--config", str(cfg), "--out", str(out)])
        assert main(["gallery", "--out", str(out)]) == 0
        index = out / "gallery/index.html"
        assert index.exists()
        pages = list((out / "gallery/charts").glob("*.html"))
        assert len(pages) == 10
        for page in [index, *pages]:
            for link in _links(page.read_text(encoding="utf-8")):
                target = (page.parent / link).resolve()
                assert target.exists(), f"{page.name} -> {link}"

    def test_three_grounding_steps_show_three_renders(self, tmp_path):
        cfg = write_config(tmp_path, n_charts=10)
        out = tmp_path / "run"
        main(["build", "--config", str(cfg), "--out", str(out)])
        main(["gallery", "--out", str(out)])
        manifest = DatasetManifest.load(out / "manifest.json")
        rich = [c for c in manifest.charts if c.steps and c.steps["grounding"] == 3]
        assert rich, "corpus should include a 3-grounding-step chart"
        page = (out / f"gallery/charts/{rich[0].id}.html").read_text(encoding="utf-8")
        assert page.count("annotated/") == 3

    def test_empty_manifest_states_zero(self, tmp_path):
        manifest = DatasetManifest(config=PipelineConfig(), charts=[], out_dir=tmp_path)
        from chartcot.gallery import build_gallery
        index = build_gallery(manifest)
        assert "Zero samples" in index.read_text(encoding="utf-8")


def test_dataset_record_schema(tmp_path):
    cfg = write_config(tmp_path, n_charts=4)
    out = tmp_path / "run"
    main(["build", "--config", str(cfg), "--out", str(out)])
    for rec in read_jsonl(out / "dataset.jsonl"):
        assert set(rec) == {"kind", "chart_id", "image", "prompt", "ground_truth"}
        assert set(rec["image"]) == {"variant", "file"}
        assert isinstance(rec["prompt"], list)
