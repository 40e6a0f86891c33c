"""CLI subcommands against a small fixture bundle."""
import json

import pytest

from qseek.cli import main


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli-bundle")
    overrides = out / "gen.json"
    overrides.write_text(
        json.dumps(
            {
                "train_interviews": 2,
                "dev_interviews": 1,
                "test_interviews": 1,
                "segments_per_interview": 4,
            }
        )
    )
    assert main(["prepare", "--out", str(out / "fx"), "--seed", "3", "--config", str(overrides)]) == 0
    return out / "fx"


@pytest.fixture(scope="module")
def trained_dir(data_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("cli-train")
    cfg = out / "cfg.json"
    cfg.write_text(json.dumps({"epochs": 2, "eval_dev": False}))
    code = main(
        ["train", "--data", str(data_dir), "--out", str(out), "--config", str(cfg), "--seed", "3"]
    )
    assert code == 0
    return out


class TestPrepare:
    def test_bundle_layout(self, data_dir):
        assert (data_dir / "questionnaire.jsonl").is_file()
        assert (data_dir / "truth.json").is_file()
        assert (data_dir / "caches" / "features.cache").is_file()
        assert len(list((data_dir / "interviews").glob("*.json"))) == 4


class TestTrain:
    def test_outputs(self, trained_dir):
        assert (trained_dir / "last.ckpt").is_file()
        assert (trained_dir / "best.ckpt").is_file()
        log_lines = (trained_dir / "trainlog.jsonl").read_text().strip().splitlines()
        assert len(log_lines) == 2
        entry = json.loads(log_lines[0])
        assert set(entry) == {
            "epoch", "mean_loss", "lr", "dev_r1", "dev_r5", "dev_r10", "dev_ravg", "wall_s",
        }

    def test_bad_config_key_fails(self, data_dir, tmp_path):
        cfg = tmp_path / "bad.json"
        cfg.write_text('{"epochz": 1}')
        assert main(["train", "--data", str(data_dir), "--out", str(tmp_path), "--config", str(cfg)]) == 1

    def test_same_seed_identical_checkpoints(self, data_dir, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"epochs": 1, "eval_dev": False}))
        blobs = []
        for run in range(2):
            out = tmp_path / f"run{run}"
            assert main(
                ["train", "--data", str(data_dir), "--out", str(out), "--config", str(cfg), "--seed", "7"]
            ) == 0
            blobs.append((out / "last.ckpt").read_bytes())
        assert blobs[0] == blobs[1]


class TestEval:
    def test_no_train_report(self, data_dir, tmp_path):
        report_path = tmp_path / "report.json"
        code = main(
            [
                "eval", "--data", str(data_dir), "--split", "test",
                "--variant", "no-train", "--transcripts", "para",
                "--w", "14", "--out", str(report_path),
            ]
        )
        assert code == 0
        report = json.loads(report_path.read_text())
        assert set(report) == {"per_interview", "mean", "excluded_questions"}
        assert set(report["mean"]) == {"r1", "r5", "r10", "ravg"}

    def test_trained_eval(self, data_dir, trained_dir, tmp_path):
        report_path = tmp_path / "report.json"
        code = main(
            [
                "eval", "--data", str(data_dir), "--split", "dev", "--variant", "indent",
                "--checkpoint", str(trained_dir / "last.ckpt"), "--out", str(report_path),
            ]
        )
        assert code == 0
        assert 0.0 <= json.loads(report_path.read_text())["mean"]["ravg"] <= 1.0

    def test_checkpoint_required(self, data_dir):
        assert main(["eval", "--data", str(data_dir), "--variant", "indent"]) == 1


class TestIndexAndQuery:
    def test_index_then_query(self, data_dir, trained_dir, tmp_path, capsys):
        idx_dir = tmp_path / "idx"
        code = main(
            [
                "index", "--data", str(data_dir), "--checkpoint", str(trained_dir / "last.ckpt"),
                "--out", str(idx_dir), "--split", "test",
            ]
        )
        assert code == 0
        indices = list(idx_dir.glob("*.idx"))
        assert len(indices) == 1
        interview = indices[0].stem

        bundle_q = json.loads(
            (data_dir / "truth.json").read_text()
        )["interviews"][interview]["owners"][0]
        code = main(
            [
                "query", "--data", str(data_dir), "--indices", str(idx_dir),
                "--interview", interview, "--question-id", bundle_q, "-k", "3",
            ]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert out.count("score") == 3

    def test_free_text_query(self, data_dir, trained_dir, tmp_path, capsys):
        idx_dir = tmp_path / "idx"
        main(
            [
                "index", "--data", str(data_dir), "--checkpoint", str(trained_dir / "last.ckpt"),
                "--out", str(idx_dir), "--split", "test",
            ]
        )
        interview = next(idx_dir.glob("*.idx")).stem
        text = json.loads(
            (data_dir / "questionnaire.jsonl").read_text().splitlines()[0]
        )["text"]
        code = main(
            [
                "query", "--data", str(data_dir), "--indices", str(idx_dir),
                "--interview", interview, "--text", text, "-k", "5",
            ]
        )
        assert code == 0
        assert capsys.readouterr().out.count("score") == 5

    def test_unknown_question(self, data_dir, trained_dir, tmp_path):
        idx_dir = tmp_path / "idx"
        main(
            [
                "index", "--data", str(data_dir), "--checkpoint", str(trained_dir / "last.ckpt"),
                "--out", str(idx_dir), "--split", "test",
            ]
        )
        interview = next(idx_dir.glob("*.idx")).stem
        code = main(
            [
                "query", "--data", str(data_dir), "--indices", str(idx_dir),
                "--interview", interview, "--question-id", "zzz", "-k", "3",
            ]
        )
        assert code == 1


class TestUsage:
    def test_unknown_flag_exits_2(self, data_dir):
        with pytest.raises(SystemExit) as exc:
            main(["eval", "--data", str(data_dir), "--wat"])
        assert exc.value.code == 2

    def test_unknown_variant_exits_2(self, data_dir):
        with pytest.raises(SystemExit) as exc:
            main(["eval", "--data", str(data_dir), "--variant", "magic"])
        assert exc.value.code == 2
