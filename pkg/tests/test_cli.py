import json
from pathlib import Path

import numpy as np
import pytest
import torch

from drumgen.cli import main, parse_config_file


@pytest.fixture(scope="module")
def small_artifacts(tmp_path_factory):
    """A quickly trained classifier + GAN checkpoint for CLI round trips."""
    root = tmp_path_factory.mktemp("cli")
    clf_path = root / "clf.ckpt"
    rc = main(
        [
            "train-classifier", "--per-class", "6", "--data-seed", "3", "--epochs", "2",
            "--seed", "0", "--out", str(clf_path),
        ]
    )
    assert rc == 0
    gan_dir = root / "gan"
    rc = main(
        [
            "train-gan", "--per-class", "6", "--data-seed", "3", "--classifier", str(clf_path),
            "--out-dir", str(gan_dir), "--stage-steps", "2,2,2,2,2,2,2", "--fade-steps", "0,1,1,1,1,1,1",
            "--stage-batch-sizes", "4,4,4,4,4,4,4", "--channels", "12,12,12,12,8,8,8",
            "--seed", "0", "--quiet",
        ]
    )
    assert rc == 0
    return {"classifier": clf_path, "gan": gan_dir / "gan_final.ckpt", "root": root}


class TestMakeData:
    def test_writes_class_folders(self, tmp_path):
        rc = main(["make-data", "--out", str(tmp_path / "d"), "--per-class", "5", "--seed", "1"])
        assert rc == 0
        for cls in ("kick", "snare", "cymbal"):
            assert len(list((tmp_path / "d" / cls).glob("*.wav"))) == 5

    def test_unknown_verb_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2

    def test_unknown_flag_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["make-data", "--out", "x", "--bogus"])
        assert exc.value.code == 2


class TestConfigFile:
    def test_values_parsed(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("per_class = 4\nseed = 9\n# comment\nout = ignored\n")
        parsed = parse_config_file(cfg)
        assert parsed["per_class"] == 4
        assert parsed["seed"] == 9

    def test_config_supplies_defaults_and_flags_override(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("per_class = 2\nseed = 5\n")
        out = tmp_path / "data"
        rc = main(["--config", str(cfg), "make-data", "--out", str(out)])
        assert rc == 0
        assert len(list((out / "kick").glob("*.wav"))) == 2

        out2 = tmp_path / "data2"
        rc = main(["--config", str(cfg), "make-data", "--out", str(out2), "--per-class", "3"])
        assert rc == 0
        assert len(list((out2 / "kick").glob("*.wav"))) == 3

    def test_bad_config_line_reported(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("this is not a key value line\n")
        with pytest.raises(ValueError, match="bad config line"):
            parse_config_file(cfg)


class TestGenerate:
    def test_deterministic_wav(self, small_artifacts, tmp_path):
        out_a = tmp_path / "a.wav"
        out_b = tmp_path / "b.wav"
        for out in (out_a, out_b):
            rc = main(["generate", "--gan", str(small_artifacts["gan"]), "--c", "1,0,0", "--seed", "5", "--out", str(out)])
            assert rc == 0
        assert out_a.read_bytes() == out_b.read_bytes()

    def test_c_renormalized(self, small_artifacts, tmp_path):
        rc = main(
            ["generate", "--gan", str(small_artifacts["gan"]), "--c", "2,1,1", "--seed", "1", "--out", str(tmp_path / "x.wav")]
        )
        assert rc == 0

    def test_missing_checkpoint_fails_cleanly(self, tmp_path):
        rc = main(["generate", "--gan", str(tmp_path / "no.ckpt"), "--out", str(tmp_path / "x.wav")])
        assert rc == 1


class TestEvaluateAndEncode:
    def test_evaluate_gan_writes_report(self, small_artifacts, tmp_path):
        report = tmp_path / "report.jsonl"
        rc = main(
            [
                "evaluate-gan", "--per-class", "8", "--data-seed", "3", "--gan", str(small_artifacts["gan"]),
                "--classifier", str(small_artifacts["classifier"]), "--n-fake", "24", "--out", str(report),
            ]
        )
        assert rc == 0
        records = [json.loads(line) for line in report.read_text().splitlines()]
        metrics = {r["metric"] for r in records}
        assert {"is_fake", "kid_real_fake", "fad_real_fake"} <= metrics

    def test_encode_roundtrip(self, small_artifacts, tmp_path):
        enc_dir = small_artifacts["root"] / "enc"
        rc = main(
            [
                "train-encoder", "--per-class", "6", "--data-seed", "3",
                "--gan", str(small_artifacts["gan"]), "--classifier", str(small_artifacts["classifier"]),
                "--out-dir", str(enc_dir), "--pairs", "16", "--param-only-steps", "2",
                "--full-loss-steps", "1", "--seed", "0", "--quiet",
            ]
        )
        assert rc == 0
        wav = tmp_path / "probe.wav"
        main(["generate", "--gan", str(small_artifacts["gan"]), "--c", "1,0,0", "--seed", "2", "--out", str(wav)])
        out_json = tmp_path / "enc.json"
        rc = main(
            [
                "encode", "--gan", str(small_artifacts["gan"]), "--encoder", str(enc_dir / "encoder_final.ckpt"),
                "--input", str(wav), "--out", str(out_json),
            ]
        )
        assert rc == 0
        result = json.loads(out_json.read_text())
        assert len(result["z"]) == 128
        assert abs(sum(result["c"]) - 1.0) < 1e-6
