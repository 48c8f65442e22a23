import json

import numpy as np
import pytest
import torch

from drumgen.classifier import ClassifierConfig, SoftLabelClassifier, train_classifier
from drumgen.dataset import SyntheticSpec, load_dataset
from drumgen.persist import CheckpointError, load_checkpoint, save_checkpoint
from drumgen.training import (
    GanTrainer,
    TrainConfig,
    TrainingDivergedError,
    dataset_soft_labels,
    dataset_spectrograms,
    load_generator,
    run_encoder_training,
)

TINY = dict(
    stage_steps=(6, 6, 6, 6, 6, 6, 6),
    fade_steps=(0, 4, 4, 4, 4, 4, 4),
    stage_batch_sizes=(4, 4, 4, 4, 4, 4, 4),
    channels=(12, 12, 12, 12, 8, 8, 8),
    checkpoint_every=100,
)


@pytest.fixture(scope="module")
def tiny_dataset():
    return load_dataset(SyntheticSpec(per_class=8, seed=2), split_seed=0)


@pytest.fixture(scope="module")
def tiny_classifier(tiny_dataset):
    clf, _ = train_classifier(tiny_dataset, ClassifierConfig(epochs=2, seed=0))
    return clf


@pytest.fixture(scope="module")
def tiny_world(tiny_dataset, tiny_classifier):
    specs = dataset_spectrograms(tiny_dataset)
    labels = dataset_soft_labels(tiny_classifier, tiny_dataset)
    return tiny_dataset, tiny_classifier, specs, labels


class TestCheckpoints:
    def test_save_load_generate_bit_identical(self, tiny_world, tmp_path):
        _, _, specs, labels = tiny_world
        cfg = TrainConfig(**TINY, seed=3, out_dir=str(tmp_path))
        trainer = GanTrainer(cfg, specs, labels)
        trainer.train(steps=4)
        z = torch.randn(2, 128, generator=torch.Generator().manual_seed(0))
        c = torch.full((2, 3), 1 / 3)
        trainer.generator.eval()
        with torch.no_grad():
            before = trainer.generator(z, c)
        trainer.save(tmp_path / "gan.ckpt")
        loaded, _ = load_generator(tmp_path / "gan.ckpt")
        with torch.no_grad():
            after = loaded(z, c)
        assert torch.equal(before, after)

    def test_truncated_file_is_corruption_error(self, tiny_world, tmp_path):
        _, _, specs, labels = tiny_world
        trainer = GanTrainer(TrainConfig(**TINY, seed=0, out_dir=str(tmp_path)), specs, labels)
        path = tmp_path / "trunc.ckpt"
        trainer.save(path)
        path.write_bytes(path.read_bytes()[: path.stat().st_size // 2])
        with pytest.raises(CheckpointError, match="corrupt"):
            load_generator(path)

    def test_kind_mismatch_is_type_error(self, tiny_classifier, tmp_path):
        tiny_classifier.save(tmp_path / "clf.ckpt")
        with pytest.raises(CheckpointError, match="kind mismatch"):
            load_generator(tmp_path / "clf.ckpt")

    def test_version_mismatch_rejected(self, tmp_path):
        torch.save({"magic": "drumgen-checkpoint", "version": 99, "kind": "gan", "payload": {}}, tmp_path / "v.ckpt")
        with pytest.raises(CheckpointError, match="version"):
            load_checkpoint(tmp_path / "v.ckpt", "gan")

    def test_foreign_file_rejected(self, tmp_path):
        torch.save({"something": "else"}, tmp_path / "f.ckpt")
        with pytest.raises(CheckpointError, match="not a drumgen checkpoint"):
            load_checkpoint(tmp_path / "f.ckpt", "gan")


class TestGanTraining:
    def test_smoke_run_nan_free_with_fades_and_nonnegative_gp(self, tiny_world, tmp_path):
        _, _, specs, labels = tiny_world
        cfg = TrainConfig(**TINY, seed=1, out_dir=str(tmp_path))
        trainer = GanTrainer(cfg, specs, labels)
        log = trainer.train(log_path=tmp_path / "log.jsonl")
        assert len(log) == sum(TINY["stage_steps"])
        assert all(np.isfinite(r["d_loss"]) and np.isfinite(r["g_loss"]) for r in log)
        assert all(r["gradient_penalty"] >= 0.0 for r in log)
        # stage never decreases
        stages = [r["stage"] for r in log]
        assert stages == sorted(stages)
        # exactly one fade phase (alpha < 1 run) per stage transition
        for stage in range(1, 7):
            alphas = [r["fade_alpha"] for r in log if r["stage"] == stage]
            assert alphas[0] < 1.0
            assert alphas == sorted(alphas)
        # log file persisted line-by-line
        lines = (tmp_path / "log.jsonl").read_text().splitlines()
        assert len(lines) == len(log)
        assert json.loads(lines[0])["step"] == 0

    def test_seeded_rerun_reproduces_log(self, tiny_world, tmp_path):
        _, _, specs, labels = tiny_world
        logs = []
        for run in range(2):
            cfg = TrainConfig(**TINY, seed=7, out_dir=str(tmp_path / str(run)))
            trainer = GanTrainer(cfg, specs, labels)
            logs.append(trainer.train(steps=10))
        assert [r["d_loss"] for r in logs[0]] == [r["d_loss"] for r in logs[1]]
        assert [r["g_loss"] for r in logs[0]] == [r["g_loss"] for r in logs[1]]

    def test_resume_reproduces_following_losses_exactly(self, tiny_world, tmp_path):
        _, _, specs, labels = tiny_world
        cfg = TrainConfig(**TINY, seed=5, out_dir=str(tmp_path))
        trainer = GanTrainer(cfg, specs, labels)
        trainer.train(steps=8)
        ckpt = tmp_path / "mid.ckpt"
        trainer.save(ckpt)
        continued = trainer.train(steps=12)[-12:]

        resumed = GanTrainer.resume(ckpt, specs, labels)
        assert resumed.global_step == 8
        replay = resumed.train(steps=12)
        assert [r["d_loss"] for r in continued] == [r["d_loss"] for r in replay]
        assert [r["g_loss"] for r in continued] == [r["g_loss"] for r in replay]

    def test_nan_abort_persists_last_good(self, tiny_world, tmp_path):
        _, _, specs, labels = tiny_world
        cfg = TrainConfig(**TINY, seed=2, out_dir=str(tmp_path))
        trainer = GanTrainer(cfg, specs, labels)
        trainer.train(steps=2)
        with torch.no_grad():
            for p in trainer.generator.parameters():
                p.mul_(float("nan"))
        with pytest.raises(TrainingDivergedError, match="non-finite"):
            trainer.step()
        assert (tmp_path / "abort_last_good.ckpt").exists()


class TestSoftLabelPlumbing:
    def test_labels_cached_and_reused(self, tiny_world, tmp_path):
        dataset, clf, _, _ = tiny_world
        cache = tmp_path / "labels.json"
        first = dataset_soft_labels(clf, dataset, cache)
        assert cache.exists()
        stamp = cache.stat().st_mtime_ns
        second = dataset_soft_labels(clf, dataset, cache)
        assert cache.stat().st_mtime_ns == stamp
        assert np.array_equal(first, second)

    def test_distilled_labels_reproducible(self, tiny_world):
        dataset, clf, _, _ = tiny_world
        a = dataset_soft_labels(clf, dataset)
        b = dataset_soft_labels(clf, dataset)
        assert np.array_equal(a, b)


class TestClassifierTraining:
    def test_train_loss_strictly_decreases_over_first_three_epochs(self, tiny_dataset):
        _, log = train_classifier(tiny_dataset, ClassifierConfig(epochs=3, seed=1))
        losses = log["train_loss"]
        assert losses[0] > losses[1] > losses[2]

    def test_same_seed_identical_weights(self, tiny_dataset):
        cfg = ClassifierConfig(epochs=2, seed=9)
        a, _ = train_classifier(tiny_dataset, cfg)
        b, _ = train_classifier(tiny_dataset, cfg)
        assert a.fingerprint == b.fingerprint

    def test_missing_class_rejected(self, tiny_dataset):
        from drumgen.dataset import LabeledDataset

        kicks = [(clip, lbl) for clip, lbl in tiny_dataset.items if lbl == "kick"]
        broken = LabeledDataset(kicks, list(range(len(kicks) - 1)), [len(kicks) - 1])
        with pytest.raises(ValueError, match="empty class"):
            train_classifier(broken, ClassifierConfig(epochs=1))

    def test_soft_labels_on_simplex_and_embedding_dim(self, tiny_world):
        dataset, clf, _, _ = tiny_world
        clip = dataset.items[0][0]
        probs = clf.predict_soft_labels(clip)
        assert abs(probs.sum() - 1.0) < 1e-6
        emb = clf.embed(clip)
        assert emb.shape == (clf.config.embedding_dim,)
        assert np.array_equal(emb, clf.embed(clip))

    def test_classifier_checkpoint_roundtrip(self, tiny_world, tmp_path):
        dataset, clf, _, _ = tiny_world
        clf.save(tmp_path / "clf.ckpt")
        back = SoftLabelClassifier.load(tmp_path / "clf.ckpt")
        assert back.fingerprint == clf.fingerprint
        clip = dataset.items[3][0]
        assert np.allclose(back.predict_soft_labels(clip), clf.predict_soft_labels(clip))

    def test_missing_checkpoint_errors(self, tmp_path):
        with pytest.raises(CheckpointError):
            SoftLabelClassifier.load(tmp_path / "missing.ckpt")


class TestEncoderOrchestration:
    def test_pairs_file_reused_when_hash_matches(self, tiny_world, tmp_path):
        dataset, clf, specs, labels = tiny_world
        cfg = TrainConfig(**TINY, seed=4, out_dir=str(tmp_path / "gan"))
        trainer = GanTrainer(cfg, specs, labels)
        trainer.train(steps=3)
        gan_ckpt = tmp_path / "gan" / "g.ckpt"
        trainer.save(gan_ckpt)

        from drumgen.encoder import EncoderTrainConfig

        clips = [clip for clip, _ in dataset.train_items]
        enc_cfg = EncoderTrainConfig(param_only_steps=3, full_loss_steps=1, heldout_fraction=0.2, seed=0)
        out = tmp_path / "enc"
        run_encoder_training(gan_ckpt, clf, clips, n_pairs=24, pairs_seed=1, cfg=enc_cfg, out_dir=out)
        pairs_file = out / "pairs_1_24.npy"
        assert pairs_file.exists()
        stamp = pairs_file.stat().st_mtime_ns
        run_encoder_training(gan_ckpt, clf, clips, n_pairs=24, pairs_seed=1, cfg=enc_cfg, out_dir=out)
        assert pairs_file.stat().st_mtime_ns == stamp  # reused, not regenerated
