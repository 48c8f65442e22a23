"""Training orchestration: classifier -> GAN -> encoder, with checkpoints.

The GAN loop owns all randomness through explicit generators whose states are
serialized into checkpoints, so a resumed run continues bit-identically.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch.nn import functional as F

from .audio import AudioClip
from .classifier import SoftLabelClassifier, clip_id, distill_soft_labels, load_soft_label_cache, save_soft_label_cache
from .dataset import LabeledDataset
from .encoder import (
    EncoderNet,
    EncoderPairs,
    EncoderTrainConfig,
    build_encoder_training_set,
    load_pairs,
    save_pairs,
    train_encoder,
)
from .gan import (
    DEFAULT_CHANNELS,
    DEFAULT_RESOLUTIONS,
    CriticNet,
    GeneratorNet,
    GrowthPlan,
    GrowthState,
    ResolutionSchedule,
    advance_growth,
    aux_condition_loss,
    gradient_penalty,
    resize_to_stage,
    sample_latent,
)
from .persist import fingerprint_state, load_checkpoint, save_checkpoint
from . import spectral
from .audio import CLIP_SAMPLES
from .spectral import FRAME_HOP, N_BINS, N_FRAMES, PAD, SPEC_SCALE, WINDOW_SIZE, forward_stft


class TrainingDivergedError(RuntimeError):
    """A loss went non-finite; the last good checkpoint was persisted."""


_WINDOW_T = torch.from_numpy(spectral.WINDOW.copy()).float()
_OLA_T = torch.from_numpy(np.maximum(spectral._OLA_WEIGHT, 1e-12).copy()).float()


def wola_consistency_project(spec: torch.Tensor) -> torch.Tensor:
    """Differentiable STFT(iSTFT(.)): projects (B, 2, 1024, 48) spectrograms
    onto the subspace of realizable STFTs, mirroring the audio render path.

    Both transforms are linear, so gradients flow exactly; guidance computed
    after this projection matches what the renderer actually produces.
    """
    b = spec.shape[0]
    full = torch.zeros(b, N_FRAMES, N_BINS + 1, dtype=torch.complex64)
    full[:, :, :N_BINS] = torch.complex(spec[:, 0], spec[:, 1]).permute(0, 2, 1) * SPEC_SCALE
    frames = torch.fft.irfft(full, n=WINDOW_SIZE, dim=2) * _WINDOW_T
    # overlap-add via fold over a 1-row image
    padded_len = _OLA_T.shape[0]
    acc = F.fold(
        frames.permute(0, 2, 1),
        output_size=(1, padded_len),
        kernel_size=(1, WINDOW_SIZE),
        stride=(1, FRAME_HOP),
    )[:, 0, 0]
    x = (acc / _OLA_T)[:, PAD : PAD + CLIP_SAMPLES]
    # re-analyze: reflect pad, frame, window, rfft, drop Nyquist
    x = F.pad(x[:, None], (PAD, PAD), mode="reflect")[:, 0]
    frames = x.unfold(1, WINDOW_SIZE, FRAME_HOP) * _WINDOW_T
    spec_c = torch.fft.rfft(frames, dim=2)[:, :, :N_BINS].permute(0, 2, 1) / SPEC_SCALE
    return torch.stack([spec_c.real, spec_c.imag], dim=1)


@dataclass
class TrainConfig:
    stage_steps: tuple[int, ...] = (400, 400, 300, 300, 250, 200, 150)
    fade_steps: tuple[int, ...] = (0, 200, 150, 150, 125, 100, 75)
    stage_batch_sizes: tuple[int, ...] = (16, 16, 16, 16, 12, 8, 6)
    resolutions: tuple[tuple[int, int], ...] = DEFAULT_RESOLUTIONS
    channels: tuple[int, ...] = DEFAULT_CHANNELS
    lr: float = 2e-4
    adam_betas: tuple[float, float] = (0.5, 0.9)
    gp_weight: float = 10.0
    aux_weight: float = 10.0
    class_guidance_weight: float = 10.0
    seed: int = 0
    checkpoint_every: int = 500
    out_dir: str = "runs/gan"

    def __post_init__(self):
        n = len(self.resolutions)
        if not (len(self.stage_steps) == len(self.fade_steps) == len(self.stage_batch_sizes) == len(self.channels) == n):
            raise ValueError("per-stage settings must match the schedule length")
        if any(b <= 0 for b in self.stage_batch_sizes):
            raise ValueError("batch sizes must be positive")

    def schedule(self) -> ResolutionSchedule:
        return ResolutionSchedule(tuple(tuple(s) for s in self.resolutions))

    def plan(self) -> GrowthPlan:
        return GrowthPlan(tuple(self.stage_steps), tuple(self.fade_steps))


def dataset_spectrograms(dataset: LabeledDataset) -> torch.Tensor:
    """Full-resolution complex spectrograms of every item, float32."""
    specs = [forward_stft(clip).data for clip, _ in dataset.items]
    return torch.from_numpy(np.stack(specs).astype(np.float32))


def dataset_soft_labels(
    classifier: SoftLabelClassifier, dataset: LabeledDataset, cache_path: str | Path | None = None
) -> np.ndarray:
    """Distilled per-item soft labels, optionally cached on disk by clip id."""
    if cache_path is not None and Path(cache_path).exists():
        fp, labels = load_soft_label_cache(cache_path)
        if fp == classifier.fingerprint:
            try:
                return np.array([labels[clip_id(clip)] for clip, _ in dataset.items], dtype=np.float32)
            except KeyError:
                pass  # cache is for a different dataset; recompute
    labels = distill_soft_labels(classifier, dataset)
    if cache_path is not None:
        save_soft_label_cache(cache_path, classifier, labels)
    return np.array([labels[clip_id(clip)] for clip, _ in dataset.items], dtype=np.float32)


def _fade_real(real: torch.Tensor, factor: tuple[int, int], alpha: float) -> torch.Tensor:
    """Blend stage-resolution real data with its down-up-sampled version during fade."""
    if alpha >= 1.0:
        return real
    low = F.avg_pool2d(real, factor)
    return (1.0 - alpha) * F.interpolate(low, scale_factor=factor, mode="nearest") + alpha * real


class GanTrainer:
    """Single-controller WGAN-GP training with progressive growing.

    When a classifier is supplied, the generator objective carries an extra
    distillation term: the frozen classifier's soft labels for the generated
    spectrogram must match the input condition.
    """

    def __init__(
        self,
        cfg: TrainConfig,
        spectrograms: torch.Tensor,
        soft_labels: np.ndarray,
        classifier: SoftLabelClassifier | None = None,
    ):
        if len(spectrograms) != len(soft_labels):
            raise ValueError("one soft label per spectrogram required")
        self.cfg = cfg
        self.schedule = cfg.schedule()
        self.plan = cfg.plan()
        self.spectrograms = spectrograms
        self.soft_labels = torch.from_numpy(np.asarray(soft_labels, dtype=np.float32))
        self.classifier = classifier
        if classifier is not None:
            for p in classifier.net.parameters():
                p.requires_grad_(False)

        torch.manual_seed(cfg.seed)
        self.generator = GeneratorNet(self.schedule, cfg.channels)
        self.critic = CriticNet(self.schedule, cfg.channels)
        self.opt_g = torch.optim.Adam(self.generator.parameters(), lr=cfg.lr, betas=cfg.adam_betas)
        self.opt_d = torch.optim.Adam(self.critic.parameters(), lr=cfg.lr, betas=cfg.adam_betas)
        self.torch_rng = torch.Generator().manual_seed(cfg.seed + 1)
        self.np_rng = np.random.default_rng(cfg.seed + 2)
        self.global_step = 0
        self.log_records: list[dict] = []

    # -- persistence ---------------------------------------------------

    def save(self, path: str | Path) -> None:
        payload = {
            "config": asdict(self.cfg),
            "g_state": self.generator.state_dict(),
            "d_state": self.critic.state_dict(),
            "opt_g": self.opt_g.state_dict(),
            "opt_d": self.opt_d.state_dict(),
            "global_step": self.global_step,
            "torch_rng": self.torch_rng.get_state(),
            "np_rng": self.np_rng.bit_generator.state,
            "fingerprint": fingerprint_state(self.generator.state_dict()),
        }
        save_checkpoint(path, "gan", payload)

    @classmethod
    def resume(
        cls,
        path: str | Path,
        spectrograms: torch.Tensor,
        soft_labels: np.ndarray,
        classifier: SoftLabelClassifier | None = None,
    ) -> "GanTrainer":
        payload = load_checkpoint(path, "gan")
        cfg = train_config_from_dict(payload["config"])
        trainer = cls(cfg, spectrograms, soft_labels, classifier=classifier)
        trainer.generator.load_state_dict(payload["g_state"])
        trainer.critic.load_state_dict(payload["d_state"])
        trainer.opt_g.load_state_dict(payload["opt_g"])
        trainer.opt_d.load_state_dict(payload["opt_d"])
        trainer.global_step = payload["global_step"]
        trainer.torch_rng.set_state(payload["torch_rng"])
        trainer.np_rng.bit_generator.state = payload["np_rng"]
        return trainer

    # -- training ------------------------------------------------------

    def growth(self) -> GrowthState:
        return advance_growth(self.plan, self.plan.fresh_state(), self.global_step)

    def _sample_conditions(self, n: int) -> torch.Tensor:
        picks = self.np_rng.integers(0, len(self.soft_labels), size=n)
        return self.soft_labels[picks]

    def step(self) -> dict:
        """One critic update followed by one generator update."""
        state = self.growth()
        stage, alpha = state.stage_index, state.fade_alpha
        batch = self.cfg.stage_batch_sizes[stage]

        idx = self.np_rng.integers(0, len(self.spectrograms), size=batch)
        real = resize_to_stage(self.spectrograms[idx], self.schedule, stage)
        if stage > 0:
            real = _fade_real(real, self.schedule.factor(stage), alpha)
        c_real = self.soft_labels[idx]

        # critic update; the aux head fits real data only, so its prediction
        # keeps tracking class signatures even while G still ignores c
        z = sample_latent(batch, generator=self.torch_rng)
        c_fake = self._sample_conditions(batch)
        fake = self.generator(z, c_fake, stage, alpha).detach()
        d_real = self.critic(real, stage, alpha)
        d_fake = self.critic(fake, stage, alpha)
        gp = gradient_penalty(lambda x: self.critic(x, stage, alpha).score, real, fake, self.torch_rng)
        aux_d = aux_condition_loss(d_real.c_hat, c_real)
        d_loss = d_fake.score.mean() - d_real.score.mean() + self.cfg.gp_weight * gp + self.cfg.aux_weight * aux_d
        self._check_finite({"d_loss": d_loss, "gradient_penalty": gp})
        self.opt_d.zero_grad()
        d_loss.backward()
        self.opt_d.step()

        # generator update
        z = sample_latent(batch, generator=self.torch_rng)
        c_gen = self._sample_conditions(batch)
        fake_g = self.generator(z, c_gen, stage, alpha)
        out = self.critic(fake_g, stage, alpha)
        aux_g = aux_condition_loss(out.c_hat, c_gen)
        g_loss = -out.score.mean() + self.cfg.aux_weight * aux_g
        guidance = None
        if self.classifier is not None and self.cfg.class_guidance_weight > 0:
            full = fake_g if tuple(fake_g.shape[-2:]) == tuple(self.schedule.stages[-1]) else F.interpolate(
                fake_g, size=tuple(self.schedule.stages[-1]), mode="nearest"
            )
            logits = self.classifier.class_logits_from_spec(wola_consistency_project(full))
            # soft-target cross-entropy: gradient (softmax - c) survives saturation
            guidance = -(c_gen * F.log_softmax(logits, dim=1)).sum(dim=1).mean()
            g_loss = g_loss + self.cfg.class_guidance_weight * guidance
        self._check_finite({"g_loss": g_loss})
        self.opt_g.zero_grad()
        g_loss.backward()
        self.opt_g.step()

        record = {
            "step": self.global_step,
            "stage": stage,
            "fade_alpha": round(alpha, 6),
            "d_loss": d_loss.item(),
            "g_loss": g_loss.item(),
            "gradient_penalty": gp.item(),
            "aux_d": aux_d.item(),
            "aux_g": aux_g.item(),
            "class_guidance": guidance.item() if guidance is not None else None,
        }
        self.global_step += 1
        self.log_records.append(record)
        return record

    def _check_finite(self, losses: dict[str, torch.Tensor]) -> None:
        bad = {k: v.item() for k, v in losses.items() if not torch.isfinite(v)}
        if bad:
            abort_path = Path(self.cfg.out_dir) / "abort_last_good.ckpt"
            self.save(abort_path)
            raise TrainingDivergedError(
                f"non-finite losses {bad} at step {self.global_step}; last good state saved to {abort_path}"
            )

    def train(self, steps: int | None = None, log_path: str | Path | None = None, progress: bool = False) -> list[dict]:
        """Run up to `steps` (default: the rest of the plan), checkpointing on cadence."""
        out_dir = Path(self.cfg.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        total = self.plan.total_steps()
        target = total if steps is None else min(total, self.global_step + steps)
        log_fh = open(log_path, "a") if log_path else None
        started = time.time()
        done_here = 0
        try:
            while self.global_step < target:
                record = self.step()
                done_here += 1
                if log_fh:
                    log_fh.write(json.dumps(record) + "\n")
                if progress and record["step"] % 25 == 0:
                    rate = done_here / max(time.time() - started, 1e-9)
                    print(
                        f"[gan] step {record['step'] + 1}/{total} stage {record['stage']} "
                        f"alpha {record['fade_alpha']:.2f} d {record['d_loss']:.3f} g {record['g_loss']:.3f} "
                        f"({rate:.2f} it/s)",
                        flush=True,
                    )
                if self.global_step % self.cfg.checkpoint_every == 0 or self.global_step == total:
                    self.save(out_dir / "gan_latest.ckpt")
        finally:
            if log_fh:
                log_fh.close()
        return self.log_records


def train_config_from_dict(blob: dict) -> TrainConfig:
    blob = dict(blob)
    for key in ("stage_steps", "fade_steps", "stage_batch_sizes", "channels", "adam_betas"):
        if key in blob:
            blob[key] = tuple(blob[key])
    if "resolutions" in blob:
        blob["resolutions"] = tuple(tuple(r) for r in blob["resolutions"])
    return TrainConfig(**blob)


def load_generator(path: str | Path) -> tuple[GeneratorNet, dict]:
    """Inference-ready generator from a GAN checkpoint."""
    payload = load_checkpoint(path, "gan")
    cfg = train_config_from_dict(payload["config"])
    net = GeneratorNet(cfg.schedule(), cfg.channels)
    net.load_state_dict(payload["g_state"])
    net.eval()
    return net, payload


def run_gan_training(
    cfg: TrainConfig,
    dataset: LabeledDataset,
    classifier: SoftLabelClassifier,
    resume_from: str | Path | None = None,
    progress: bool = False,
) -> tuple[Path, list[dict]]:
    """Full GAN phase: distill soft labels, train per plan, save the final checkpoint."""
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    labels = dataset_soft_labels(classifier, dataset, out_dir / "soft_labels.json")
    specs = dataset_spectrograms(dataset)
    if resume_from:
        trainer = GanTrainer.resume(resume_from, specs, labels, classifier=classifier)
    else:
        trainer = GanTrainer(cfg, specs, labels, classifier=classifier)
    log = trainer.train(log_path=out_dir / "gan_log.jsonl", progress=progress)
    final = out_dir / "gan_final.ckpt"
    trainer.save(final)
    return final, log


def run_encoder_training(
    gan_ckpt: str | Path,
    classifier: SoftLabelClassifier,
    real_clips: list[AudioClip],
    n_pairs: int = 10000,
    pairs_seed: int = 0,
    cfg: EncoderTrainConfig | None = None,
    out_dir: str | Path = "runs/encoder",
    progress: bool = False,
) -> tuple[Path, dict]:
    """Encoder phase: build (or reuse) the fixed pair set, train E, checkpoint it."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    generator, gan_payload = load_generator(gan_ckpt)

    pairs_path = out_dir / f"pairs_{pairs_seed}_{n_pairs}.npy"
    pairs: EncoderPairs | None = None
    if pairs_path.exists():
        cached = load_pairs(pairs_path)
        if cached.meta() == {
            "n": n_pairs,
            "seed": pairs_seed,
            "generator_fingerprint": gan_payload["fingerprint"],
            "classifier_fingerprint": classifier.fingerprint,
            "floor_db": cached.floor_db,
        }:
            pairs = cached
    if pairs is None:
        pairs = build_encoder_training_set(generator, classifier, real_clips, n_pairs, seed=pairs_seed)
        save_pairs(pairs_path, pairs)

    # cache name carries the generator fingerprint so a retrained G can never
    # serve stale inputs of the right size
    input_cache = out_dir / f"pairs_{pairs_seed}_{n_pairs}.inputs.{gan_payload['fingerprint']}.f16"
    net, log = train_encoder(pairs, generator, cfg, input_cache=input_cache, progress=progress)
    ckpt = out_dir / "encoder_final.ckpt"
    save_checkpoint(
        ckpt,
        "encoder",
        {
            "model_state": net.state_dict(),
            "config": asdict(cfg or EncoderTrainConfig()),
            "generator_fingerprint": gan_payload["fingerprint"],
            "fingerprint": fingerprint_state(net.state_dict()),
            "log": {"heldout": log["heldout"], "improvement": log["improvement"]},
        },
    )
    (out_dir / "encoder_log.json").write_text(json.dumps({k: log[k] for k in ("heldout", "improvement", "config")}, indent=1))
    return ckpt, log


def load_encoder(path: str | Path) -> tuple[EncoderNet, dict]:
    payload = load_checkpoint(path, "encoder")
    net = EncoderNet()
    net.load_state_dict(payload["model_state"])
    net.eval()
    return net, payload
