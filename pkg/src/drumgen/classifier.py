"""Inception-style kick/snare/cymbal classifier on 128-bin log-mel spectrograms.

Its softmax outputs are the soft labels distilled into the GAN conditioning,
and its penultimate activations are the embeddings behind the distribution
metrics.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .audio import AudioClip
from .dataset import CLASSES, LabeledDataset
from .persist import fingerprint_state, load_checkpoint, save_checkpoint
from .spectral import GUARD_DB, mel_spectrogram

N_CLASSES = len(CLASSES)

# affine input normalization: mel dB in [-100, ~54] -> roughly [0, 1.5]
_MEL_SHIFT = -GUARD_DB
_MEL_SCALE = 100.0

_MEL_FB_T = None  # lazily built torch copy of the mel filter bank


@dataclass
class ClassifierConfig:
    block_channels: tuple[int, ...] = (48, 64, 96)
    stem_channels: int = 24
    embedding_dim: int = 64
    lr: float = 1e-3
    epochs: int = 20
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.embedding_dim <= 0 or self.epochs <= 0 or self.batch_size <= 0 or self.lr <= 0:
            raise ValueError("classifier config values must be positive")
        if any(c <= 0 for c in self.block_channels) or self.stem_channels <= 0:
            raise ValueError("channel widths must be positive")


class InceptionBlock(nn.Module):
    """Parallel 1x1 / 3x3 / 5x5 / pooled branches, concatenated."""

    def __init__(self, in_ch: int, out_ch: int):
        super().__init__()
        b = out_ch // 4

        def conv(i, o, k):
            return nn.Sequential(
                nn.Conv2d(i, o, k, padding=k // 2, bias=False), nn.BatchNorm2d(o), nn.ReLU(inplace=True)
            )

        self.b1 = conv(in_ch, b, 1)
        self.b3 = nn.Sequential(conv(in_ch, b, 1), conv(b, b, 3))
        self.b5 = nn.Sequential(conv(in_ch, b, 1), conv(b, b, 5))
        self.bp = nn.Sequential(nn.MaxPool2d(3, stride=1, padding=1), conv(in_ch, out_ch - 3 * b, 1))

    def forward(self, x):
        return torch.cat([self.b1(x), self.b3(x), self.b5(x), self.bp(x)], dim=1)


class ClassifierNet(nn.Module):
    def __init__(self, cfg: ClassifierConfig):
        super().__init__()
        self.stem = nn.Sequential(
            nn.Conv2d(1, cfg.stem_channels, 3, stride=2, padding=1, bias=False),
            nn.BatchNorm2d(cfg.stem_channels),
            nn.ReLU(inplace=True),
        )
        blocks = []
        in_ch = cfg.stem_channels
        for i, out_ch in enumerate(cfg.block_channels):
            blocks.append(InceptionBlock(in_ch, out_ch))
            if i < len(cfg.block_channels) - 1:
                blocks.append(nn.AvgPool2d(2))
            in_ch = out_ch
        self.blocks = nn.Sequential(*blocks)
        self.pool = nn.AdaptiveAvgPool2d(1)
        self.fc_embed = nn.Linear(in_ch, cfg.embedding_dim)
        self.head = nn.Linear(cfg.embedding_dim, N_CLASSES)

    def embed(self, x: torch.Tensor) -> torch.Tensor:
        h = self.blocks(self.stem(x))
        h = self.pool(h).flatten(1)
        return torch.relu(self.fc_embed(h))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.head(self.embed(x))


def _mel_tensor(clip: AudioClip) -> torch.Tensor:
    mel = mel_spectrogram(clip).data
    return torch.from_numpy((mel + _MEL_SHIFT) / _MEL_SCALE).float()[None]


class SoftLabelClassifier:
    """Trained classifier wrapper: soft labels and embeddings for clips."""

    def __init__(self, net: ClassifierNet, config: ClassifierConfig):
        self.net = net.eval()
        self.config = config

    @property
    def fingerprint(self) -> str:
        return fingerprint_state(self.net.state_dict())

    def _forward_clips(self, clips: list[AudioClip]) -> torch.Tensor:
        return torch.stack([_mel_tensor(c) for c in clips])

    def predict_soft_labels(self, clip: AudioClip) -> np.ndarray:
        return self.predict_soft_labels_batch([clip])[0]

    def predict_soft_labels_batch(self, clips: list[AudioClip]) -> np.ndarray:
        self.net.eval()
        with torch.no_grad():
            logits = self.net(self._forward_clips(clips))
        return torch.softmax(logits, dim=1).double().numpy()

    def embed(self, clip: AudioClip) -> np.ndarray:
        return self.embed_batch([clip])[0]

    def embed_batch(self, clips: list[AudioClip]) -> np.ndarray:
        self.net.eval()
        with torch.no_grad():
            emb = self.net.embed(self._forward_clips(clips))
        return emb.double().numpy()

    def class_logits_from_spec(self, spec: torch.Tensor) -> torch.Tensor:
        """Differentiable class logits straight from (B, 2, F, T) complex-
        spectrogram tensors; lets class structure be distilled into the
        generator during training (cross-entropy on these logits keeps
        gradients alive where the softmax saturates)."""
        from .spectral import SPEC_SCALE

        global _MEL_FB_T
        if _MEL_FB_T is None:
            from .spectral import mel_filterbank

            _MEL_FB_T = torch.from_numpy(mel_filterbank()).float()
        self.net.eval()
        mag = torch.sqrt(spec[:, 0] ** 2 + spec[:, 1] ** 2 + 1e-12) * SPEC_SCALE
        mel = torch.einsum("mf,bft->bmt", _MEL_FB_T, mag)
        db = 20.0 * torch.log10(torch.clamp(mel, min=10.0 ** (GUARD_DB / 20.0)))
        x = ((db + _MEL_SHIFT) / _MEL_SCALE)[:, None]
        return self.net(x)

    def save(self, path: str | Path, extra: dict | None = None) -> None:
        payload = {
            "config": asdict(self.config),
            "model_state": self.net.state_dict(),
            "fingerprint": self.fingerprint,
        }
        payload.update(extra or {})
        save_checkpoint(path, "classifier", payload)

    @classmethod
    def load(cls, path: str | Path) -> "SoftLabelClassifier":
        payload = load_checkpoint(path, "classifier")
        cfg_dict = dict(payload["config"])
        cfg_dict["block_channels"] = tuple(cfg_dict["block_channels"])
        cfg = ClassifierConfig(**cfg_dict)
        net = ClassifierNet(cfg)
        net.load_state_dict(payload["model_state"])
        return cls(net, cfg)


def train_classifier(dataset: LabeledDataset, cfg: ClassifierConfig) -> tuple[SoftLabelClassifier, dict]:
    """Cross-entropy training on the 90% split; returns the wrapper and a log."""
    counts = dataset.class_counts()
    for c in CLASSES:
        if counts[c] == 0:
            raise ValueError(f"empty class: {c}")

    torch.manual_seed(cfg.seed)
    net = ClassifierNet(cfg)
    opt = torch.optim.Adam(net.parameters(), lr=cfg.lr)
    rng = np.random.default_rng(cfg.seed)

    mels = torch.stack([_mel_tensor(clip) for clip, _ in dataset.items])
    labels = torch.tensor([CLASSES.index(lbl) for _, lbl in dataset.items])
    train_idx = np.array(dataset.train_indices)
    val_idx = np.array(dataset.val_indices)

    log: dict = {"train_loss": [], "val_accuracy": None}
    for _epoch in range(cfg.epochs):
        net.train()
        order = rng.permutation(len(train_idx))
        losses = []
        for start in range(0, len(order), cfg.batch_size):
            batch = train_idx[order[start : start + cfg.batch_size]]
            opt.zero_grad()
            loss = nn.functional.cross_entropy(net(mels[batch]), labels[batch])
            if not torch.isfinite(loss):
                raise RuntimeError(f"classifier training diverged: loss={loss.item()} at epoch {_epoch}")
            loss.backward()
            opt.step()
            losses.append(loss.item())
        log["train_loss"].append(float(np.mean(losses)))

    net.eval()
    with torch.no_grad():
        preds = net(mels[val_idx]).argmax(dim=1)
    log["val_accuracy"] = float((preds == labels[val_idx]).float().mean())
    return SoftLabelClassifier(net, cfg), log


def clip_id(clip: AudioClip) -> str:
    """Content-addressed clip identifier."""
    return hashlib.sha1(np.asarray(clip.samples, dtype=np.float64).tobytes()).hexdigest()[:16]


def distill_soft_labels(clf: SoftLabelClassifier, dataset: LabeledDataset, batch_size: int = 64) -> dict[str, list[float]]:
    """Soft-label every clip in the dataset, keyed by clip id."""
    out: dict[str, list[float]] = {}
    clips = [clip for clip, _ in dataset.items]
    for start in range(0, len(clips), batch_size):
        chunk = clips[start : start + batch_size]
        probs = clf.predict_soft_labels_batch(chunk)
        for clip, p in zip(chunk, probs):
            out[clip_id(clip)] = [float(v) for v in p]
    return out


def save_soft_label_cache(path: str | Path, clf: SoftLabelClassifier, labels: dict[str, list[float]]) -> None:
    Path(path).write_text(json.dumps({"classifier_fingerprint": clf.fingerprint, "labels": labels}, indent=0))


def load_soft_label_cache(path: str | Path) -> tuple[str, dict[str, list[float]]]:
    blob = json.loads(Path(path).read_text())
    return blob["classifier_fingerprint"], blob["labels"]
