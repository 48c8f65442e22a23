"""Procedural three-class drum corpus and dataset loading/splitting."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import butter, sosfilt

from .audio import SAMPLE_RATE, AudioClip, CLIP_SAMPLES, read_wav, trim_or_pad, write_wav

log = logging.getLogger(__name__)

CLASSES = ("kick", "snare", "cymbal")
VAL_FRACTION = 0.1


def _rng_for(drum_class: str, seed: int) -> np.random.Generator:
    return np.random.default_rng([CLASSES.index(drum_class), seed])


def _env(t: np.ndarray, tau: float) -> np.ndarray:
    return np.exp(-t / tau)


def _kick(rng: np.random.Generator, t: np.ndarray) -> np.ndarray:
    f_start = rng.uniform(130.0, 175.0)
    f_end = rng.uniform(35.0, 50.0)
    sweep_tau = rng.uniform(0.02, 0.06)
    freq = f_end + (f_start - f_end) * np.exp(-t / sweep_tau)
    phase = 2.0 * np.pi * np.cumsum(freq) / SAMPLE_RATE
    body = np.sin(phase) * _env(t, rng.uniform(0.12, 0.28))
    click = rng.normal(size=len(t)) * _env(t, 0.003) * rng.uniform(0.05, 0.15)
    sos = butter(2, 4000 / (SAMPLE_RATE / 2), output="sos")
    return body + sosfilt(sos, click)


def _snare(rng: np.random.Generator, t: np.ndarray) -> np.ndarray:
    tone_f = rng.uniform(180.0, 240.0)
    tone = np.sin(2.0 * np.pi * tone_f * t) * _env(t, rng.uniform(0.05, 0.1))
    lo = rng.uniform(1200.0, 2000.0)
    hi = rng.uniform(5500.0, 8000.0)
    sos = butter(4, [lo / (SAMPLE_RATE / 2), hi / (SAMPLE_RATE / 2)], btype="band", output="sos")
    rattle = sosfilt(sos, rng.normal(size=len(t))) * _env(t, rng.uniform(0.08, 0.16))
    return rng.uniform(0.3, 0.5) * tone + rattle


def _cymbal(rng: np.random.Generator, t: np.ndarray) -> np.ndarray:
    cutoff = rng.uniform(5000.0, 7000.0)
    sos = butter(4, cutoff / (SAMPLE_RATE / 2), btype="high", output="sos")
    wash = sosfilt(sos, rng.normal(size=len(t))) * _env(t, rng.uniform(0.25, 0.5))
    partials = np.zeros_like(t)
    for _ in range(5):
        f = rng.uniform(6000.0, 14000.0)
        partials += rng.uniform(0.05, 0.15) * np.sin(2.0 * np.pi * f * t + rng.uniform(0, 2 * np.pi))
    return wash + partials * _env(t, rng.uniform(0.2, 0.4))


_RECIPES = {"kick": _kick, "snare": _snare, "cymbal": _cymbal}


def synth_drum(drum_class: str, seed: int) -> AudioClip:
    """Render a deterministic one-shot for (class, seed); peak kept below 1.0."""
    if drum_class not in _RECIPES:
        raise ValueError(f"unknown drum class: {drum_class!r} (expected one of {CLASSES})")
    rng = _rng_for(drum_class, seed)
    t = np.arange(CLIP_SAMPLES) / SAMPLE_RATE
    x = _RECIPES[drum_class](rng, t)
    peak_target = rng.uniform(0.75, 0.92)
    x = x * (peak_target / np.max(np.abs(x)))
    return AudioClip(x)


@dataclass(frozen=True)
class SyntheticSpec:
    """Request for a generated corpus: clips per class, master seed."""

    per_class: int
    seed: int = 0


@dataclass
class LabeledDataset:
    """Clips with hard class labels and a seeded 90/10 train/validation split."""

    items: list[tuple[AudioClip, str]]
    train_indices: list[int]
    val_indices: list[int]
    split_seed: int = 0

    def __post_init__(self):
        overlap = set(self.train_indices) & set(self.val_indices)
        if overlap or len(self.train_indices) + len(self.val_indices) != len(self.items):
            raise ValueError("train/validation split must be disjoint and exhaustive")

    @property
    def train_items(self) -> list[tuple[AudioClip, str]]:
        return [self.items[i] for i in self.train_indices]

    @property
    def val_items(self) -> list[tuple[AudioClip, str]]:
        return [self.items[i] for i in self.val_indices]

    def class_counts(self) -> dict[str, int]:
        counts = {c: 0 for c in CLASSES}
        for _, label in self.items:
            counts[label] += 1
        return counts


def _split(items: list[tuple[AudioClip, str]], seed: int) -> LabeledDataset:
    rng = np.random.default_rng(seed)
    train: list[int] = []
    val: list[int] = []
    for cls in CLASSES:
        idx = [i for i, (_, label) in enumerate(items) if label == cls]
        if not idx:
            raise ValueError(f"empty class: {cls}")
        perm = rng.permutation(len(idx))
        n_val = round(len(idx) * VAL_FRACTION)
        val.extend(idx[j] for j in perm[:n_val])
        train.extend(idx[j] for j in perm[n_val:])
    return LabeledDataset(items, sorted(train), sorted(val), split_seed=seed)


def load_dataset(source: str | Path | SyntheticSpec, split_seed: int = 0) -> LabeledDataset:
    """Build a labeled dataset from a class-folder directory or a synthetic request.

    Directory layout: <root>/{kick,snare,cymbal}/*.wav.  Files are resampled
    to 44.1 kHz and trimmed/padded to 0.55 s; unreadable files are skipped
    with a warning.
    """
    items: list[tuple[AudioClip, str]] = []
    if isinstance(source, SyntheticSpec):
        for cls in CLASSES:
            for i in range(source.per_class):
                items.append((synth_drum(cls, source.seed + i), cls))
    else:
        root = Path(source)
        for cls in CLASSES:
            for path in sorted((root / cls).glob("*.wav")):
                try:
                    clip = trim_or_pad(read_wav(path))
                except (ValueError, OSError) as exc:
                    log.warning("skipping unreadable file %s: %s", path, exc)
                    continue
                items.append((clip, cls))
    return _split(items, split_seed)


def save_dataset_wavs(root: str | Path, per_class: int, seed: int) -> int:
    """Render a synthetic corpus into <root>/{kick,snare,cymbal}/*.wav; returns file count."""
    root = Path(root)
    count = 0
    for cls in CLASSES:
        (root / cls).mkdir(parents=True, exist_ok=True)
        for i in range(per_class):
            write_wav(root / cls / f"{cls}_{seed + i:05d}.wav", synth_drum(cls, seed + i))
            count += 1
    return count
