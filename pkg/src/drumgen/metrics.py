"""Objective evaluation battery.

Generator suite: inception score over classifier probabilities, kernel
inception distance and Frechet distance over classifier embeddings.
Encoder suite: waveform MSE, log-spectral distance, and SNR on
encode/regenerate pairs.  Scores use this project's own classifier as the
embedding backbone, so they are methodology-compatible with published
Inception-based numbers but not numerically comparable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .spectral import LogMagSpectrogram

SNR_CAP_DB = 100.0


@dataclass(frozen=True)
class EmbeddingStats:
    """Gaussian fit of an embedding set."""

    mean: np.ndarray
    covariance: np.ndarray
    count: int

    def __post_init__(self):
        if self.count < 2:
            raise ValueError("need at least 2 embeddings for covariance")
        if not np.allclose(self.covariance, self.covariance.T, atol=1e-8):
            raise ValueError("covariance must be symmetric")

    @classmethod
    def from_embeddings(cls, emb: np.ndarray) -> "EmbeddingStats":
        emb = np.asarray(emb, dtype=np.float64)
        cov = np.cov(emb, rowvar=False)
        return cls(mean=emb.mean(axis=0), covariance=0.5 * (cov + cov.T), count=len(emb))


def inception_score(probs: np.ndarray) -> float:
    """exp(mean_i KL(p_i || mean_j p_j)) over per-sample class distributions."""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 2 or len(probs) < 2:
        raise ValueError("need at least 2 probability vectors")
    eps = 1e-12
    p = np.clip(probs, eps, 1.0)
    marginal = np.clip(probs.mean(axis=0), eps, 1.0)
    kl = np.sum(p * (np.log(p) - np.log(marginal)), axis=1)
    return float(np.exp(kl.mean()))


def _poly_kernel(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = a.shape[1]
    return (a @ b.T / d + 1.0) ** 3


def kid(emb_a: np.ndarray, emb_b: np.ndarray) -> float:
    """Unbiased MMD^2 with the cubic polynomial kernel k(x,y) = (x.y/D + 1)^3."""
    a = np.asarray(emb_a, dtype=np.float64)
    b = np.asarray(emb_b, dtype=np.float64)
    if len(a) < 10 or len(b) < 10:
        raise ValueError("each embedding set needs at least 10 items")
    if a.shape[1] != b.shape[1]:
        raise ValueError("embedding dimension mismatch")
    m, n = len(a), len(b)
    kaa = _poly_kernel(a, a)
    kbb = _poly_kernel(b, b)
    kab = _poly_kernel(a, b)
    term_a = (kaa.sum() - np.trace(kaa)) / (m * (m - 1))
    term_b = (kbb.sum() - np.trace(kbb)) / (n * (n - 1))
    return float(term_a + term_b - 2.0 * kab.mean())


def _sqrt_psd(mat: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(mat)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def frechet_distance(stats_a: EmbeddingStats, stats_b: EmbeddingStats) -> float:
    """||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2))."""
    if stats_a.mean.shape != stats_b.mean.shape:
        raise ValueError("embedding dimension mismatch")
    diff = stats_a.mean - stats_b.mean
    a_half = _sqrt_psd(stats_a.covariance)
    inner = a_half @ stats_b.covariance @ a_half
    cross = _sqrt_psd(0.5 * (inner + inner.T))
    return float(diff @ diff + np.trace(stats_a.covariance + stats_b.covariance) - 2.0 * np.trace(cross))


def lsd(spec_a: LogMagSpectrogram | np.ndarray, spec_b: LogMagSpectrogram | np.ndarray) -> float:
    """Mean over frames of the per-frame RMS dB difference."""
    a = spec_a.data if isinstance(spec_a, LogMagSpectrogram) else np.asarray(spec_a, dtype=np.float64)
    b = spec_b.data if isinstance(spec_b, LogMagSpectrogram) else np.asarray(spec_b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    a = a.reshape(-1, a.shape[-1])
    b = b.reshape(-1, b.shape[-1])
    per_frame = np.sqrt(np.mean((a - b) ** 2, axis=0))
    return float(per_frame.mean())


def snr(x: np.ndarray, x_hat: np.ndarray) -> float:
    """10 log10(signal power / residual power) in dB, capped at +100."""
    x = np.asarray(x, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if x.shape != x_hat.shape:
        raise ValueError("length mismatch")
    sig = float(np.sum(x**2))
    if sig == 0.0:
        raise ValueError("all-zero reference signal")
    res = float(np.sum((x - x_hat) ** 2))
    if res == 0.0:
        return SNR_CAP_DB
    return float(min(10.0 * np.log10(sig / res), SNR_CAP_DB))


@dataclass
class MetricReport:
    """Flat metric values plus provenance metadata."""

    values: dict[str, float]
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        bad = {k: v for k, v in self.values.items() if not np.isfinite(v)}
        if bad:
            raise ValueError(f"non-finite metric values: {bad}")

    def table(self) -> str:
        width = max(len(k) for k in self.values)
        lines = [f"{k.ljust(width)}  {v:12.6f}" for k, v in self.values.items()]
        return "\n".join(lines)

    def write_records(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            for k, v in self.values.items():
                fh.write(json.dumps({"metric": k, "value": v, **self.metadata}) + "\n")


def render_fakes(generator, z, c, batch: int = 32):
    """Generate spectrograms and invert them to audio clips."""
    import torch

    from .audio import peak_normalize
    from .spectral import ComplexSpectrogram, inverse_stft

    clips = []
    generator.eval()
    with torch.no_grad():
        for start in range(0, len(z), batch):
            specs = generator(z[start : start + batch], c[start : start + batch]).double().numpy()
            for s in specs:
                clips.append(peak_normalize(inverse_stft(ComplexSpectrogram(s))))
    return clips


def embedding_stats_cached(classifier, clips, cache_dir: str | Path | None = None, set_name: str = "") -> EmbeddingStats:
    """Gaussian embedding stats, cached by (classifier fingerprint, set fingerprint)."""
    import hashlib

    from .classifier import clip_id

    key = None
    if cache_dir is not None:
        set_fp = hashlib.sha1("".join(clip_id(c) for c in clips).encode()).hexdigest()[:16]
        key = Path(cache_dir) / f"embstats_{classifier.fingerprint}_{set_fp}.npz"
        if key.exists():
            blob = np.load(key)
            return EmbeddingStats(blob["mean"], blob["covariance"], int(blob["count"]))
    emb = classifier.embed_batch(list(clips))
    stats = EmbeddingStats.from_embeddings(emb)
    if key is not None:
        key.parent.mkdir(parents=True, exist_ok=True)
        np.savez(key, mean=stats.mean, covariance=stats.covariance, count=stats.count)
    return stats


def evaluate_generator(generator, classifier, real_clips, n_fake: int = 300, seed: int = 0, cache_dir=None) -> MetricReport:
    """IS / KID / FAD for generated audio, plus the real-vs-real reference row."""
    import torch

    from .gan import sample_latent

    if len(real_clips) < 20:
        raise ValueError("need at least 20 real clips")
    rng = np.random.default_rng(seed)
    z = sample_latent(n_fake, seed=seed)
    real_probs = classifier.predict_soft_labels_batch(list(real_clips))
    c = torch.from_numpy(real_probs[rng.integers(0, len(real_clips), size=n_fake)].astype(np.float32))
    fakes = render_fakes(generator, z, c)

    fake_probs = classifier.predict_soft_labels_batch(fakes)
    fake_emb = classifier.embed_batch(fakes)
    real_emb = classifier.embed_batch(list(real_clips))

    halves = rng.permutation(len(real_clips))
    half_a, half_b = np.array_split(halves, 2)

    values = {
        "is_fake": inception_score(fake_probs),
        "is_real": inception_score(real_probs),
        "kid_real_fake": kid(real_emb, fake_emb),
        "kid_real_real": kid(real_emb[half_a], real_emb[half_b]),
        "fad_real_fake": frechet_distance(
            EmbeddingStats.from_embeddings(real_emb), EmbeddingStats.from_embeddings(fake_emb)
        ),
        "fad_real_real": frechet_distance(
            EmbeddingStats.from_embeddings(real_emb[half_a]), EmbeddingStats.from_embeddings(real_emb[half_b])
        ),
    }
    from .persist import fingerprint_state

    meta = {
        "generator_fingerprint": fingerprint_state(generator.state_dict()),
        "classifier_fingerprint": classifier.fingerprint,
        "n_fake": str(n_fake),
        "seed": str(seed),
    }
    return MetricReport(values, meta)


def evaluate_encoder(encoder_net, generator, sets: dict[str, list], batch: int = 28) -> MetricReport:
    """Per-set MSE / LSD / SNR on encode-then-regenerate pairs.

    MSE and SNR are computed on peak-normalized waveforms; LSD compares
    unfloored log-magnitude spectrograms.
    """
    import torch

    from .audio import peak_normalize
    from .encoder import encode_batch
    from .spectral import ComplexSpectrogram, forward_stft, inverse_stft, log_magnitude, threshold_floor

    values: dict[str, float] = {}
    for name, clips in sets.items():
        if not clips:
            raise ValueError(f"empty evaluation set: {name}")
        mses, lsds, snrs = [], [], []
        for start in range(0, len(clips), batch):
            chunk = clips[start : start + batch]
            specs = [forward_stft(c) for c in chunk]
            floored = np.stack([threshold_floor(log_magnitude(s)).data for s in specs])
            z_hat, c_hat = encode_batch(encoder_net, floored)
            with torch.no_grad():
                recon = generator(
                    torch.from_numpy(z_hat.astype(np.float32)), torch.from_numpy(c_hat.astype(np.float32))
                ).double().numpy()
            for clip, spec, rspec in zip(chunk, specs, recon):
                rec_spec = ComplexSpectrogram(rspec)
                rec_clip = peak_normalize(inverse_stft(rec_spec))
                x = clip.samples / max(np.abs(clip.samples).max(), 1e-12)
                y = rec_clip.samples / max(np.abs(rec_clip.samples).max(), 1e-12)
                mses.append(float(np.mean((x - y) ** 2)))
                lsds.append(lsd(log_magnitude(spec), log_magnitude(rec_spec)))
                snrs.append(snr(x, y))
        values[f"{name}_mse"] = float(np.mean(mses))
        values[f"{name}_lsd"] = float(np.mean(lsds))
        values[f"{name}_snr"] = float(np.mean(snrs))
    from .persist import fingerprint_state

    meta = {
        "encoder_fingerprint": fingerprint_state(encoder_net.state_dict()),
        "generator_fingerprint": fingerprint_state(generator.state_dict()),
        "sets": ",".join(sets),
    }
    return MetricReport(values, meta)
