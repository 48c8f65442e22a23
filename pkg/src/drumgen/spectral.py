"""STFT front end shared by every network in the pipeline.

Geometry is fixed: 0.55 s clips (24255 samples) are analyzed with a
2048-sample Hann window, hop 512, centered frames (reflect padding of
window_size/2 on both sides), which yields exactly 1 + 24255 // 512 = 48
frames.  The 2048-point rfft gives 1025 bins; the Nyquist bin is dropped
(restored as zero on inversion) so spectrograms are exactly 1024 x 48.
Centered frames keep the overlap-add weight away from zero across the whole
clip, so inversion is well conditioned even at the attack transient.

Spectrogram values are stored divided by SPEC_SCALE (the peak STFT magnitude
of a full-scale sine, = sum(window)/2), which keeps them in a roughly [-1, 1]
range for the networks.  dB values are referenced to unit *raw* STFT
magnitude, so full scale sits at about +54 dB and the -1.5 dB silence floor
actually removes near-silent bins instead of clamping everything.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal.windows import hann

from .audio import SAMPLE_RATE, AudioClip, CLIP_SAMPLES

WINDOW_SIZE = 2048
FRAME_HOP = 512
N_BINS = 1024
N_FRAMES = 1 + CLIP_SAMPLES // FRAME_HOP  # 48
PAD = WINDOW_SIZE // 2
_PADDED = CLIP_SAMPLES + 2 * PAD

WINDOW = hann(WINDOW_SIZE, sym=False)
SPEC_SCALE = float(WINDOW.sum()) / 2.0  # 512.0: peak |STFT| of a full-scale sine

GUARD_DB = -100.0
SILENCE_FLOOR_DB = -1.5
# dB reference expressed in normalized spectrogram units (= raw magnitude 1.0)
DB_REF_MAG = 1.0 / SPEC_SCALE

N_MELS = 128

_OLA_WEIGHT = np.zeros(_PADDED)
for _k in range(N_FRAMES):
    _OLA_WEIGHT[_k * FRAME_HOP : _k * FRAME_HOP + WINDOW_SIZE] += WINDOW**2
_OLA_WEIGHT.setflags(write=False)


@dataclass(frozen=True)
class ComplexSpectrogram:
    """Real/imaginary STFT channels, shape (2, 1024, 48)."""

    data: np.ndarray
    frame_hop: int = FRAME_HOP
    window_size: int = WINDOW_SIZE

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.shape != (2, N_BINS, N_FRAMES):
            raise ValueError(f"spectrogram shape must be (2, {N_BINS}, {N_FRAMES}), got {data.shape}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    def magnitude(self) -> np.ndarray:
        return np.hypot(self.data[0], self.data[1])


@dataclass(frozen=True)
class LogMagSpectrogram:
    """Log-magnitude in dB, shape (1, 1024, 48)."""

    data: np.ndarray
    floor_db: float | None = None

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.shape != (1, N_BINS, N_FRAMES):
            raise ValueError(f"log-mag shape must be (1, {N_BINS}, {N_FRAMES}), got {data.shape}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)


@dataclass(frozen=True)
class MelSpectrogram:
    """Log-scaled mel energies, shape (128, n_frames)."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2 or data.shape[0] != N_MELS:
            raise ValueError(f"mel shape must be ({N_MELS}, T), got {data.shape}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)


def forward_stft(clip: AudioClip) -> ComplexSpectrogram:
    """Hann STFT of a 24255-sample clip, normalized by SPEC_SCALE."""
    if len(clip) != CLIP_SAMPLES:
        raise ValueError(f"length mismatch: expected {CLIP_SAMPLES} samples, got {len(clip)}")
    x = np.pad(clip.samples, PAD, mode="reflect")
    offsets = np.arange(N_FRAMES) * FRAME_HOP
    frames = x[offsets[:, None] + np.arange(WINDOW_SIZE)] * WINDOW
    spec = np.fft.rfft(frames, axis=1)[:, :N_BINS].T / SPEC_SCALE
    return ComplexSpectrogram(np.stack([spec.real, spec.imag]))


def inverse_stft(spec: ComplexSpectrogram) -> AudioClip:
    """Weighted overlap-add inversion; the dropped Nyquist bin is restored as zero."""
    if not np.all(np.isfinite(spec.data)):
        raise ValueError("invalid spectrogram: non-finite entries")
    full = np.zeros((N_BINS + 1, N_FRAMES), dtype=np.complex128)
    full[:N_BINS] = (spec.data[0] + 1j * spec.data[1]) * SPEC_SCALE
    frames = np.fft.irfft(full.T, n=WINDOW_SIZE, axis=1)
    acc = np.zeros(_PADDED)
    for k in range(N_FRAMES):
        acc[k * FRAME_HOP : k * FRAME_HOP + WINDOW_SIZE] += frames[k] * WINDOW
    out = np.divide(acc, _OLA_WEIGHT, out=np.zeros_like(acc), where=_OLA_WEIGHT > 1e-12)
    return AudioClip(out[PAD : PAD + CLIP_SAMPLES])


def log_magnitude(spec: ComplexSpectrogram, ref_mag: float = DB_REF_MAG) -> LogMagSpectrogram:
    """20*log10(|S| / ref), guarded at GUARD_DB so zero bins stay finite."""
    ratio = spec.magnitude() / ref_mag
    db = 20.0 * np.log10(np.maximum(ratio, 10.0 ** (GUARD_DB / 20.0)))
    return LogMagSpectrogram(db[None])


def threshold_floor(logmag: LogMagSpectrogram, floor_db: float = SILENCE_FLOOR_DB) -> LogMagSpectrogram:
    """Clamp every entry below floor_db up to floor_db."""
    return LogMagSpectrogram(np.maximum(logmag.data, floor_db), floor_db=floor_db)


def mel_filterbank(n_mels: int = N_MELS, n_bins: int = N_BINS, sample_rate: int = SAMPLE_RATE) -> np.ndarray:
    """Triangular mel filters (HTK scale) sampled at the STFT bin centers."""

    def to_mel(f):
        return 2595.0 * np.log10(1.0 + f / 700.0)

    def from_mel(m):
        return 700.0 * (10.0 ** (m / 2595.0) - 1.0)

    edges = from_mel(np.linspace(0.0, to_mel(sample_rate / 2.0), n_mels + 2))
    bin_freqs = np.arange(n_bins) * sample_rate / WINDOW_SIZE
    fb = np.zeros((n_mels, n_bins))
    for m in range(n_mels):
        lo, center, hi = edges[m], edges[m + 1], edges[m + 2]
        rising = (bin_freqs - lo) / max(center - lo, 1e-12)
        falling = (hi - bin_freqs) / max(hi - center, 1e-12)
        fb[m] = np.clip(np.minimum(rising, falling), 0.0, None)
    return fb


_MEL_FB = mel_filterbank()


def mel_spectrogram(clip: AudioClip) -> MelSpectrogram:
    """128-bin log-mel spectrogram of a 24255-sample clip."""
    spec = forward_stft(clip)
    raw_mag = spec.magnitude() * SPEC_SCALE
    mel = _MEL_FB @ raw_mag
    db = 20.0 * np.log10(np.maximum(mel, 10.0 ** (GUARD_DB / 20.0)))
    return MelSpectrogram(db)
