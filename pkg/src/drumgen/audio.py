"""Audio clip handling: WAV I/O, resampling, stereo downmix, trim/pad."""

from __future__ import annotations

import io
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

SAMPLE_RATE = 44100
CLIP_SECONDS = 0.55
CLIP_SAMPLES = round(CLIP_SECONDS * SAMPLE_RATE)  # 24255


@dataclass(frozen=True)
class AudioClip:
    """Mono audio at 44.1 kHz, samples in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError(f"clip must be mono 1-D, got shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("clip contains non-finite samples")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return len(self.samples)


def trim_or_pad(clip: AudioClip, target_s: float = CLIP_SECONDS) -> AudioClip:
    """Force a clip to exactly round(target_s * 44100) samples.

    Long clips keep their head; short clips get zeros appended at the tail.
    """
    if len(clip) == 0:
        raise ValueError("empty audio")
    target = round(target_s * clip.sample_rate)
    x = clip.samples
    if len(x) >= target:
        out = x[:target]
    else:
        out = np.concatenate([x, np.zeros(target - len(x))])
    return AudioClip(out, clip.sample_rate)


def resample(samples: np.ndarray, sr_in: int, sr_out: int = SAMPLE_RATE) -> np.ndarray:
    """Polyphase windowed-sinc resampling between integer rates."""
    if sr_in == sr_out:
        return np.asarray(samples, dtype=np.float64)
    ratio = Fraction(sr_out, sr_in)
    return resample_poly(np.asarray(samples, dtype=np.float64), ratio.numerator, ratio.denominator)


def _to_float(data: np.ndarray) -> np.ndarray:
    if data.dtype == np.int16:
        return data.astype(np.float64) / 32768.0
    if data.dtype == np.int32:
        return data.astype(np.float64) / 2147483648.0
    if data.dtype == np.uint8:
        return (data.astype(np.float64) - 128.0) / 128.0
    if data.dtype in (np.float32, np.float64):
        return data.astype(np.float64)
    raise ValueError(f"unsupported WAV sample format: {data.dtype}")


def read_wav(source: str | Path | bytes) -> AudioClip:
    """Read a PCM or float WAV, downmix to mono, resample to 44.1 kHz."""
    if isinstance(source, bytes):
        sr, data = wavfile.read(io.BytesIO(source))
    else:
        sr, data = wavfile.read(str(source))
    x = _to_float(np.atleast_1d(data))
    if x.ndim == 2:
        x = x.mean(axis=1)
    if len(x) == 0:
        raise ValueError("empty audio")
    x = resample(x, sr, SAMPLE_RATE)
    return AudioClip(np.clip(x, -1.0, 1.0))


def wav_bytes(clip: AudioClip) -> bytes:
    """Encode a clip as 16-bit PCM WAV."""
    pcm = np.clip(clip.samples, -1.0, 1.0)
    pcm = np.round(pcm * 32767.0).astype(np.int16)
    buf = io.BytesIO()
    wavfile.write(buf, clip.sample_rate, pcm)
    return buf.getvalue()


def write_wav(path: str | Path, clip: AudioClip) -> None:
    Path(path).write_bytes(wav_bytes(clip))


def peak_normalize(clip: AudioClip, peak_db: float = -1.0) -> AudioClip:
    """Scale down to the given peak (dBFS) if the clip exceeds 1.0; never scale up."""
    peak = float(np.max(np.abs(clip.samples), initial=0.0))
    if peak <= 1.0:
        return clip
    target = 10.0 ** (peak_db / 20.0)
    return AudioClip(clip.samples * (target / peak), clip.sample_rate)
