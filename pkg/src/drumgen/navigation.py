"""Latent-space navigation and the analyze/render engine behind the service.

Variation works on a plane (or line) anchored at z_center and spanned by
orthonormal Gaussian directions: z = z_center + u * e1 + v * e2.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace

import numpy as np
import torch

from .audio import AudioClip, peak_normalize, trim_or_pad, wav_bytes
from .classifier import SoftLabelClassifier
from .encoder import EncoderNet, encode
from .gan import COND_DIM, GeneratorNet, LATENT_DIM
from .persist import fingerprint_state
from .spectral import ComplexSpectrogram, forward_stft, inverse_stft, log_magnitude, threshold_floor

SIMPLEX_TOLERANCE = 1e-3


@dataclass(frozen=True)
class NavigationState:
    z_center: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    mode: str = "1d"  # "1d" or "2d"

    def __post_init__(self):
        for name in ("z_center", "e1", "e2"):
            v = np.asarray(getattr(self, name), dtype=np.float64)
            if v.shape != (LATENT_DIM,):
                raise ValueError(f"{name} must have dimension {LATENT_DIM}")
            v.setflags(write=False)
            object.__setattr__(self, name, v)
        if self.mode not in ("1d", "2d"):
            raise ValueError("mode must be '1d' or '2d'")


def _orthonormal_pair(rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Gram-Schmidt on two Gaussian draws."""
    a = rng.standard_normal(LATENT_DIM)
    b = rng.standard_normal(LATENT_DIM)
    e1 = a / np.linalg.norm(a)
    b = b - (b @ e1) * e1
    e2 = b / np.linalg.norm(b)
    return e1, e2


def sample_center(seed: int | None = None, mode: str = "1d") -> NavigationState:
    """Fresh z_center ~ N(0, I) with fresh orthonormal directions."""
    rng = np.random.default_rng(seed)
    z_center = rng.standard_normal(LATENT_DIM)
    e1, e2 = _orthonormal_pair(rng)
    return NavigationState(z_center, e1, e2, mode)


def change_directions(state: NavigationState, seed: int | None = None) -> NavigationState:
    """New orthonormal directions around the same center."""
    e1, e2 = _orthonormal_pair(np.random.default_rng(seed))
    return replace(state, e1=e1, e2=e2)


def decode_position(state: NavigationState, u: float, v: float = 0.0) -> np.ndarray:
    """z = z_center + u * e1 (+ v * e2 in 2d mode)."""
    z = state.z_center + u * state.e1
    if state.mode == "2d":
        z = z + v * state.e2
    return z


def z_digest(z: np.ndarray) -> str:
    return hashlib.sha256(np.asarray(z, dtype=np.float64).tobytes()).hexdigest()[:16]


class SynthEngine:
    """Loaded models plus the render/analyze pipelines."""

    def __init__(
        self,
        generator: GeneratorNet,
        encoder: EncoderNet | None = None,
        classifier: SoftLabelClassifier | None = None,
    ):
        self.generator = generator.eval()
        self.encoder = encoder.eval() if encoder is not None else None
        self.classifier = classifier

    def fingerprints(self) -> dict[str, str | None]:
        return {
            "generator": fingerprint_state(self.generator.state_dict()),
            "encoder": fingerprint_state(self.encoder.state_dict()) if self.encoder else None,
            "classifier": self.classifier.fingerprint if self.classifier else None,
        }

    def render_spectrogram(self, z: np.ndarray, c: np.ndarray) -> ComplexSpectrogram:
        zt = torch.from_numpy(np.asarray(z, dtype=np.float32))[None]
        ct = torch.from_numpy(np.asarray(c, dtype=np.float32))[None]
        with torch.no_grad():
            out = self.generator(zt, ct)
        return ComplexSpectrogram(out[0].double().numpy())

    def render(self, z: np.ndarray, c: np.ndarray) -> tuple[AudioClip, bytes]:
        """Generate at final stage, invert, peak-limit, return clip + WAV bytes."""
        c = np.asarray(c, dtype=np.float64)
        if c.shape != (COND_DIM,) or np.any(c < -SIMPLEX_TOLERANCE) or abs(c.sum() - 1.0) > SIMPLEX_TOLERANCE:
            raise ValueError(f"condition vector must lie on the 3-simplex (sum within {SIMPLEX_TOLERANCE}); renormalize first")
        clip = peak_normalize(inverse_stft(self.render_spectrogram(z, c)))
        return clip, wav_bytes(clip)

    def analyze(self, audio: AudioClip, direction_seed: int | None = None) -> tuple[NavigationState, np.ndarray]:
        """Encode audio; the result anchors a fresh navigation state at z_hat."""
        if self.encoder is None:
            raise ValueError("no encoder loaded")
        clip = trim_or_pad(audio)
        logmag = threshold_floor(log_magnitude(forward_stft(clip)))
        out = encode(self.encoder, logmag)
        e1, e2 = _orthonormal_pair(np.random.default_rng(direction_seed))
        state = NavigationState(out.z_hat, e1, e2)
        return state, out.c_hat
