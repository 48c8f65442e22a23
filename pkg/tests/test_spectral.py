import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.signal import butter, sosfiltfilt

from drumgen.audio import SAMPLE_RATE, AudioClip, CLIP_SAMPLES, peak_normalize, read_wav, trim_or_pad, wav_bytes
from drumgen.spectral import (
    DB_REF_MAG,
    GUARD_DB,
    ComplexSpectrogram,
    LogMagSpectrogram,
    N_BINS,
    N_FRAMES,
    SPEC_SCALE,
    WINDOW,
    WINDOW_SIZE,
    forward_stft,
    inverse_stft,
    log_magnitude,
    mel_filterbank,
    mel_spectrogram,
    threshold_floor,
)


def random_audio_clip(rng: np.random.Generator) -> AudioClip:
    """Band-limited noise: audio-like content without Nyquist-band energy."""
    sos = butter(8, 12000 / (SAMPLE_RATE / 2), output="sos")
    x = sosfiltfilt(sos, rng.normal(size=CLIP_SAMPLES))
    return AudioClip(0.9 * x / np.abs(x).max())


class TestTrimOrPad:
    def test_truncates_head(self):
        clip = AudioClip(np.arange(44100) / 44100.0)
        out = trim_or_pad(clip)
        assert len(out) == 24255
        assert np.array_equal(out.samples, clip.samples[:24255])

    def test_pads_tail_with_zeros(self):
        out = trim_or_pad(AudioClip(np.ones(1000) * 0.5))
        assert len(out) == 24255
        assert np.all(out.samples[1000:] == 0.0)
        assert np.all(out.samples[:1000] == 0.5)

    def test_identity_at_target_length(self):
        clip = AudioClip(np.random.default_rng(0).uniform(-1, 1, 24255))
        out = trim_or_pad(clip)
        assert np.array_equal(out.samples, clip.samples)

    def test_empty_clip_rejected(self):
        with pytest.raises(ValueError, match="empty audio"):
            trim_or_pad(AudioClip(np.zeros(0)))

    @given(st.integers(min_value=1, max_value=60000))
    @settings(max_examples=30, deadline=None)
    def test_output_length_always_24255(self, n):
        assert len(trim_or_pad(AudioClip(np.zeros(n)))) == 24255


class TestForwardStft:
    def test_zero_clip_gives_zero_spectrogram(self):
        spec = forward_stft(AudioClip(np.zeros(CLIP_SAMPLES)))
        assert np.all(spec.data == 0.0)

    def test_white_noise_shape(self):
        clip = AudioClip(np.random.default_rng(1).uniform(-1, 1, CLIP_SAMPLES))
        assert forward_stft(clip).data.shape == (2, 1024, 48)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError, match="length mismatch"):
            forward_stft(AudioClip(np.zeros(1000)))

    def test_sine_peaks_at_bin_and_matches_bruteforce_dft(self):
        # oracle: O(N^2) DFT of one windowed frame, computed independently
        k = 137
        freq = k * SAMPLE_RATE / WINDOW_SIZE
        t = np.arange(CLIP_SAMPLES) / SAMPLE_RATE
        clip = AudioClip(0.8 * np.sin(2 * np.pi * freq * t))
        spec = forward_stft(clip)
        mag = spec.magnitude()
        # steady-state frames (window fully inside the sine)
        interior = mag[:, 4:44]
        assert np.all(interior.argmax(axis=0) == k)

        frame_idx = 20
        start = frame_idx * 512 - WINDOW_SIZE // 2  # centered frames
        frame = clip.samples[start : start + WINDOW_SIZE] * WINDOW
        n = np.arange(WINDOW_SIZE)
        bins = sorted(set(range(0, N_BINS, 128)) | {k - 2, k - 1, k, k + 1, k + 2})
        brute = np.array([np.sum(frame * np.exp(-2j * np.pi * kk * n / WINDOW_SIZE)) for kk in bins])
        ours = (spec.data[0, bins, frame_idx] + 1j * spec.data[1, bins, frame_idx]) * SPEC_SCALE
        assert np.allclose(ours, brute, atol=1e-9 * np.abs(brute).max())

    def test_linearity(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=CLIP_SAMPLES) / 10
        y = rng.normal(size=CLIP_SAMPLES) / 10
        a, b = 0.7, -1.3
        sx = forward_stft(AudioClip(x)).data
        sy = forward_stft(AudioClip(y)).data
        sxy = forward_stft(AudioClip(a * x + b * y)).data
        assert np.max(np.abs(sxy - (a * sx + b * sy))) <= 1e-6 * np.max(np.abs(sxy))


class TestInverseStft:
    def test_zero_spectrogram_gives_zero_clip(self):
        clip = inverse_stft(ComplexSpectrogram(np.zeros((2, N_BINS, N_FRAMES))))
        assert len(clip) == 24255
        assert np.all(clip.samples == 0.0)

    def test_roundtrip_snr(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            clip = random_audio_clip(rng)
            rec = inverse_stft(forward_stft(clip))
            err = rec.samples - clip.samples
            snr_db = 10 * np.log10(np.sum(clip.samples**2) / np.sum(err**2))
            assert snr_db >= 60.0

    def test_nonfinite_rejected(self):
        data = np.zeros((2, N_BINS, N_FRAMES))
        data[0, 10, 10] = np.nan
        with pytest.raises(ValueError, match="invalid spectrogram"):
            inverse_stft(ComplexSpectrogram(data))

    def test_arbitrary_spectrogram_inverts_to_finite_full_length_clip(self):
        data = np.random.default_rng(4).normal(size=(2, N_BINS, N_FRAMES)) * 0.1
        clip = inverse_stft(ComplexSpectrogram(data))
        assert len(clip) == 24255
        assert np.all(np.isfinite(clip.samples))


class TestLogMagnitude:
    def _spec_with_uniform_magnitude(self, mag: float) -> ComplexSpectrogram:
        data = np.zeros((2, N_BINS, N_FRAMES))
        data[0] = mag
        return ComplexSpectrogram(data)

    def test_reference_magnitude_is_zero_db(self):
        lm = log_magnitude(self._spec_with_uniform_magnitude(DB_REF_MAG))
        assert np.allclose(lm.data, 0.0, atol=1e-12)

    def test_zero_bin_clamps_to_guard_floor(self):
        lm = log_magnitude(self._spec_with_uniform_magnitude(0.0))
        assert np.all(lm.data == GUARD_DB)

    def test_half_reference_is_minus_6db(self):
        lm = log_magnitude(self._spec_with_uniform_magnitude(DB_REF_MAG / 2))
        assert np.allclose(lm.data, -6.020599913, atol=1e-8)


class TestThresholdFloor:
    def test_clamps_below_floor(self):
        data = np.full((1, N_BINS, N_FRAMES), -3.0)
        out = threshold_floor(LogMagSpectrogram(data))
        assert np.all(out.data == -1.5)

    def test_passes_above_floor(self):
        data = np.zeros((1, N_BINS, N_FRAMES))
        out = threshold_floor(LogMagSpectrogram(data))
        assert np.all(out.data == 0.0)

    def test_all_silence_becomes_constant_floor(self):
        silent = log_magnitude(ComplexSpectrogram(np.zeros((2, N_BINS, N_FRAMES))))
        out = threshold_floor(silent)
        assert np.all(out.data == -1.5)

    @given(st.lists(st.floats(min_value=-50, max_value=10), min_size=4, max_size=4))
    @settings(max_examples=50, deadline=None)
    def test_idempotent_and_monotone(self, values):
        data = np.zeros((1, N_BINS, N_FRAMES))
        data[0, :2, :2] = np.array(values).reshape(2, 2)
        once = threshold_floor(LogMagSpectrogram(data))
        twice = threshold_floor(once)
        assert np.array_equal(once.data, twice.data)
        # monotone: a >= b entrywise is preserved
        bumped = threshold_floor(LogMagSpectrogram(data + 0.5))
        assert np.all(bumped.data >= once.data)


class TestMel:
    def test_dimension_is_128(self):
        clip = AudioClip(np.random.default_rng(5).uniform(-1, 1, CLIP_SAMPLES))
        assert mel_spectrogram(clip).data.shape[0] == 128

    def test_zero_clip_gives_guard_floor(self):
        mel = mel_spectrogram(AudioClip(np.zeros(CLIP_SAMPLES)))
        assert np.all(mel.data == GUARD_DB)

    def test_filterbank_rows_positive_and_cover_band(self):
        fb = mel_filterbank()
        assert fb.shape == (128, 1024)
        assert np.all(fb.sum(axis=1) > 0.0)
        # every analysis bin above DC is reached by at least one filter
        coverage = fb.sum(axis=0)
        assert np.all(coverage[1:] > 0.0)
        assert np.all(fb >= 0.0)


class TestWavIO:
    def test_roundtrip_16bit(self, tmp_path):
        clip = AudioClip(np.random.default_rng(6).uniform(-0.9, 0.9, CLIP_SAMPLES))
        path = tmp_path / "x.wav"
        path.write_bytes(wav_bytes(clip))
        back = read_wav(path)
        assert len(back) == len(clip)
        assert np.max(np.abs(back.samples - clip.samples)) < 1e-4  # 16-bit quantization

    def test_stereo_downmix_and_resample(self, tmp_path):
        import io

        from scipy.io import wavfile

        sr = 22050
        t = np.arange(sr) / sr
        left = np.sin(2 * np.pi * 440 * t)
        right = np.zeros_like(left)
        buf = io.BytesIO()
        wavfile.write(buf, sr, np.stack([left, right], axis=1).astype(np.float32))
        clip = read_wav(buf.getvalue())
        assert clip.sample_rate == 44100
        assert abs(len(clip) - 44100) <= 2
        # downmix by averaging halves the amplitude
        assert 0.4 < np.abs(clip.samples).max() < 0.6

    def test_peak_normalize_only_scales_down(self):
        quiet = AudioClip(np.full(100, 0.1))
        assert np.array_equal(peak_normalize(quiet).samples, quiet.samples)
        loud = AudioClip(np.linspace(-2.0, 2.0, 100))
        out = peak_normalize(loud)
        assert np.isclose(np.abs(out.samples).max(), 10 ** (-1 / 20))
