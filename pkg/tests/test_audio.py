import struct

import numpy as np
import pytest

from tse_search import (
    DomainError,
    ShapeError,
    Spectrogram,
    UnsupportedChannelsError,
    UnsupportedEncodingError,
    WavFormatError,
    Waveform,
    interpolate,
    load_wav,
    save_wav,
    stft,
)
from tse_search.audio import frame_count, hann_window


def write_pcm16(path, samples, sample_rate=16000, n_channels=1):
    payload = np.asarray(samples, dtype="<i2").tobytes()
    with open(path, "wb") as fh:
        fh.write(b"RIFF" + struct.pack("<I", 36 + len(payload)) + b"WAVE")
        fh.write(b"fmt " + struct.pack("<IHHIIHH", 16, 1, n_channels, sample_rate,
                                       sample_rate * 2 * n_channels, 2 * n_channels, 16))
        fh.write(b"data" + struct.pack("<I", len(payload)) + payload)


class TestWaveform:
    def test_rejects_empty(self):
        with pytest.raises(ShapeError):
            Waveform(np.array([]), 16000)

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            Waveform(np.array([0.0, np.nan]), 16000)

    def test_rejects_bad_rate(self):
        with pytest.raises(ValueError):
            Waveform(np.array([0.1]), 0)

    def test_rejects_2d(self):
        with pytest.raises(ShapeError):
            Waveform(np.zeros((2, 100)), 16000)

    def test_samples_immutable(self):
        w = Waveform(np.array([0.1, 0.2]), 16000)
        with pytest.raises(ValueError):
            w.samples[0] = 1.0


class TestWavIO:
    def test_pcm16_scaling(self, tmp_path):
        path = tmp_path / "pcm.wav"
        write_pcm16(path, [0, 16384, -32768])
        w = load_wav(path)
        assert w.samples.tolist() == [0.0, 0.5, -1.0]
        assert w.sample_rate == 16000

    def test_float32_passthrough(self, tmp_path):
        path = tmp_path / "f32.wav"
        save_wav(Waveform(np.array([0.25]), 16000), path)
        w = load_wav(path)
        assert w.samples.tolist() == [0.25]
        assert w.sample_rate == 16000

    def test_stereo_rejected(self, tmp_path):
        path = tmp_path / "stereo.wav"
        write_pcm16(path, [0, 0, 0, 0], n_channels=2)
        with pytest.raises(UnsupportedChannelsError):
            load_wav(path)

    def test_malformed_header(self, tmp_path):
        path = tmp_path / "junk.wav"
        path.write_bytes(b"RIFX3245not a wav at all")
        with pytest.raises(WavFormatError):
            load_wav(path)

    def test_truncated_data(self, tmp_path):
        path = tmp_path / "trunc.wav"
        write_pcm16(path, [1, 2, 3, 4])
        path.write_bytes(path.read_bytes()[:-3])
        with pytest.raises(WavFormatError):
            load_wav(path)

    def test_unknown_encoding(self, tmp_path):
        path = tmp_path / "alaw.wav"
        payload = b"\x00" * 8
        with open(path, "wb") as fh:
            fh.write(b"RIFF" + struct.pack("<I", 36 + len(payload)) + b"WAVE")
            fh.write(b"fmt " + struct.pack("<IHHIIHH", 16, 6, 1, 16000, 16000, 1, 8))
            fh.write(b"data" + struct.pack("<I", len(payload)) + payload)
        with pytest.raises(UnsupportedEncodingError):
            load_wav(path)

    def test_roundtrip_small(self, tmp_path):
        # Values on the float32 grid survive the float32 file bit-exactly.
        w = Waveform(np.array([0.1, -0.2], dtype=np.float32), 16000)
        path = tmp_path / "rt.wav"
        save_wav(w, path)
        assert np.array_equal(load_wav(path).samples, w.samples)

    def test_roundtrip_random(self, tmp_path):
        rng = np.random.default_rng(42)
        w = Waveform(rng.uniform(-1, 1, 64000).astype(np.float32), 16000)
        path = tmp_path / "rt64k.wav"
        save_wav(w, path)
        loaded = load_wav(path)
        assert np.array_equal(loaded.samples, w.samples)
        assert loaded.sample_rate == w.sample_rate

    def test_pcm16_grid_survives_float32(self, tmp_path):
        # Every 16-bit amplitude k/32768 is exactly representable in float32.
        path = tmp_path / "full.wav"
        values = np.arange(-32768, 32768, 257, dtype=np.int16)
        write_pcm16(path, values)
        w = load_wav(path)
        out = tmp_path / "full_f32.wav"
        save_wav(w, out)
        assert np.array_equal(load_wav(out).samples, w.samples)

    def test_unwritable_path(self, tmp_path):
        w = Waveform(np.array([0.1]), 16000)
        with pytest.raises(OSError):
            save_wav(w, tmp_path / "no" / "such" / "dir" / "x.wav")


class TestInterpolate:
    def test_endpoint_one_returns_x0(self):
        rng = np.random.default_rng(0)
        x0 = Waveform(rng.normal(size=100), 8000)
        prev = Waveform(rng.normal(size=100), 8000)
        assert interpolate(x0, prev, 1.0) is x0

    def test_endpoint_zero_returns_prev(self):
        rng = np.random.default_rng(1)
        x0 = Waveform(rng.normal(size=100), 8000)
        prev = Waveform(rng.normal(size=100), 8000)
        assert interpolate(x0, prev, 0.0) is prev

    def test_midpoint(self):
        x0 = Waveform(np.array([1.0, 0.0]), 8000)
        prev = Waveform(np.array([0.0, 1.0]), 8000)
        assert interpolate(x0, prev, 0.5).samples.tolist() == [0.5, 0.5]

    def test_affine_in_r(self):
        rng = np.random.default_rng(2)
        x0 = Waveform(rng.normal(0, 0.3, 4000), 16000)
        prev = Waveform(rng.normal(0, 0.3, 4000), 16000)
        for r in rng.uniform(0, 1, 50):
            got = interpolate(x0, prev, float(r)).samples - prev.samples
            want = r * (x0.samples - prev.samples)
            assert np.max(np.abs(got - want)) < 1e-12

    def test_r_out_of_range(self):
        w = Waveform(np.array([0.1]), 8000)
        for r in (-0.01, 1.01):
            with pytest.raises(DomainError):
                interpolate(w, w, r)

    def test_shape_mismatch(self):
        a = Waveform(np.array([0.1, 0.2]), 8000)
        b = Waveform(np.array([0.1]), 8000)
        with pytest.raises(ShapeError):
            interpolate(a, b, 0.5)
        c = Waveform(np.array([0.1, 0.2]), 16000)
        with pytest.raises(ShapeError):
            interpolate(a, c, 0.5)


class TestStft:
    def test_zero_signal(self):
        spec = stft(Waveform(np.zeros(1000), 16000), 256, 128)
        assert np.all(spec.frames == 0.0)

    def test_frame_count(self):
        spec = stft(Waveform(np.ones(400) * 0.1, 16000), 256, 128)
        assert spec.n_frames == 2
        assert frame_count(400, 256, 128) == 2

    def test_window_too_long(self):
        with pytest.raises(ShapeError):
            stft(Waveform(np.ones(100) * 0.1, 16000), 256, 128)

    def test_bad_geometry(self):
        with pytest.raises(ShapeError):
            Spectrogram(np.zeros((3, 3), dtype=complex), window_size=64, hop=128, sample_rate=16000)

    def test_sinusoid_bin_center(self):
        # Closed form: a periodic Hann window is the sum of three complex
        # exponentials, so a bin-centered sinusoid lands on exactly three DFT
        # bins with weights N/4 (peak) and N/8 (neighbors). The peak bin alone
        # carries 2/3 of the mainlobe energy; the 3-bin neighborhood all of it.
        n, sr = 512, 16000
        bin_idx = 40
        t = np.arange(4 * n)
        w = Waveform(np.sin(2 * np.pi * bin_idx * t / n), sr)
        spec = stft(w, n, n)
        energy = np.abs(spec.frames) ** 2
        for frame in energy.T:
            total = frame.sum()
            assert np.argmax(frame) == bin_idx
            assert frame[bin_idx - 1 : bin_idx + 2].sum() > 0.99 * total
            assert frame[bin_idx] / total == pytest.approx(2.0 / 3.0, abs=1e-6)
        peak = np.abs(spec.frames[bin_idx, 0])
        side = np.abs(spec.frames[bin_idx + 1, 0])
        assert peak == pytest.approx(n / 4, rel=1e-9)
        assert side == pytest.approx(n / 8, rel=1e-9)

    def test_hann_is_periodic(self):
        w = hann_window(8)
        assert w[0] == 0.0
        assert np.argmax(w) == 4
        assert w[4] == pytest.approx(1.0)

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        w = Waveform(rng.normal(0, 0.1, 2048), 16000)
        a = stft(w, 512, 128)
        b = stft(w, 512, 128)
        assert np.array_equal(a.frames, b.frames)
