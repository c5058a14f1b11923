"""Waveform container, WAV file I/O, interpolation, and STFT utilities.

All audio is mono, one sample rate per run (16 kHz by default). Samples are
kept as float64 for arithmetic; the WAV boundary quantizes to the float32
grid (files are written as IEEE float32), so values loaded from disk survive
a save/load round trip bit-exactly.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    DomainError,
    ShapeError,
    UnsupportedChannelsError,
    UnsupportedEncodingError,
    WavFormatError,
)

DEFAULT_SAMPLE_RATE = 16000
DEFAULT_WINDOW_SIZE = 512
DEFAULT_HOP = 128

_WAVE_FORMAT_PCM = 0x0001
_WAVE_FORMAT_IEEE_FLOAT = 0x0003
_WAVE_FORMAT_EXTENSIBLE = 0xFFFE


@dataclass(frozen=True)
class Waveform:
    """Mono sampled signal. Immutable; samples are a read-only float64 array."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ShapeError(f"expected 1-D samples, got shape {samples.shape}")
        if samples.size == 0:
            raise ShapeError("waveform is empty")
        if not np.all(np.isfinite(samples)):
            raise ValueError("waveform contains NaN or Inf")
        if not isinstance(self.sample_rate, (int, np.integer)) or self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be a positive integer, got {self.sample_rate!r}")
        if samples.base is not None:
            samples = samples.copy()
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        """Length in seconds."""
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class Spectrogram:
    """Complex STFT frames, shape (n_bins, n_frames)."""

    frames: np.ndarray
    window_size: int
    hop: int
    sample_rate: int

    def __post_init__(self):
        if self.hop <= 0 or self.window_size < self.hop:
            raise ShapeError(
                f"need window_size >= hop > 0, got window_size={self.window_size} hop={self.hop}"
            )

    @property
    def n_frames(self) -> int:
        return self.frames.shape[1]


def vdot(a: np.ndarray, b: np.ndarray) -> float:
    """Inner product via pairwise summation.

    np.dot delegates to BLAS, whose reduction order can depend on the machine's
    core count; np.sum's pairwise scheme is fixed by array length alone, which
    keeps results byte-identical across machines.
    """
    return float(np.sum(a * b))


def l2_norm(a: np.ndarray) -> float:
    return float(np.sqrt(np.sum(a * a)))


def same_shape(a: Waveform, b: Waveform) -> None:
    """Raise ShapeError unless a and b share length and sample rate."""
    if len(a) != len(b):
        raise ShapeError(f"length mismatch: {len(a)} vs {len(b)}")
    if a.sample_rate != b.sample_rate:
        raise ShapeError(f"sample rate mismatch: {a.sample_rate} vs {b.sample_rate}")


def interpolate(x0: Waveform, prev: Waveform, r: float) -> Waveform:
    """Convex combination r*x0 + (1-r)*prev of two equal-shape waveforms.

    The endpoints short-circuit: r=1 returns x0 itself and r=0 returns prev
    itself, so no floating-point arithmetic can perturb the fallback candidate.
    """
    same_shape(x0, prev)
    if not (0.0 <= r <= 1.0):
        raise DomainError(f"interpolation coefficient must be in [0, 1], got {r}")
    if r == 1.0:
        return x0
    if r == 0.0:
        return prev
    mixed = r * x0.samples + (1.0 - r) * prev.samples
    return Waveform(mixed, x0.sample_rate)


def hann_window(n: int) -> np.ndarray:
    """Periodic Hann window of length n."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def frame_count(n_samples: int, window_size: int, hop: int) -> int:
    return (n_samples - window_size) // hop + 1


def stft(
    w: Waveform,
    window_size: int = DEFAULT_WINDOW_SIZE,
    hop: int = DEFAULT_HOP,
) -> Spectrogram:
    """Hann-windowed short-time Fourier transform, no padding or centering.

    Frame t covers samples [t*hop, t*hop + window_size); trailing samples that
    do not fill a frame are dropped.
    """
    if hop <= 0 or window_size < hop:
        raise ShapeError(f"need window_size >= hop > 0, got {window_size}, {hop}")
    if window_size > len(w):
        raise ShapeError(f"window_size {window_size} exceeds signal length {len(w)}")
    n_frames = frame_count(len(w), window_size, hop)
    window = hann_window(window_size)
    idx = np.arange(window_size)[None, :] + hop * np.arange(n_frames)[:, None]
    frames = np.fft.rfft(w.samples[idx] * window, axis=1).T
    return Spectrogram(frames, window_size, hop, w.sample_rate)


def stft_frames(samples: np.ndarray, window_size: int, hop: int) -> np.ndarray:
    """Raw Hann-windowed rfft frames of a padded sample array, shape (n_frames, n_bins)."""
    n_frames = frame_count(samples.size, window_size, hop)
    window = hann_window(window_size)
    idx = np.arange(window_size)[None, :] + hop * np.arange(n_frames)[:, None]
    return np.fft.rfft(samples[idx] * window, axis=1)


def overlap_add(frames: np.ndarray, window_size: int, hop: int, length: int) -> np.ndarray:
    """Weighted overlap-add inverse of stft_frames, trimmed/padded to length."""
    n_frames = frames.shape[0]
    window = hann_window(window_size)
    total = (n_frames - 1) * hop + window_size
    out = np.zeros(total)
    norm = np.zeros(total)
    time_frames = np.fft.irfft(frames, n=window_size, axis=1) * window
    window_sq = window * window
    for t in range(n_frames):
        start = t * hop
        out[start : start + window_size] += time_frames[t]
        norm[start : start + window_size] += window_sq
    out = out / np.maximum(norm, 1e-12)
    if total < length:
        out = np.concatenate([out, np.zeros(length - total)])
    return out[:length]


def _read_exact(fh, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise WavFormatError(f"truncated WAV file while reading {what}")
    return data


def load_wav(path) -> Waveform:
    """Read a mono RIFF/WAVE file (16-bit PCM or IEEE float32).

    16-bit samples are scaled by 1/32768; float32 samples pass through
    (exactly representable in the returned float64 array).
    """
    with open(path, "rb") as fh:
        header = _read_exact(fh, 12, "RIFF header")
        if header[:4] != b"RIFF" or header[8:12] != b"WAVE":
            raise WavFormatError(f"{path}: not a RIFF/WAVE file")
        fmt = None
        data = None
        while True:
            chunk_header = fh.read(8)
            if len(chunk_header) < 8:
                break
            chunk_id, chunk_size = chunk_header[:4], struct.unpack("<I", chunk_header[4:])[0]
            if chunk_id == b"fmt ":
                fmt = _read_exact(fh, chunk_size, "fmt chunk")
            elif chunk_id == b"data":
                data = _read_exact(fh, chunk_size, "data chunk")
            else:
                fh.seek(chunk_size + (chunk_size & 1), 1)
            if chunk_size & 1 and chunk_id in (b"fmt ", b"data"):
                fh.seek(1, 1)
            if fmt is not None and data is not None:
                break
    if fmt is None or len(fmt) < 16:
        raise WavFormatError(f"{path}: missing or short fmt chunk")
    if data is None:
        raise WavFormatError(f"{path}: missing data chunk")
    audio_format, n_channels, sample_rate, _, _, bits = struct.unpack("<HHIIHH", fmt[:16])
    if audio_format == _WAVE_FORMAT_EXTENSIBLE and len(fmt) >= 40:
        audio_format = struct.unpack("<H", fmt[24:26])[0]
    if n_channels != 1:
        raise UnsupportedChannelsError(f"{path}: expected mono, got {n_channels} channels")
    if audio_format == _WAVE_FORMAT_PCM and bits == 16:
        if len(data) % 2:
            raise WavFormatError(f"{path}: data chunk is not whole 16-bit samples")
        samples = np.frombuffer(data, dtype="<i2").astype(np.float64) / 32768.0
    elif audio_format == _WAVE_FORMAT_IEEE_FLOAT and bits == 32:
        if len(data) % 4:
            raise WavFormatError(f"{path}: data chunk is not whole float32 samples")
        samples = np.frombuffer(data, dtype="<f4").astype(np.float64)
    else:
        raise UnsupportedEncodingError(
            f"{path}: unsupported encoding (format={audio_format:#x}, bits={bits})"
        )
    return Waveform(samples, int(sample_rate))


def save_wav(w: Waveform, path) -> None:
    """Write a mono IEEE float32 little-endian WAV file."""
    payload = w.samples.astype("<f4").tobytes()
    sr = w.sample_rate
    header = b"".join(
        [
            b"RIFF",
            struct.pack("<I", 36 + len(payload)),
            b"WAVE",
            b"fmt ",
            struct.pack("<IHHIIHH", 16, _WAVE_FORMAT_IEEE_FLOAT, 1, sr, sr * 4, 4, 32),
            b"data",
            struct.pack("<I", len(payload)),
        ]
    )
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(payload)
    except OSError as exc:
        raise OSError(f"failed to write {path}: {exc}") from exc
