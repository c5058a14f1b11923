"""Evaluation and selection metrics.

Intrusive: SI-SDR and SI-SDR improvement against a clean reference.
Non-intrusive: a deterministic spectral speaker embedding with cosine
similarity, and a spectral-flatness quality proxy on a 1-to-5 scale. The
two non-intrusive quantities are desk-scale stand-ins; neural predictors
plug in through the external worker protocol instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio import Waveform, hann_window, l2_norm, same_shape, stft_frames, vdot
from .errors import DegenerateReferenceError, ShapeError

# Relative numerical floor: EPS times the centered estimate energy is added to
# both the target and noise energies. Keeps SI-SDR finite (self-comparison caps
# at 10*log10((1+EPS)/EPS) ~ 80 dB) while leaving scale invariance exact.
EPS = 1e-8
# Centered reference energy below this is treated as silence.
EPS_ENERGY = 1e-12

_SILENT_ESTIMATE_DB = 10.0 * np.log10(EPS / (1.0 + EPS))


def si_sdr(estimate: Waveform, reference: Waveform) -> float:
    """Scale-invariant signal-to-distortion ratio in dB.

    Both signals are mean-centered; the reference is scaled by the projection
    coefficient of the estimate onto it, and the residual counts as noise.
    """
    same_shape(estimate, reference)
    e = estimate.samples - np.mean(estimate.samples)
    r = reference.samples - np.mean(reference.samples)
    ref_energy = vdot(r, r)
    if ref_energy < EPS_ENERGY:
        raise DegenerateReferenceError(
            f"reference energy {ref_energy:.3e} below floor {EPS_ENERGY:.0e}"
        )
    est_energy = vdot(e, e)
    if est_energy == 0.0:
        return float(_SILENT_ESTIMATE_DB)
    alpha = vdot(e, r) / ref_energy
    target = alpha * r
    noise = e - target
    floor = EPS * est_energy
    return float(10.0 * np.log10((vdot(target, target) + floor) / (vdot(noise, noise) + floor)))


def si_sdri(estimate: Waveform, mixture: Waveform, reference: Waveform) -> float:
    """SI-SDR improvement of the estimate over the mixture, in dB."""
    return si_sdr(estimate, reference) - si_sdr(mixture, reference)


@dataclass(frozen=True)
class EmbeddingConfig:
    """Log-mel statistics embedding parameters."""

    n_mels: int = 40
    window_ms: float = 25.0
    hop_ms: float = 10.0
    fft_size: int = 512
    fmin_hz: float = 0.0
    fmax_hz: float | None = None  # defaults to Nyquist


@dataclass(frozen=True)
class SpeakerEmbedding:
    """L2-normalized per-band mean/std log-mel statistics."""

    vector: np.ndarray

    def __post_init__(self):
        vector = np.asarray(self.vector, dtype=np.float64)
        vector.setflags(write=False)
        object.__setattr__(self, "vector", vector)

    def cosine(self, other: "SpeakerEmbedding") -> float:
        return float(np.clip(vdot(self.vector, other.vector), -1.0, 1.0))


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(n_mels: int, fft_size: int, sample_rate: int, fmin: float, fmax: float) -> np.ndarray:
    """Triangular mel filterbank, shape (n_mels, fft_size//2 + 1)."""
    edges_hz = _mel_to_hz(np.linspace(_hz_to_mel(fmin), _hz_to_mel(fmax), n_mels + 2))
    bin_hz = np.arange(fft_size // 2 + 1) * (sample_rate / fft_size)
    bank = np.zeros((n_mels, bin_hz.size))
    for m in range(n_mels):
        lo, center, hi = edges_hz[m], edges_hz[m + 1], edges_hz[m + 2]
        up = (bin_hz - lo) / max(center - lo, 1e-9)
        down = (hi - bin_hz) / max(hi - center, 1e-9)
        bank[m] = np.clip(np.minimum(up, down), 0.0, 1.0)
    return bank


def _mel_frames(w: Waveform, config: EmbeddingConfig) -> np.ndarray:
    """Mel magnitude envelopes, shape (n_frames, n_mels)."""
    window = int(round(config.window_ms * w.sample_rate / 1000.0))
    hop = int(round(config.hop_ms * w.sample_rate / 1000.0))
    if window > len(w):
        raise ShapeError(
            f"waveform of {len(w)} samples shorter than one {window}-sample analysis window"
        )
    fft_size = max(config.fft_size, window)
    n_frames = (len(w) - window) // hop + 1
    win = hann_window(window)
    idx = np.arange(window)[None, :] + hop * np.arange(n_frames)[:, None]
    spectra = np.abs(np.fft.rfft(w.samples[idx] * win, n=fft_size, axis=1))
    fmax = config.fmax_hz if config.fmax_hz is not None else w.sample_rate / 2.0
    bank = mel_filterbank(config.n_mels, fft_size, w.sample_rate, config.fmin_hz, fmax)
    return spectra @ bank.T


_DEFAULT_EMBEDDING_CONFIG = EmbeddingConfig()


def embed_speaker(w: Waveform, config: EmbeddingConfig = _DEFAULT_EMBEDDING_CONFIG) -> SpeakerEmbedding:
    """Deterministic spectral speaker embedding.

    Per-band mean and standard deviation of the log-mel spectrogram over time,
    concatenated and L2-normalized. Silence maps to a fixed canonical unit
    vector instead of erroring, so near-silent candidates stay scoreable.
    """
    mel = _mel_frames(w, config)
    log_mel = np.log(mel + 1e-10)
    stats = np.concatenate([np.mean(log_mel, axis=0), np.std(log_mel, axis=0)])
    norm = l2_norm(stats)
    if norm < 1e-12:
        fallback = np.zeros(2 * config.n_mels)
        fallback[0] = 1.0
        return SpeakerEmbedding(fallback)
    return SpeakerEmbedding(stats / norm)


def spk_sim(a: Waveform, b: Waveform, config: EmbeddingConfig = _DEFAULT_EMBEDDING_CONFIG) -> float:
    """Cosine similarity of the speaker embeddings of two waveforms."""
    return embed_speaker(a, config).cosine(embed_speaker(b, config))


def quality_proxy(w: Waveform, window_size: int = 512, hop: int = 128) -> float:
    """Spectral-flatness quality score in [1, 5].

    Mean per-frame flatness (geometric over arithmetic mean of the magnitude
    spectrum) mapped through 5 - 4*SF: harmonic signals score high, noise-like
    signals low. Scale-free by construction.
    """
    if window_size > len(w):
        raise ShapeError(f"waveform shorter than one {window_size}-sample window")
    spectra = np.abs(stft_frames(w.samples, window_size, hop))
    arith = np.mean(spectra, axis=1)
    flatness = np.ones(spectra.shape[0])
    live = arith > 0.0
    if np.any(live):
        # Relative regularizer keeps the log finite and flatness scale-invariant.
        reg = 1e-12 * arith[live, None]
        geo = np.exp(np.mean(np.log(spectra[live] + reg), axis=1))
        flatness[live] = geo / (arith[live] * (1.0 + 1e-12))
    sf = float(np.mean(flatness))
    return float(np.clip(5.0 - 4.0 * sf, 1.0, 5.0))
