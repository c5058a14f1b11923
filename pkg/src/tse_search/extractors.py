"""Frozen extractor backends.

Every backend maps (input, enrollment) to an estimate of the target speech
with the same length and sample rate as the input, deterministically:
identical inputs give bit-identical outputs. Built-in backends are pure and
concurrent-safe; the external backend wraps one worker process per handle
and serializes its requests.
"""

from __future__ import annotations

import numpy as np

from .audio import Waveform, l2_norm, overlap_add, stft_frames, vdot
from .errors import DomainError, PreconditionError, ShapeError
from .metrics import mel_filterbank
from .scenes import MixtureScene
from .workers import ExternalWorker


class Extractor:
    """Common surface of all extractor handles."""

    kind: str = "abstract"
    concurrent_safe: bool = True

    def extract(self, waveform: Waveform, enrollment: Waveform) -> Waveform:
        raise NotImplementedError

    def _check(self, waveform: Waveform, enrollment: Waveform) -> None:
        if waveform.sample_rate != enrollment.sample_rate:
            raise ShapeError(
                f"input rate {waveform.sample_rate} != enrollment rate {enrollment.sample_rate}"
            )


def extract(handle: Extractor, waveform: Waveform, enrollment: Waveform) -> Waveform:
    """Run one extraction through the given handle."""
    return handle.extract(waveform, enrollment)


class IdentityExtractor(Extractor):
    """Returns its input unchanged; the trivial backend for plumbing tests."""

    kind = "identity"

    def extract(self, waveform: Waveform, enrollment: Waveform) -> Waveform:
        self._check(waveform, enrollment)
        return waveform


class LeakyLinearExtractor(Extractor):
    """Analytic oracle tied to one scene's orthogonal decomposition.

    The input is least-squares decomposed as a*s + b*i + residual over the
    scene's target s and interference i; the output keeps the target
    coefficient and contracts the interference one by kappa, discarding the
    residual. Repeated r=0 refinement therefore leaves interference kappa^(t+1)
    after t steps, which makes whole search trajectories checkable in closed
    form.
    """

    kind = "leaky_linear"

    def __init__(self, scene: MixtureScene, kappa: float):
        if not (0.0 < kappa <= 1.0):
            raise DomainError(f"kappa must be in (0, 1], got {kappa}")
        s = scene.target.samples
        i = scene.interference.samples
        cos = abs(vdot(s, i)) / max(l2_norm(s) * l2_norm(i), 1e-300)
        if cos >= 1e-6:
            raise PreconditionError(
                f"scene target/interference not orthogonal (|cos|={cos:.2e} >= 1e-6)"
            )
        self.scene = scene
        self.kappa = float(kappa)
        self._gram = np.array([[vdot(s, s), vdot(s, i)], [vdot(i, s), vdot(i, i)]])

    def extract(self, waveform: Waveform, enrollment: Waveform) -> Waveform:
        self._check(waveform, enrollment)
        s = self.scene.target.samples
        i = self.scene.interference.samples
        if len(waveform) != s.size:
            raise ShapeError(f"input length {len(waveform)} != scene length {s.size}")
        rhs = np.array([vdot(waveform.samples, s), vdot(waveform.samples, i)])
        a, b = np.linalg.solve(self._gram, rhs)
        return Waveform(a * s + self.kappa * b * i, waveform.sample_rate)


class SpectralSubtractionExtractor(Extractor):
    """Classical enrollment-informed soft mask in the STFT domain.

    Each frame's mel envelope is compared against the enrollment's mean mel
    envelope; the frame is scaled by max(floor, cos+ similarity) and the
    masked spectrogram is inverted with weighted overlap-add back to the
    input length. Unlike the oracles, this backend never sees the scene
    decomposition.
    """

    kind = "spectral_subtraction"

    def __init__(self, floor: float = 0.1, window_size: int = 512, hop: int = 128, n_mels: int = 40):
        if not (0.0 <= floor < 1.0):
            raise DomainError(f"floor must be in [0, 1), got {floor}")
        self.floor = float(floor)
        self.window_size = int(window_size)
        self.hop = int(hop)
        self.n_mels = int(n_mels)

    def _bank(self, sample_rate: int) -> np.ndarray:
        return mel_filterbank(self.n_mels, self.window_size, sample_rate, 0.0, sample_rate / 2.0)

    def _mel_envelopes(self, samples: np.ndarray, bank: np.ndarray) -> np.ndarray:
        return np.abs(stft_frames(samples, self.window_size, self.hop)) @ bank.T

    def extract(self, waveform: Waveform, enrollment: Waveform) -> Waveform:
        self._check(waveform, enrollment)
        if len(enrollment) < self.window_size:
            raise ShapeError(
                f"enrollment of {len(enrollment)} samples shorter than one "
                f"{self.window_size}-sample window"
            )
        bank = self._bank(waveform.sample_rate)
        profile = np.mean(self._mel_envelopes(enrollment.samples, bank), axis=0)
        profile = profile / max(l2_norm(profile), 1e-12)

        pad = self.window_size
        padded = np.concatenate([np.zeros(pad), waveform.samples, np.zeros(pad)])
        frames = stft_frames(padded, self.window_size, self.hop)
        mel = np.abs(frames) @ bank.T
        norms = np.sqrt(np.sum(mel * mel, axis=1))
        cos = (mel @ profile) / np.maximum(norms, 1e-12)
        gains = np.maximum(self.floor, np.clip(cos, 0.0, None))
        out = overlap_add(frames * gains[:, None], self.window_size, self.hop, padded.size)
        return Waveform(out[pad : pad + len(waveform)], waveform.sample_rate)


class ExternalExtractor(Extractor):
    """Bridge to a pretrained model served by an external worker process."""

    kind = "external"
    concurrent_safe = False

    def __init__(self, command: list[str], timeout: float = 30.0):
        self.worker = ExternalWorker(command, timeout=timeout)
        if "extract" not in self.worker.ops:
            raise PreconditionError(
                f"worker {command} does not serve 'extract' (declared {self.worker.ops})"
            )

    def extract(self, waveform: Waveform, enrollment: Waveform) -> Waveform:
        self._check(waveform, enrollment)
        estimate = self.worker.extract(
            waveform.samples, enrollment.samples, waveform.sample_rate
        )
        return Waveform(estimate, waveform.sample_rate)

    def close(self):
        self.worker.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()


def make_identity() -> IdentityExtractor:
    return IdentityExtractor()


def make_leaky_linear(scene: MixtureScene, kappa: float) -> LeakyLinearExtractor:
    return LeakyLinearExtractor(scene, kappa)


def make_spectral_subtraction(floor: float = 0.1) -> SpectralSubtractionExtractor:
    return SpectralSubtractionExtractor(floor=floor)


def make_external(command: list[str], timeout: float = 30.0) -> ExternalExtractor:
    return ExternalExtractor(command, timeout=timeout)
