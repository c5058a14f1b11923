"""Candidate scoring functions for greedy selection.

The oracle scorer reads the scene's ground truth (upper-bound probe only);
quality and speaker-similarity scorers are non-intrusive and deployable.
The joint scorer combines quality with a saturating speaker-similarity term

    quality + lambda * (1 - exp(-alpha * spksim))

so that identity consistency stops dominating once similarity is already
high. SpkSim is clamped to [0, 1] before the exponential.
"""

from __future__ import annotations

import math

from .audio import Waveform
from .errors import ConfigError
from .metrics import EmbeddingConfig, embed_speaker, quality_proxy, si_sdri
from .scenes import MixtureScene
from .workers import ExternalWorker

DEFAULT_LAMBDA = 2.5
DEFAULT_ALPHA = 4.0


def joint_score(quality: float, spksim: float, lam: float = DEFAULT_LAMBDA, alpha: float = DEFAULT_ALPHA) -> float:
    """Quality plus the saturating speaker-similarity bonus."""
    if lam <= 0 or alpha <= 0:
        raise ConfigError(f"lambda and alpha must be positive, got {lam}, {alpha}")
    spksim = min(max(spksim, 0.0), 1.0)
    return quality + lam * (1.0 - math.exp(-alpha * spksim))


class Scorer:
    """Common surface of all scorer handles."""

    kind: str = "abstract"
    concurrent_safe: bool = True
    needs_scene: bool = False

    def __call__(self, estimate: Waveform, enrollment: Waveform, scene: MixtureScene | None = None) -> float:
        raise NotImplementedError


class OracleSiSdriScorer(Scorer):
    """Intrusive SI-SDR improvement against the scene's ground truth."""

    kind = "oracle_si_sdri"
    needs_scene = True

    def __call__(self, estimate, enrollment, scene=None):
        if scene is None:
            raise ConfigError("oracle scorer needs a scene with ground truth")
        return si_sdri(estimate, scene.mixture, scene.target)


class QualityScorer(Scorer):
    """Non-intrusive quality proxy (spectral-flatness based)."""

    kind = "quality"

    def __call__(self, estimate, enrollment, scene=None):
        return quality_proxy(estimate)


class SpkSimScorer(Scorer):
    """Cosine similarity between estimate and enrollment embeddings.

    The enrollment embedding is cached per waveform object; enrollments are
    immutable and fixed for a whole search, so this saves one embedding per
    candidate without changing any result.
    """

    kind = "spk_sim"

    def __init__(self, config: EmbeddingConfig | None = None):
        self.config = config or EmbeddingConfig()
        self._cache = None  # (enrollment, embedding), swapped atomically

    def _enrollment_embedding(self, enrollment: Waveform):
        cached = self._cache
        if cached is None or cached[0] is not enrollment:
            cached = (enrollment, embed_speaker(enrollment, self.config))
            self._cache = cached
        return cached[1]

    def __call__(self, estimate, enrollment, scene=None):
        return embed_speaker(estimate, self.config).cosine(self._enrollment_embedding(enrollment))


class ExternalScorer(Scorer):
    """Score from an external worker's 'score' op."""

    kind = "external"
    concurrent_safe = False

    def __init__(self, command: list[str], timeout: float = 30.0):
        self.worker = ExternalWorker(command, timeout=timeout)
        if "score" not in self.worker.ops:
            raise ConfigError(
                f"worker {command} does not serve 'score' (declared {self.worker.ops})"
            )

    def __call__(self, estimate, enrollment, scene=None):
        return self.worker.score(estimate.samples, enrollment.samples, estimate.sample_rate)

    def close(self):
        self.worker.close()


class JointScorer(Scorer):
    """Joint selector over pluggable quality and speaker-similarity scorers."""

    kind = "joint"

    def __init__(
        self,
        lam: float = DEFAULT_LAMBDA,
        alpha: float = DEFAULT_ALPHA,
        quality: Scorer | None = None,
        spksim: Scorer | None = None,
    ):
        if lam <= 0 or alpha <= 0:
            raise ConfigError(f"lambda and alpha must be positive, got {lam}, {alpha}")
        self.lam = float(lam)
        self.alpha = float(alpha)
        self.quality = quality if quality is not None else QualityScorer()
        self.spksim = spksim if spksim is not None else SpkSimScorer()

    @property
    def concurrent_safe(self):
        return self.quality.concurrent_safe and self.spksim.concurrent_safe

    def __call__(self, estimate, enrollment, scene=None):
        q = self.quality(estimate, enrollment, scene)
        s = self.spksim(estimate, enrollment, scene)
        return joint_score(q, s, self.lam, self.alpha)


def score(handle: Scorer, estimate: Waveform, enrollment: Waveform, scene: MixtureScene | None = None) -> float:
    """Evaluate one candidate under the given scorer handle."""
    if handle.needs_scene and scene is None:
        raise ConfigError(f"scorer '{handle.kind}' requires a scene")
    return float(handle(estimate, enrollment, scene))
