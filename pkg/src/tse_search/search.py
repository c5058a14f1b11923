"""Multi-step greedy candidate search over the mixture-estimate bridge.

One refinement step interpolates candidate inputs between the original
mixture and the previous estimate, re-extracts each candidate with the
frozen extractor, scores the outputs, and keeps the argmax (smallest index
on ties). Because the first candidate is pinned to r=1 — whose extraction
reproduces the one-step output bit-exactly — the selected score can never
fall below the one-step score, for any scorer.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .audio import Waveform, interpolate
from .errors import ConfigError
from .extractors import Extractor
from .scenes import MixtureScene
from .scorers import Scorer, score


@dataclass(frozen=True)
class SearchConfig:
    """Knobs of the multi-step search."""

    steps: int = 5
    candidates: int = 20
    include_zero_endpoint: bool = True
    seed: int = 0
    tolerance: float = 1e-7
    early_stop: bool = False

    def __post_init__(self):
        if self.steps < 1:
            raise ConfigError(f"steps must be >= 1, got {self.steps}")
        minimum = 2 if self.include_zero_endpoint else 1
        if self.candidates < minimum:
            raise ConfigError(
                f"candidates must be >= {minimum} with include_zero_endpoint="
                f"{self.include_zero_endpoint}, got {self.candidates}"
            )
        if self.seed < 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}")
        if self.tolerance < 0:
            raise ConfigError(f"tolerance must be >= 0, got {self.tolerance}")


@dataclass(frozen=True)
class CandidateSchedule:
    """Interpolation coefficients for one step; index 0 is always r=1."""

    step: int
    coefficients: np.ndarray

    def __post_init__(self):
        coefficients = np.asarray(self.coefficients, dtype=np.float64)
        coefficients.setflags(write=False)
        object.__setattr__(self, "coefficients", coefficients)

    def __len__(self) -> int:
        return self.coefficients.size


@dataclass(frozen=True)
class StepRecord:
    """Everything one step produced."""

    schedule: CandidateSchedule
    candidate_scores: np.ndarray
    selected_index: int
    selected_r: float
    selected_estimate: Waveform
    selected_score: float


@dataclass(frozen=True)
class Trajectory:
    """Full record of one search run."""

    initial: Waveform
    initial_score: float
    steps: list[StepRecord] = field(default_factory=list)

    @property
    def final(self) -> Waveform:
        return self.steps[-1].selected_estimate if self.steps else self.initial

    def previous_estimate(self, t: int) -> Waveform:
        """The estimate fed into step t (1-based), i.e. s_hat_{t-1}."""
        return self.initial if t == 1 else self.steps[t - 2].selected_estimate


def make_schedule(config: SearchConfig, t: int) -> CandidateSchedule:
    """Deterministic coefficients for step t: forced endpoints plus fresh
    uniform draws seeded by (seed, t)."""
    if not (1 <= t <= config.steps):
        raise ConfigError(f"step index {t} outside 1..{config.steps}")
    k = config.candidates
    coefficients = np.empty(k)
    coefficients[0] = 1.0
    n_free = k - 1
    if config.include_zero_endpoint:
        coefficients[-1] = 0.0
        n_free -= 1
    if n_free > 0:
        rng = np.random.default_rng(np.random.SeedSequence((config.seed, t)))
        coefficients[1 : 1 + n_free] = rng.random(n_free)
    return CandidateSchedule(step=t, coefficients=coefficients)


def one_step(extractor: Extractor, mixture: Waveform, enrollment: Waveform) -> Waveform:
    """Standard single-pass inference."""
    return extractor.extract(mixture, enrollment)


def _with_context(exc: Exception, context: str) -> Exception:
    try:
        return type(exc)(f"{context}: {exc}")
    except Exception:
        return RuntimeError(f"{context}: {exc}")


def _resolve_sample(sample):
    if isinstance(sample, MixtureScene):
        return sample.mixture, sample.enrollment, sample
    mixture, enrollment = sample
    return mixture, enrollment, None


def search_step(
    extractor: Extractor,
    scorer: Scorer,
    x0: Waveform,
    enrollment: Waveform,
    prev: Waveform,
    schedule: CandidateSchedule,
    scene: MixtureScene | None = None,
    parallel: bool = False,
) -> StepRecord:
    """Evaluate one schedule and greedily select the best candidate."""

    def evaluate(k: int):
        try:
            r = float(schedule.coefficients[k])
            candidate_input = interpolate(x0, prev, r)
            estimate = extractor.extract(candidate_input, enrollment)
            return estimate, score(scorer, estimate, enrollment, scene)
        except Exception as exc:
            raise _with_context(exc, f"step {schedule.step}, candidate {k}") from exc

    indices = range(len(schedule))
    if parallel and extractor.concurrent_safe and scorer.concurrent_safe:
        with ThreadPoolExecutor() as pool:
            evaluated = list(pool.map(evaluate, indices))
    else:
        evaluated = [evaluate(k) for k in indices]

    scores = np.array([s for _, s in evaluated])
    selected = int(np.argmax(scores))
    return StepRecord(
        schedule=schedule,
        candidate_scores=scores,
        selected_index=selected,
        selected_r=float(schedule.coefficients[selected]),
        selected_estimate=evaluated[selected][0],
        selected_score=float(scores[selected]),
    )


def run_search(
    extractor: Extractor,
    scorer: Scorer,
    sample,
    config: SearchConfig = SearchConfig(),
    parallel: bool = False,
) -> Trajectory:
    """Run the full multi-step search.

    ``sample`` is either a MixtureScene or a (mixture, enrollment) pair.
    With ``early_stop`` the loop ends once a step improves the selected score
    by less than ``tolerance`` while selecting the r=1 fallback.
    """
    x0, enrollment, scene = _resolve_sample(sample)
    initial = one_step(extractor, x0, enrollment)
    initial_score = score(scorer, initial, enrollment, scene)

    steps: list[StepRecord] = []
    prev = initial
    prev_score = initial_score
    for t in range(1, config.steps + 1):
        record = search_step(
            extractor, scorer, x0, enrollment, prev, make_schedule(config, t),
            scene=scene, parallel=parallel,
        )
        if record.selected_score < initial_score:
            raise RuntimeError(
                f"non-decreasing guarantee violated at step {t} "
                f"({record.selected_score} < {initial_score}); "
                "the extractor or scorer is not deterministic"
            )
        steps.append(record)
        improvement = record.selected_score - prev_score
        prev = record.selected_estimate
        prev_score = record.selected_score
        if config.early_stop and improvement < config.tolerance and record.selected_r == 1.0:
            break
    return Trajectory(initial=initial, initial_score=initial_score, steps=steps)
