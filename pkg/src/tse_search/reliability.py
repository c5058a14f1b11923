"""Empirical reliability analysis of search trajectories.

Estimates local Lipschitz constants of the extractor and scorer along the
interpolation segment actually searched, then checks the two error bounds
that follow from them: the deterministic bound

    |R(s_tilde) - R(s_star)| <= L_R * L_f * |r_tilde - r_star| * ||x0 - prev||

and its variance form under a zero-mean perturbation of the selected
coefficient. Constants are local by design; global constants for neural
extractors are unavailable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .audio import Waveform, interpolate, l2_norm
from .errors import ConfigError, DomainError, PreconditionError
from .extractors import Extractor
from .scenes import MixtureScene
from .scorers import Scorer, score
from .search import Trajectory, make_schedule, one_step, search_step

_DEGENERATE_DISTANCE = 1e-12


@dataclass(frozen=True)
class LipschitzEstimate:
    """Max finite-difference ratios over a probe grid."""

    L_f: float
    L_R: float
    probe_count: int
    probe_spec: str

    def __post_init__(self):
        if not (np.isfinite(self.L_f) and self.L_f >= 0):
            raise ValueError(f"L_f must be finite and non-negative, got {self.L_f}")
        if not (np.isfinite(self.L_R) and self.L_R >= 0):
            raise ValueError(f"L_R must be finite and non-negative, got {self.L_R}")


@dataclass(frozen=True)
class PairRecord:
    """One candidate pair compared against the bound."""

    step: int
    delta_r: float
    lhs: float
    rhs: float
    ratio: float | None


@dataclass(frozen=True)
class BoundCheckReport:
    pairs: list = field(default_factory=list)
    max_ratio: float | None = None
    variance_lhs: float | None = None
    variance_rhs: float | None = None

    def to_json(self) -> str:
        payload = {
            "pairs": [asdict(p) for p in self.pairs],
            "max_ratio": self.max_ratio,
            "variance_lhs": self.variance_lhs,
            "variance_rhs": self.variance_rhs,
        }
        return json.dumps(payload, indent=2, sort_keys=True)


def estimate_lipschitz(
    extractor: Extractor,
    scorer: Scorer,
    x0: Waveform,
    prev: Waveform,
    enrollment: Waveform,
    grid_size: int,
    scene: MixtureScene | None = None,
    extra_coefficients=(),
) -> LipschitzEstimate:
    """Probe the interpolation segment on a uniform r-grid (optionally refined
    with extra coefficients, e.g. a step's candidate set) and take the largest
    adjacent finite-difference ratios.

    Pairs closer than 1e-12 in input (for L_f) or output (for L_R) space are
    skipped to avoid 0/0.
    """
    if grid_size < 3:
        raise DomainError(f"grid_size must be >= 3, got {grid_size}")
    grid = np.unique(np.concatenate([np.linspace(0.0, 1.0, grid_size), np.asarray(extra_coefficients, dtype=np.float64)]))
    if np.any(grid < 0.0) or np.any(grid > 1.0):
        raise DomainError("probe coefficients must lie in [0, 1]")

    inputs = [interpolate(x0, prev, float(r)) for r in grid]
    outputs = [extractor.extract(u, enrollment) for u in inputs]
    scores = [score(scorer, y, enrollment, scene) for y in outputs]

    l_f = 0.0
    l_r = 0.0
    usable_pairs = 0
    for j in range(len(grid) - 1):
        du = l2_norm(inputs[j + 1].samples - inputs[j].samples)
        if du >= _DEGENERATE_DISTANCE:
            usable_pairs += 1
            dy = l2_norm(outputs[j + 1].samples - outputs[j].samples)
            l_f = max(l_f, dy / du)
            if dy >= _DEGENERATE_DISTANCE:
                l_r = max(l_r, abs(scores[j + 1] - scores[j]) / dy)
    if usable_pairs == 0:
        raise PreconditionError(
            "all probe pairs are degenerate (x0 equals prev); no segment to measure"
        )
    return LipschitzEstimate(
        L_f=l_f,
        L_R=l_r,
        probe_count=int(grid.size),
        probe_spec=f"uniform {grid_size}-point grid on [0,1]"
        + (f" refined with {len(grid) - grid_size} extra coefficients" if grid.size > grid_size else ""),
    )


def trajectory_lipschitz(
    extractor: Extractor,
    scorer: Scorer,
    x0: Waveform,
    enrollment: Waveform,
    trajectory: Trajectory,
    grid_size: int,
    scene: MixtureScene | None = None,
) -> LipschitzEstimate:
    """Worst-case constants over every step's segment, with each step's grid
    refined by that step's candidate coefficients (so the deterministic bound
    is provable by telescoping over grid intervals)."""
    l_f = 0.0
    l_r = 0.0
    probes = 0
    for t, record in enumerate(trajectory.steps, start=1):
        prev = trajectory.previous_estimate(t)
        if l2_norm(x0.samples - prev.samples) < _DEGENERATE_DISTANCE:
            continue
        est = estimate_lipschitz(
            extractor, scorer, x0, prev, enrollment, grid_size,
            scene=scene, extra_coefficients=record.schedule.coefficients,
        )
        l_f = max(l_f, est.L_f)
        l_r = max(l_r, est.L_R)
        probes += est.probe_count
    return LipschitzEstimate(
        L_f=l_f,
        L_R=l_r,
        probe_count=probes,
        probe_spec=f"per-step uniform {grid_size}-point grids refined with candidate coefficients",
    )


def check_deterministic_bound(
    trajectory: Trajectory,
    estimate: LipschitzEstimate,
    scorer: Scorer | None = None,
    x0: Waveform | None = None,
    enrollment: Waveform | None = None,
    scene: MixtureScene | None = None,
) -> BoundCheckReport:
    """Compare every non-selected candidate against the selected one, step by
    step, using the recorded scores as the left-hand side.

    When a scorer and enrollment are supplied, the fallback candidate's
    recorded score is re-verified against a fresh scoring of the one-step
    output (a determinism integrity check).
    """
    if x0 is None:
        raise ConfigError("x0 (the original mixture) is required to recompute segment lengths")
    if scorer is not None and enrollment is not None:
        fresh = score(scorer, trajectory.initial, enrollment, scene)
        for record in trajectory.steps:
            if record.candidate_scores[0] != fresh:
                raise ConfigError(
                    "recorded fallback score disagrees with a fresh scoring of the "
                    "one-step output; trajectory and scorer do not match"
                )
    pairs = []
    max_ratio = None
    for t, record in enumerate(trajectory.steps, start=1):
        scores = record.candidate_scores
        if scores is None or len(scores) != len(record.schedule):
            raise ConfigError(f"step {t} lacks full candidate score records")
        seg = l2_norm(x0.samples - trajectory.previous_estimate(t).samples)
        r_star = record.selected_r
        best = record.selected_score
        for k, r in enumerate(record.schedule.coefficients):
            if k == record.selected_index:
                continue
            delta = abs(float(r) - r_star)
            lhs = abs(float(scores[k]) - best)
            rhs = estimate.L_R * estimate.L_f * delta * seg
            ratio = lhs / rhs if rhs > 0 else None
            pairs.append(PairRecord(step=t, delta_r=delta, lhs=lhs, rhs=rhs, ratio=ratio))
            if ratio is not None and (max_ratio is None or ratio > max_ratio):
                max_ratio = ratio
    return BoundCheckReport(pairs=pairs, max_ratio=max_ratio)


def check_variance_bound(
    extractor: Extractor,
    scorer: Scorer,
    scene: MixtureScene,
    config,
    epsilon_r: float,
    trials: int,
    estimate: LipschitzEstimate | None = None,
    grid_size: int = 401,
    rng_seed: int = 0,
) -> BoundCheckReport:
    """Monte-Carlo check of the variance bound at the first step's state.

    Delta-r is drawn uniform on (-sqrt(3)*eps, +sqrt(3)*eps) — zero mean with
    variance eps^2 — added to the selected coefficient, clamped to [0, 1], and
    the scorer is re-evaluated at the perturbed selection.
    """
    if epsilon_r < 0:
        raise DomainError(f"epsilon_r must be >= 0, got {epsilon_r}")
    if trials < 100:
        raise DomainError(f"need at least 100 trials, got {trials}")
    x0, enrollment = scene.mixture, scene.enrollment
    prev = one_step(extractor, x0, enrollment)
    record = search_step(extractor, scorer, x0, enrollment, prev, make_schedule(config, 1), scene=scene)
    r_star = record.selected_r
    seg = l2_norm(x0.samples - prev.samples)
    if estimate is None:
        estimate = estimate_lipschitz(
            extractor, scorer, x0, prev, enrollment, grid_size, scene=scene,
        )
    rhs = (estimate.L_R * estimate.L_f) ** 2 * seg**2 * epsilon_r**2

    if epsilon_r == 0.0:
        return BoundCheckReport(variance_lhs=0.0, variance_rhs=rhs)

    rng = np.random.default_rng(np.random.SeedSequence((rng_seed, trials)))
    half_width = np.sqrt(3.0) * epsilon_r
    deltas = rng.uniform(-half_width, half_width, size=trials)
    values = np.empty(trials)
    for n, delta in enumerate(deltas):
        r = min(max(r_star + delta, 0.0), 1.0)
        candidate = interpolate(x0, prev, float(r))
        values[n] = score(scorer, extractor.extract(candidate, enrollment), enrollment, scene)
    return BoundCheckReport(
        variance_lhs=float(np.var(values)),
        variance_rhs=rhs,
    )


def segment_length_series(trajectory: Trajectory, x0: Waveform) -> list[float]:
    """||x0 - s_hat_{t-1}|| for t = 1..T, the factor controlling both bounds."""
    if not trajectory.steps:
        return [l2_norm(x0.samples - trajectory.initial.samples)]
    return [
        l2_norm(x0.samples - trajectory.previous_estimate(t).samples)
        for t in range(1, len(trajectory.steps) + 1)
    ]


def verify_interpolation_identity(
    trajectory: Trajectory, x0: Waveform, rtol: float = 1e-6
) -> float:
    """Re-verify the input-deviation identity on a stored trajectory.

    For every pair of coefficients in every recorded schedule, the distance
    between the two candidate inputs must equal |r1 - r2| times the segment
    length. Returns the worst relative error seen.
    """
    worst = 0.0
    for t, record in enumerate(trajectory.steps, start=1):
        prev = trajectory.previous_estimate(t)
        seg = l2_norm(x0.samples - prev.samples)
        if seg < _DEGENERATE_DISTANCE:
            continue
        rs = record.schedule.coefficients
        for a in range(len(rs)):
            for b in range(a + 1, len(rs)):
                lhs = l2_norm(
                    interpolate(x0, prev, float(rs[a])).samples
                    - interpolate(x0, prev, float(rs[b])).samples
                )
                expected = abs(float(rs[a]) - float(rs[b])) * seg
                if expected < _DEGENERATE_DISTANCE:
                    continue
                err = abs(lhs - expected) / expected
                if err > worst:
                    worst = err
                if err > rtol:
                    raise AssertionError(
                        f"interpolation identity violated at step {t}: "
                        f"relative error {err:.3e} for pair ({rs[a]}, {rs[b]})"
                    )
    return worst
