"""Experiment orchestration: dataset synthesis, batch runs, and reporting.

A manifest is JSONL, one entry per line, with paths relative to the manifest
file. Run reports are a CSV of raw per-step rows plus a JSON file of
per-selector per-step aggregate means. All outputs are byte-deterministic
for fixed seeds: no timestamps, full-precision repr floats, rows ordered by
(id, selector, step).
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio import Waveform, load_wav, save_wav
from .errors import ConfigError, MergeError
from .extractors import (
    Extractor,
    make_external,
    make_identity,
    make_leaky_linear,
    make_spectral_subtraction,
)
from .metrics import quality_proxy, si_sdr, si_sdri, spk_sim
from .scenes import MixtureScene, synthesize_scene
from .scorers import (
    ExternalScorer,
    JointScorer,
    OracleSiSdriScorer,
    QualityScorer,
    Scorer,
    SpkSimScorer,
)
from .search import SearchConfig, run_search

CSV_HEADER = ["id", "selector", "step", "selected_r", "score", "si_sdr_db", "si_sdri_db", "spk_sim", "quality"]
SELECTORS = ("oracle", "quality", "spksim", "joint", "external")
AGGREGATE_COLUMNS = ("si_sdr_db", "si_sdri_db", "spk_sim", "quality", "score", "selected_r")


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    mixture_path: Path
    enrollment_path: Path
    target_path: Path | None = None
    interference_path: Path | None = None


@dataclass(frozen=True)
class Manifest:
    entries: list[ManifestEntry] = field(default_factory=list)

    def require_targets(self) -> None:
        missing = [e.id for e in self.entries if e.target_path is None]
        if missing:
            raise ConfigError(
                f"oracle selection requires target_path on every entry; missing on {missing}"
            )


def load_manifest(path) -> Manifest:
    """Parse and validate a JSONL manifest; referenced files must exist."""
    base = Path(path).parent
    entries = []
    seen = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}:{line_no}: invalid JSON: {exc}") from exc
            for key in ("id", "mixture_path", "enrollment_path"):
                if key not in raw:
                    raise ConfigError(f"{path}:{line_no}: missing required field '{key}'")
            entry_id = str(raw["id"])
            if entry_id in seen:
                raise ConfigError(f"{path}:{line_no}: duplicate id '{entry_id}'")
            seen.add(entry_id)
            def resolve(key):
                if raw.get(key) is None:
                    return None
                p = base / raw[key]
                if not p.is_file():
                    raise ConfigError(f"{path}:{line_no}: {key} '{p}' does not exist")
                return p
            entries.append(
                ManifestEntry(
                    id=entry_id,
                    mixture_path=resolve("mixture_path"),
                    enrollment_path=resolve("enrollment_path"),
                    target_path=resolve("target_path"),
                    interference_path=resolve("interference_path"),
                )
            )
    return Manifest(entries=entries)


@dataclass(frozen=True)
class RunConfig:
    """Validated contents of the JSON config file."""

    search: SearchConfig
    lam: float = 2.5
    alpha: float = 4.0
    extractor_kind: str = "identity"
    extractor_params: dict = field(default_factory=dict)
    scorer_workers: dict = field(default_factory=dict)


_TOP_KEYS = {"steps", "candidates", "seed", "include_zero_endpoint", "lambda", "alpha", "extractor", "scorer_workers"}
_EXTRACTOR_KINDS = {"identity", "leaky_linear", "spectral_subtraction", "external"}
_EXTRACTOR_PARAM_KEYS = {
    "identity": set(),
    "leaky_linear": {"kappa"},
    "spectral_subtraction": {"floor"},
    "external": {"command", "timeout"},
}
_SCORER_WORKER_KEYS = {"quality", "spksim", "external"}


def parse_config(raw: dict) -> RunConfig:
    """Validate a config mapping; unknown keys are errors."""
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    search = SearchConfig(
        steps=int(raw.get("steps", 5)),
        candidates=int(raw.get("candidates", 20)),
        include_zero_endpoint=bool(raw.get("include_zero_endpoint", True)),
        seed=int(raw.get("seed", 0)),
    )
    extractor = raw.get("extractor", {"kind": "identity"})
    if not isinstance(extractor, dict) or "kind" not in extractor:
        raise ConfigError("config 'extractor' must be an object with a 'kind'")
    bad = set(extractor) - {"kind", "params"}
    if bad:
        raise ConfigError(f"unknown extractor keys: {sorted(bad)}")
    kind = extractor["kind"]
    if kind not in _EXTRACTOR_KINDS:
        raise ConfigError(f"unknown extractor kind '{kind}' (expected one of {sorted(_EXTRACTOR_KINDS)})")
    params = extractor.get("params", {})
    bad = set(params) - _EXTRACTOR_PARAM_KEYS[kind]
    if bad:
        raise ConfigError(f"unknown {kind} extractor params: {sorted(bad)}")
    workers = raw.get("scorer_workers", {})
    bad = set(workers) - _SCORER_WORKER_KEYS
    if bad:
        raise ConfigError(f"unknown scorer_workers keys: {sorted(bad)}")
    lam = float(raw.get("lambda", 2.5))
    alpha = float(raw.get("alpha", 4.0))
    if lam <= 0 or alpha <= 0:
        raise ConfigError(f"lambda and alpha must be positive, got {lam}, {alpha}")
    return RunConfig(
        search=search,
        lam=lam,
        alpha=alpha,
        extractor_kind=kind,
        extractor_params=dict(params),
        scorer_workers=dict(workers),
    )


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return parse_config(raw)


def build_extractor(config: RunConfig, scene: MixtureScene | None) -> Extractor:
    """Instantiate the configured extractor; leaky_linear binds to the scene."""
    kind = config.extractor_kind
    params = config.extractor_params
    if kind == "identity":
        return make_identity()
    if kind == "leaky_linear":
        if scene is None:
            raise ConfigError("leaky_linear extractor needs entries with ground truth")
        return make_leaky_linear(scene, float(params.get("kappa", 0.5)))
    if kind == "spectral_subtraction":
        return make_spectral_subtraction(float(params.get("floor", 0.1)))
    if kind == "external":
        if "command" not in params:
            raise ConfigError("external extractor needs params.command")
        return make_external(list(params["command"]), timeout=float(params.get("timeout", 30.0)))
    raise ConfigError(f"unknown extractor kind '{kind}'")


def build_scorer(selector: str, config: RunConfig) -> Scorer:
    """Instantiate the selector's scorer, wiring in external workers where configured."""
    if selector not in SELECTORS:
        raise ConfigError(f"unknown selector '{selector}' (expected one of {SELECTORS})")
    workers = config.scorer_workers
    if selector == "oracle":
        return OracleSiSdriScorer()
    if selector == "quality":
        if "quality" in workers:
            return ExternalScorer(list(workers["quality"]))
        return QualityScorer()
    if selector == "spksim":
        if "spksim" in workers:
            return ExternalScorer(list(workers["spksim"]))
        return SpkSimScorer()
    if selector == "joint":
        quality = ExternalScorer(list(workers["quality"])) if "quality" in workers else None
        spksim = ExternalScorer(list(workers["spksim"])) if "spksim" in workers else None
        return JointScorer(lam=config.lam, alpha=config.alpha, quality=quality, spksim=spksim)
    if "external" not in workers:
        raise ConfigError("selector 'external' needs scorer_workers.external in the config")
    return ExternalScorer(list(workers["external"]))


def draw_snrs(seed: int, num_scenes: int, mean_db: float, std_db: float) -> np.ndarray:
    """The per-scene SNR draws used by synth (deterministic in the seed)."""
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x534E52)))
    return rng.normal(mean_db, std_db, size=num_scenes)


def scene_seeds(seed: int, num_scenes: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x5343)))
    return rng.integers(0, 2**62, size=num_scenes)


def cmd_synth(
    num_scenes: int,
    seed: int,
    duration: float,
    sample_rate: int,
    snr_mean_db: float,
    snr_std_db: float,
    out_dir,
) -> Path:
    """Synthesize scenes to WAV files plus a JSONL manifest; returns its path."""
    if num_scenes < 1:
        raise ConfigError(f"num_scenes must be >= 1, got {num_scenes}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    snrs = draw_snrs(seed, num_scenes, snr_mean_db, snr_std_db)
    seeds = scene_seeds(seed, num_scenes)
    manifest_path = out / "manifest.jsonl"
    with open(manifest_path, "w", encoding="utf-8") as fh:
        for n in range(num_scenes):
            scene = synthesize_scene(
                int(seeds[n]), duration=duration, sample_rate=sample_rate, snr_db=float(snrs[n])
            )
            entry_id = f"scene_{n:04d}"
            names = {}
            for part in ("mixture", "target", "interference", "enrollment"):
                filename = f"{entry_id}_{part}.wav"
                save_wav(getattr(scene, part), out / filename)
                names[part] = filename
            fh.write(
                json.dumps(
                    {
                        "id": entry_id,
                        "mixture_path": names["mixture"],
                        "enrollment_path": names["enrollment"],
                        "target_path": names["target"],
                        "interference_path": names["interference"],
                    },
                    sort_keys=True,
                )
                + "\n"
            )
    return manifest_path


def _entry_scene(entry: ManifestEntry) -> tuple[Waveform, Waveform, MixtureScene | None]:
    """Load an entry; returns (mixture, enrollment, scene-or-None)."""
    mixture = load_wav(entry.mixture_path)
    enrollment = load_wav(entry.enrollment_path)
    if entry.target_path is None:
        return mixture, enrollment, None
    target = load_wav(entry.target_path)
    if entry.interference_path is not None:
        interference = load_wav(entry.interference_path)
    else:
        interference = Waveform(mixture.samples - target.samples, mixture.sample_rate)
    energy_s = float(np.sum(target.samples**2))
    energy_i = float(np.sum(interference.samples**2))
    snr_db = 10.0 * np.log10(energy_s / energy_i) if energy_i > 0 else float("inf")
    scene = MixtureScene(
        mixture=mixture,
        target=target,
        interference=interference,
        enrollment=enrollment,
        snr_db=float(snr_db),
    )
    return mixture, enrollment, scene


def _fmt(value) -> str:
    return "" if value is None else repr(float(value))


def _metric_values(estimate: Waveform, enrollment: Waveform, scene: MixtureScene | None) -> dict:
    values = {
        "spk_sim": spk_sim(estimate, enrollment),
        "quality": quality_proxy(estimate),
        "si_sdr_db": None,
        "si_sdri_db": None,
    }
    if scene is not None:
        values["si_sdr_db"] = si_sdr(estimate, scene.target)
        values["si_sdri_db"] = si_sdri(estimate, scene.mixture, scene.target)
    return values


@dataclass
class RunReport:
    """Raw rows plus per-selector per-step aggregate means."""

    steps: int
    rows: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    def aggregates(self) -> dict:
        groups: dict = {}
        for row in self.rows:
            key = (row["selector"], row["step"])
            groups.setdefault(key, []).append(row)
        out: dict = {}
        for (selector, step), rows in sorted(groups.items()):
            cell = {"count": len(rows)}
            for column in AGGREGATE_COLUMNS:
                values = [r[column] for r in rows if r[column] is not None]
                cell[column] = float(np.mean(values)) if values else None
            out.setdefault(selector, {})[str(step)] = cell
        return out

    def to_json(self) -> str:
        payload = {
            "steps": self.steps,
            "aggregates": self.aggregates(),
            "failures": self.failures,
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    def write_csv(self, fh) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in sorted(self.rows, key=lambda r: (r["id"], r["selector"], r["step"])):
            writer.writerow(
                [
                    row["id"],
                    row["selector"],
                    row["step"],
                    _fmt(row["selected_r"]),
                    _fmt(row["score"]),
                    _fmt(row["si_sdr_db"]),
                    _fmt(row["si_sdri_db"]),
                    _fmt(row["spk_sim"]),
                    _fmt(row["quality"]),
                ]
            )


def cmd_run(
    manifest_path,
    config_path,
    selector: str,
    report_path,
    extractor_kind: str | None = None,
    parallel_candidates: bool = False,
) -> RunReport:
    """Run the search over every manifest entry and write CSV + JSON reports.

    Per-entry failures are recorded and skipped (they poison the exit status
    but not the batch); configuration problems abort before any processing.
    """
    manifest = load_manifest(manifest_path)
    config = load_config(config_path)
    if extractor_kind is not None:
        config = RunConfig(
            search=config.search,
            lam=config.lam,
            alpha=config.alpha,
            extractor_kind=extractor_kind,
            extractor_params=config.extractor_params if extractor_kind == config.extractor_kind else {},
            scorer_workers=config.scorer_workers,
        )
    if selector not in SELECTORS:
        raise ConfigError(f"unknown selector '{selector}' (expected one of {SELECTORS})")
    if selector == "oracle":
        manifest.require_targets()
    if config.extractor_kind == "leaky_linear":
        manifest.require_targets()

    scorer = build_scorer(selector, config)
    shared_extractor = (
        None if config.extractor_kind == "leaky_linear" else build_extractor(config, None)
    )

    report = RunReport(steps=config.search.steps)
    try:
        for entry in manifest.entries:
            try:
                mixture, enrollment, scene = _entry_scene(entry)
                extractor = shared_extractor or build_extractor(config, scene)
                sample = scene if scene is not None else (mixture, enrollment)
                trajectory = run_search(
                    extractor, scorer, sample, config.search, parallel=parallel_candidates
                )
                base = {"id": entry.id, "selector": selector}
                report.rows.append(
                    base
                    | {"step": 0, "selected_r": None, "score": None}
                    | _metric_values(trajectory.initial, enrollment, scene)
                )
                for t, record in enumerate(trajectory.steps, start=1):
                    report.rows.append(
                        base
                        | {"step": t, "selected_r": record.selected_r, "score": record.selected_score}
                        | _metric_values(record.selected_estimate, enrollment, scene)
                    )
            except Exception as exc:  # per-entry failure; keep going
                report.failures.append({"id": entry.id, "error": f"{type(exc).__name__}: {exc}"})
    finally:
        _close_backends(scorer, shared_extractor)

    report_path = Path(report_path)
    report_path.parent.mkdir(parents=True, exist_ok=True)
    with open(report_path, "w", encoding="utf-8", newline="") as fh:
        report.write_csv(fh)
    with open(report_path.with_suffix(".json"), "w", encoding="utf-8") as fh:
        fh.write(report.to_json())
    return report


def _close_backends(*objects) -> None:
    for obj in objects:
        for handle in (obj, getattr(obj, "quality", None), getattr(obj, "spksim", None)):
            if handle is not None and callable(getattr(handle, "close", None)):
                handle.close()


def _load_report_json(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def cmd_report(report_paths: list) -> str:
    """Merge per-run aggregate JSONs into one per-selector per-step table."""
    reports = [_load_report_json(Path(p).with_suffix(".json")) for p in report_paths]
    steps = {r["steps"] for r in reports}
    if len(steps) != 1:
        raise MergeError(f"reports disagree on step count: {sorted(steps)}")
    (n_steps,) = steps

    columns = ("si_sdri_db", "quality", "spk_sim")
    lines = []
    header = f"{'selector':<10} {'step':>4} " + " ".join(f"{c:>12}" for c in columns)
    lines.append(header)
    lines.append("-" * len(header))

    def cell(agg, step, column):
        value = agg.get(str(step), {}).get(column)
        return f"{value:>12.4f}" if value is not None else f"{'-':>12}"

    baseline = reports[0]["aggregates"]
    first_selector = sorted(baseline)[0]
    lines.append(
        f"{'baseline':<10} {0:>4} " + " ".join(cell(baseline[first_selector], 0, c) for c in columns)
    )
    for rep in reports:
        for selector in sorted(rep["aggregates"]):
            agg = rep["aggregates"][selector]
            for step in range(1, n_steps + 1):
                lines.append(
                    f"{selector:<10} {step:>4} " + " ".join(cell(agg, step, c) for c in columns)
                )
    return "\n".join(lines) + "\n"


def report_csv(report_paths: list) -> str:
    """The merged table as CSV text."""
    reports = [_load_report_json(Path(p).with_suffix(".json")) for p in report_paths]
    steps = {r["steps"] for r in reports}
    if len(steps) != 1:
        raise MergeError(f"reports disagree on step count: {sorted(steps)}")
    (n_steps,) = steps
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["selector", "step", "si_sdri_db", "quality", "spk_sim"])
    for rep in reports:
        for selector in sorted(rep["aggregates"]):
            agg = rep["aggregates"][selector]
            for step in range(0, n_steps + 1):
                cell = agg.get(str(step), {})
                writer.writerow(
                    [selector, step]
                    + [_fmt(cell.get(c)) for c in ("si_sdri_db", "quality", "spk_sim")]
                )
    return buffer.getvalue()


def cmd_analyze(
    manifest_path,
    config_path,
    mode: str,
    out_path,
    selector: str = "oracle",
    grid_size: int = 101,
    epsilon_r: float = 0.05,
    trials: int = 1000,
) -> dict:
    """Reliability-lab analyses over the manifest's scenes; writes JSON."""
    from .reliability import (
        check_deterministic_bound,
        check_variance_bound,
        estimate_lipschitz,
        trajectory_lipschitz,
    )

    if mode not in ("lipschitz", "det_bound", "var_bound"):
        raise ConfigError(f"unknown analyze mode '{mode}'")
    manifest = load_manifest(manifest_path)
    config = load_config(config_path)
    if selector == "oracle" or config.extractor_kind == "leaky_linear":
        manifest.require_targets()
    scorer = build_scorer(selector, config)

    per_entry = []
    try:
        for entry in manifest.entries:
            mixture, enrollment, scene = _entry_scene(entry)
            extractor = build_extractor(config, scene)
            sample = scene if scene is not None else (mixture, enrollment)
            if mode == "lipschitz":
                # Probe the segment a search would traverse: mixture to the
                # one-step output. Extractors that return the input unchanged
                # make that segment degenerate; fall back to the target (or
                # silence) so the probe stays well defined.
                probe_end = extractor.extract(mixture, enrollment)
                if float(np.sum((mixture.samples - probe_end.samples) ** 2)) < 1e-18:
                    probe_end = (
                        scene.target
                        if scene is not None
                        else Waveform(np.zeros(len(mixture)), mixture.sample_rate)
                    )
                est = estimate_lipschitz(
                    extractor, scorer, mixture, probe_end, enrollment, grid_size, scene=scene
                )
                per_entry.append(
                    {"id": entry.id, "L_f": est.L_f, "L_R": est.L_R, "probe_count": est.probe_count}
                )
            elif mode == "det_bound":
                trajectory = run_search(extractor, scorer, sample, config.search)
                est = trajectory_lipschitz(
                    extractor, scorer, mixture, enrollment, trajectory, grid_size, scene=scene
                )
                check = check_deterministic_bound(
                    trajectory, est, scorer, mixture, enrollment, scene=scene
                )
                per_entry.append(
                    {"id": entry.id, "max_ratio": check.max_ratio, "pairs": len(check.pairs)}
                )
            else:
                check = check_variance_bound(
                    extractor, scorer, scene, config.search, epsilon_r, trials, grid_size=grid_size
                )
                per_entry.append(
                    {
                        "id": entry.id,
                        "variance_lhs": check.variance_lhs,
                        "variance_rhs": check.variance_rhs,
                    }
                )
    finally:
        _close_backends(scorer)

    summary: dict = {"mode": mode, "entries": len(per_entry)}
    if mode == "lipschitz":
        summary["max_L_f"] = max(e["L_f"] for e in per_entry)
        summary["max_L_R"] = max(e["L_R"] for e in per_entry)
    elif mode == "det_bound":
        ratios = [e["max_ratio"] for e in per_entry if e["max_ratio"] is not None]
        summary["max_ratio"] = max(ratios) if ratios else None
    else:
        ratios = [
            e["variance_lhs"] / e["variance_rhs"] for e in per_entry if e["variance_rhs"]
        ]
        summary["max_variance_ratio"] = max(ratios) if ratios else None

    payload = {"mode": mode, "per_entry": per_entry, "summary": summary}
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return payload
