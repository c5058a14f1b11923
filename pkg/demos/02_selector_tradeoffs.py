"""Compare candidate selectors on one synthetic benchmark.

Generates a small scene set, runs the search once per selector with the
spectral-subtraction extractor, and prints the merged per-selector per-step
table. The optimized column always ends at or above its step-0 baseline
(the greedy fallback guarantee); the other columns may drift, which is the
single-metric bias the joint selector is meant to soften.
"""

import json
import tempfile
from pathlib import Path

from tse_search.harness import cmd_report, cmd_run, cmd_synth


def main():
    workdir = Path(tempfile.mkdtemp(prefix="tse_selectors_"))
    manifest = cmd_synth(
        num_scenes=8, seed=3, duration=1.0, sample_rate=16000,
        snr_mean_db=0.0, snr_std_db=3.6, out_dir=workdir / "scenes",
    )
    config = workdir / "config.json"
    config.write_text(json.dumps({
        "steps": 5,
        "candidates": 8,
        "seed": 1,
        "lambda": 2.5,
        "alpha": 4.0,
        "extractor": {"kind": "spectral_subtraction", "params": {"floor": 0.1}},
    }))

    reports = []
    for selector in ("oracle", "quality", "spksim", "joint"):
        path = workdir / f"{selector}.csv"
        cmd_run(manifest, config, selector, path)
        reports.append(path)
        print(f"ran selector={selector}")

    print()
    print(cmd_report(reports))
    print(f"raw rows and aggregates are under {workdir}")


if __name__ == "__main__":
    main()
