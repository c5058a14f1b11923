"""Walk through one multi-step search on a synthetic scene.

The leaky-linear oracle extractor keeps the target and contracts the
interference by kappa on every pass, so the whole search trajectory has a
closed form: with kappa=0.5 and greedy oracle selection, each step adds
another 6.02 dB of SI-SDR improvement. This script runs the real engine and
prints the measured trajectory next to the closed form.
"""

import numpy as np

from tse_search import (
    OracleSiSdriScorer,
    SearchConfig,
    make_leaky_linear,
    run_search,
    si_sdri,
    synthesize_scene,
)


def main():
    scene = synthesize_scene(seed=7, duration=2.0, snr_db=0.0)
    print(f"scene: {scene.mixture.duration:.1f}s at {scene.mixture.sample_rate} Hz, "
          f"mix SNR {scene.snr_db:+.1f} dB")

    extractor = make_leaky_linear(scene, kappa=0.5)
    scorer = OracleSiSdriScorer()
    config = SearchConfig(steps=5, candidates=20, seed=0)

    trajectory = run_search(extractor, scorer, scene, config)

    unit = 20.0 * np.log10(2.0)
    print(f"\n{'step':>4} {'selected r':>10} {'SI-SDRi (dB)':>13} {'closed form':>12}")
    print(f"{0:>4} {'-':>10} {trajectory.initial_score:>13.4f} {unit:>12.4f}")
    for t, record in enumerate(trajectory.steps, start=1):
        measured = si_sdri(record.selected_estimate, scene.mixture, scene.target)
        print(f"{t:>4} {record.selected_r:>10.4f} {measured:>13.4f} {unit * (t + 1):>12.4f}")

    print("\nThe r=0 endpoint wins every step: feeding the previous estimate back")
    print("(rather than re-mixing toward the mixture) maximizes the contraction.")
    print("The r=1 fallback keeps every step at or above the one-step score.")


if __name__ == "__main__":
    main()
