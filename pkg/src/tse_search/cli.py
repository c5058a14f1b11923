"""Command-line entry points.

Exit statuses: 0 success, 1 partial per-entry failures, 2 usage or
configuration errors.
"""

from __future__ import annotations

import argparse
import sys

from .errors import ConfigError, MergeError
from .harness import cmd_analyze, cmd_report, cmd_run, cmd_synth, report_csv


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tse-search",
        description="Inference-time candidate search for target speaker extraction",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="synthesize a benchmark of two-speaker scenes")
    synth.add_argument("--num-scenes", type=int, required=True)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--duration", type=float, default=2.0, help="seconds per scene")
    synth.add_argument("--sample-rate", type=int, default=16000)
    synth.add_argument("--snr-mean", type=float, default=0.0, dest="snr_mean")
    synth.add_argument("--snr-std", type=float, default=3.6, dest="snr_std")
    synth.add_argument("--out", required=True, help="output directory")

    run = sub.add_parser("run", help="run the search over a manifest and write reports")
    run.add_argument("--manifest", required=True)
    run.add_argument("--config", required=True)
    run.add_argument("--selector", required=True,
                     choices=["oracle", "quality", "spksim", "joint", "external"])
    run.add_argument("--report", required=True, help="CSV output path (JSON written alongside)")
    run.add_argument("--extractor", default=None,
                     choices=["identity", "leaky_linear", "spectral_subtraction", "external"],
                     help="override the config's extractor kind")
    run.add_argument("--parallel-candidates", action="store_true",
                     help="evaluate candidates in parallel when the backends allow it")

    report = sub.add_parser("report", help="merge run reports into one summary table")
    report.add_argument("paths", nargs="+")
    report.add_argument("--csv", default=None, help="also write the merged table as CSV")

    analyze = sub.add_parser("analyze", help="reliability analyses (Lipschitz and error bounds)")
    analyze.add_argument("--manifest", required=True)
    analyze.add_argument("--config", required=True)
    analyze.add_argument("--mode", required=True, choices=["lipschitz", "det_bound", "var_bound"])
    analyze.add_argument("--out", required=True)
    analyze.add_argument("--selector", default="oracle",
                         choices=["oracle", "quality", "spksim", "joint", "external"])
    analyze.add_argument("--grid-size", type=int, default=101)
    analyze.add_argument("--epsilon-r", type=float, default=0.05)
    analyze.add_argument("--trials", type=int, default=1000)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "synth":
            manifest = cmd_synth(
                num_scenes=args.num_scenes,
                seed=args.seed,
                duration=args.duration,
                sample_rate=args.sample_rate,
                snr_mean_db=args.snr_mean,
                snr_std_db=args.snr_std,
                out_dir=args.out,
            )
            print(f"wrote {args.num_scenes} scenes and {manifest}")
            return 0
        if args.command == "run":
            report = cmd_run(
                manifest_path=args.manifest,
                config_path=args.config,
                selector=args.selector,
                report_path=args.report,
                extractor_kind=args.extractor,
                parallel_candidates=args.parallel_candidates,
            )
            print(f"wrote {args.report} ({len(report.rows)} rows)")
            if report.failures:
                for failure in report.failures:
                    print(f"FAILED {failure['id']}: {failure['error']}", file=sys.stderr)
                return 1
            return 0
        if args.command == "report":
            summary = cmd_report(args.paths)
            print(summary, end="")
            if args.csv:
                with open(args.csv, "w", encoding="utf-8") as fh:
                    fh.write(report_csv(args.paths))
            return 0
        if args.command == "analyze":
            payload = cmd_analyze(
                manifest_path=args.manifest,
                config_path=args.config,
                mode=args.mode,
                out_path=args.out,
                selector=args.selector,
                grid_size=args.grid_size,
                epsilon_r=args.epsilon_r,
                trials=args.trials,
            )
            print(f"wrote {args.out}: {payload['summary']}")
            return 0
    except (ConfigError, MergeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
