"""Command-line front end.

One subcommand per pipeline stage plus ``run`` for all of them in order.
Stages assume their inputs exist under the output directory (produced by
the earlier stages), so ``run`` is the common entry point and the
stage commands exist for re-doing individual steps.

Exit codes: 0 success, 2 invalid configuration, 3 runtime or numeric
failure, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import sys

from .errors import ArgumentError, ConfigValidationError, DataFormatError, NumericError
from .pipeline import Pipeline, load_config

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_IO = 4

STAGES = {
    "allocate": Pipeline.allocate,
    "train-refs": Pipeline.train_refs,
    "train-targets": Pipeline.train_targets,
    "extract": Pipeline.extract,
    "attack": Pipeline.attack,
    "baseline": Pipeline.baseline,
    "evaluate": Pipeline.evaluate,
    "compare": Pipeline.compare,
    "run": Pipeline.run,
}

STAGE_HELP = {
    "allocate": "write the reference and target membership plans",
    "train-refs": "train every reference model set",
    "train-targets": "train the target model pairs",
    "extract": "extract per-point confidence tensors from the reference models",
    "attack": "fit one membership attack model per point",
    "baseline": "fit the per-class baseline attack models",
    "evaluate": "score all attacks against the target models and write reports",
    "compare": "compute vulnerable-set overlap between attacks",
    "run": "run every stage in order",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bagmia",
        description="Per-point membership-inference auditing with bagged reference models.",
    )
    sub = parser.add_subparsers(dest="stage", required=True)
    for stage, method in STAGES.items():
        sp = sub.add_parser(stage, help=STAGE_HELP[stage])
        sp.add_argument("--config", required=True, help="path to the experiment config (JSON)")
        sp.add_argument("--out", default=None, help="output directory (default: config output_dir)")
        sp.add_argument(
            "--parallelism",
            type=int,
            default=1,
            help="worker threads for model training (default 1)",
        )
        sp.set_defaults(method=method)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        out_dir = args.out or config.output_dir
        if not out_dir:
            raise ConfigValidationError(["no output directory: pass --out or set output_dir"])
        if args.parallelism < 1:
            raise ConfigValidationError([f"--parallelism must be at least 1, got {args.parallelism}"])
        pipeline = Pipeline(config, out_dir, args.parallelism)
        args.method(pipeline)
    except ConfigValidationError as exc:
        print(f"bagmia: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataFormatError, OSError) as exc:
        print(f"bagmia: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NumericError, ArgumentError, RuntimeError, ValueError) as exc:
        print(f"bagmia: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"bagmia: {args.stage} done, artifacts in {pipeline.out_dir}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
