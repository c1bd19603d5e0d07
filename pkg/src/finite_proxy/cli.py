"""Command line entry point.

    finite-proxy <stage...> --config <path> [--out <dir>] [--seed <u64>] [--force]

Stages: reduce-static, reduce-wave, reconstruct-chain, simulate-chain,
compare-spectra (prerequisites are pulled in automatically).  The output
directory resolves as --out, then $FINITE_PROXY_OUT, then the config's
output_dir.  Exit codes: 0 success, 2 validation, 3 numerical failure,
4 I/O.
"""

from __future__ import annotations

import argparse
import os
import sys

from .config import load_config
from .errors import (
    CapacityError,
    ConfigError,
    DegenerateSpectrumError,
    DomainError,
    FiniteProxyError,
    NonContractionError,
    NonresonanceError,
    ReconstructionError,
    ResolutionError,
    SolverError,
)
from .pipeline import STAGES, run_pipeline
from .report import emit_report

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

_NUMERICAL = (NonContractionError, SolverError, NonresonanceError,
              ReconstructionError, DegenerateSpectrumError)
_VALIDATION = (ConfigError, DomainError, CapacityError, ResolutionError)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="finite-proxy",
        description="Finite spectral reduction and isospectral chain recovery",
    )
    parser.add_argument("stages", nargs="+", choices=STAGES, metavar="stage",
                        help=f"one or more of: {', '.join(STAGES)}")
    parser.add_argument("--config", required=True, help="path to the JSON config")
    parser.add_argument("--out", default=None, help="output directory override")
    parser.add_argument("--seed", type=int, default=None,
                        help="seed override for property sampling")
    parser.add_argument("--force", action="store_true",
                        help="bypass the contraction-margin check "
                             "(nonresonance is never bypassed)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION

    if args.seed is not None:
        if args.seed < 0:
            print("error: --seed must be nonnegative", file=sys.stderr)
            return EXIT_VALIDATION
        config.seed = args.seed
    if args.force:
        config.force = True
    out_dir = args.out or os.environ.get("FINITE_PROXY_OUT") or config.output_dir

    try:
        report = run_pipeline(config, args.stages)
    except _VALIDATION as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except _NUMERICAL as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO

    try:
        written = emit_report(report, out_dir)
    except (FiniteProxyError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO

    for stage in report.stages.values():
        flags = [t.passed for t in stage.tables if t.passed is not None]
        verdict = "ok" if all(flags) or not flags else "CHECK FAILED"
        print(f"[{stage.name}] {verdict}; "
              f"{len(stage.tables)} tables, {len(stage.plots)} plot series")
    print(f"wrote {len(written)} files to {out_dir}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
