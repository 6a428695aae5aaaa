"""Command-line front end.

Exit codes: 0 all asserted checks passed; 2 concordance/stability failure;
3 solver failure; 4 configuration error.
"""

from __future__ import annotations

import argparse
import sys

from ..errors import (
    AllSeedsFailed,
    Collapse,
    ConcordanceFailure,
    ConfigError,
    HartreeError,
    NoConvergence,
    NoValidSamples,
    StabilityFailure,
)
from ..spectral import set_fft_workers
from .config import SUBCOMMAND_KEYS, load_config
from .runs import RUNNERS

_SOLVER_ERRORS = (NoConvergence, Collapse, AllSeedsFailed, NoValidSamples)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hartreelab",
        description="Numerical laboratory for a mass-critical convolution-type "
                    "wave equation with a focusing power perturbation.")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMAND_KEYS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", default=None, help="key=value config file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="RNG seed override")
        p.add_argument("--threads", type=int, default=None, help="FFT worker threads")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {}
    if args.out is not None:
        overrides["output_dir"] = args.out
    if args.seed is not None:
        overrides["rng_seed"] = args.seed
    if args.threads is not None:
        set_fft_workers(args.threads)
    try:
        cfg = load_config(args.subcommand, args.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 4
    try:
        result = RUNNERS[args.subcommand](cfg)
    except (ConcordanceFailure, StabilityFailure) as exc:
        print(f"assertion failure: {exc}", file=sys.stderr)
        for off in getattr(exc, "offenders", []):
            print(f"  - {off}", file=sys.stderr)
        return 2
    except _SOLVER_ERRORS as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 4
    except HartreeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    print(f"{result.name}: PASS ({result.out_dir})")
    for key, val in result.summary.items():
        print(f"  {key} = {val}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
