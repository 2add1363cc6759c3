"""Command line front end.

Two subcommands:

  twoscale-heat run   <config.cfg> [--out DIR] [--stages LIST] [--tol X]
  twoscale-heat sweep <config.cfg> --eps LIST [--out DIR] [--tol X]

Exit codes: 0 success, 1 usage or configuration problem, 2 output
directory locked, 3.. one code per failed pipeline stage.
"""

import argparse
import sys
from fractions import Fraction

from .config import parse_config
from .errors import ConfigError, LockError, StageError, TwoScaleError
from .pipeline import (
    LOCK_EXIT_CODE,
    STAGE_EXIT_CODES,
    STAGE_ORDER,
    format_report_text,
    format_sweep_text,
    run_experiment,
    sweep_epsilon,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="twoscale-heat",
        description="second-order two-scale solver for periodic heat conduction",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment")
    run.add_argument("config", help="experiment configuration file")
    run.add_argument("--out", default=None, help="directory for report/vtk output")
    run.add_argument("--stages", default=None,
                     help=f"comma separated subset of: {','.join(STAGE_ORDER)}")
    run.add_argument("--tol", type=float, default=None,
                     help="override the relative solver tolerance")

    sweep = sub.add_parser("sweep", help="repeat an experiment over period lengths")
    sweep.add_argument("config", help="experiment configuration file")
    sweep.add_argument("--eps", required=True,
                       help="comma separated period lengths, fractions allowed (1/4,1/8)")
    sweep.add_argument("--out", default=None, help="directory for sweep output")
    sweep.add_argument("--tol", type=float, default=None,
                       help="override the relative solver tolerance")
    return parser


def _parse_eps_list(text: str):
    values = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            values.append(float(Fraction(part)))
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"bad period length {part!r}: {exc}") from exc
    if not values:
        raise ConfigError("--eps needs at least one period length")
    return values


def _cmd_run(args) -> int:
    config = parse_config(args.config)
    stages = None
    if args.stages is not None:
        stages = [s.strip() for s in args.stages.split(",") if s.strip()]
    result = run_experiment(config, out_dir=args.out, stages=stages, rel_tol=args.tol)
    sys.stdout.write(format_report_text(result))
    if result.artifacts:
        sys.stdout.write("\nwrote:\n")
        for p in result.artifacts:
            sys.stdout.write(f"  {p}\n")
    return 0


def _cmd_sweep(args) -> int:
    config = parse_config(args.config)
    eps_values = _parse_eps_list(args.eps)
    result = sweep_epsilon(config, eps_values, out_dir=args.out, rel_tol=args.tol)
    sys.stdout.write(format_sweep_text(result, config.name))
    if result.artifacts:
        sys.stdout.write("\nwrote:\n")
        for p in result.artifacts:
            sys.stdout.write(f"  {p}\n")
    if any(r.report is None for r in result.runs):
        return STAGE_EXIT_CODES["metrics"]
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_sweep(args)
    except LockError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return LOCK_EXIT_CODE
    except StageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return STAGE_EXIT_CODES.get(exc.stage, 1)
    except (ConfigError, TwoScaleError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
