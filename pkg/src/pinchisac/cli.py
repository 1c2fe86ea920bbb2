"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 every design infeasible,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from .baselines import SearchTooLargeError, exhaustive_search
from .beamspan import NumericalInfeasibilityError
from .experiments import (ALGORITHMS, SWEEP_AXES, ConfigError, ScenarioConfig, TrialResult,
                          emit, monte_carlo, run_case_study, run_sweep)
from .sca import ScaInvariantError
from .selftest import run_selftest

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_NUMERICAL = 0, 2, 3, 4
NUMERICAL_ERRORS = (ScaInvariantError, NumericalInfeasibilityError, FloatingPointError,
                    np.linalg.LinAlgError)

log = logging.getLogger("pinchisac")


def _global_flags(parser, suppress=False):
    def default(value):
        return argparse.SUPPRESS if suppress else value
    parser.add_argument("--config", default=default(None),
                        help="scenario file with key = value lines")
    parser.add_argument("--seed", type=int, default=default(None),
                        help="override the scenario seed")
    parser.add_argument("--out", default=default("-"), help="output path, '-' for stdout")
    parser.add_argument("--format", choices=("csv", "json"), default=default("csv"))
    parser.add_argument("--threads", type=int, default=default(1), help="worker processes")
    parser.add_argument("-v", "--verbose", action="store_true", default=default(False))


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pinchisac", description="Pinching-antenna ISAC placement and beamforming.")
    _global_flags(parser)
    # the same flags after the subcommand; absent ones keep the top-level defaults
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("case-study", parents=[common],
                       help="SCA against exhaustive search on Case1-3")
    p.add_argument("--case", type=int, nargs="+", choices=(1, 2, 3), default=[1, 2, 3])
    p.add_argument("--gammas", type=float, nargs="+",
                   default=[0.5 * k for k in range(11)], help="radar SNR requirements")

    p = sub.add_parser("monte-carlo", parents=[common],
                       help="average rates over random placements")
    p.add_argument("--trials", type=int)
    p.add_argument("--algorithms", nargs="+", choices=ALGORITHMS)

    p = sub.add_parser("sweep", parents=[common],
                       help="Monte-Carlo averages along one parameter")
    p.add_argument("--axis", choices=SWEEP_AXES)
    p.add_argument("--values", type=float, nargs="+")
    p.add_argument("--trials", type=int)
    p.add_argument("--algorithms", nargs="+", choices=ALGORITHMS)

    p = sub.add_parser("oracle", parents=[common],
                       help="exhaustive search at the configured entities")
    p.add_argument("--step", type=float, help="grid step in metres")
    p.add_argument("--allow-large", action="store_true")

    sub.add_parser("selftest", parents=[common], help="run the invariant checks")
    return parser


def load_config(args):
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if getattr(args, "algorithms", None):
        overrides["algorithms"] = tuple(args.algorithms)
    if args.config:
        return ScenarioConfig.from_file(args.config, **overrides)
    return ScenarioConfig(**overrides)


def _summary_lines(summary):
    for s in summary:
        where = f"{s.sweep_axis}={s.sweep_value!r} " if s.sweep_axis else ""
        yield (f"{where}{s.algorithm}: {s.mean_rate:.4f} +/- {s.std_error:.4f} bit/s/Hz "
               f"(feasible {s.feasible_fraction:.0%})")


def _write(rows, args):
    text = emit(rows, args.format, args.out)
    if args.out in (None, "-"):
        sys.stdout.write(text)


def run(args):
    if args.threads < 1:
        raise ConfigError("--threads must be at least 1")
    if args.command == "selftest":
        results = run_selftest()
        for name, ok in results:
            print(f"{'PASS' if ok else 'FAIL'} {name}")
        return EXIT_OK if all(ok for _, ok in results) else EXIT_NUMERICAL

    config = load_config(args)
    if args.command == "case-study":
        rows = [r for case in args.case
                for r in run_case_study(case, args.gammas, config, threads=args.threads)]
        _write(rows, args)
        feasible = any(r.sca_feasible for r in rows)
    elif args.command == "monte-carlo":
        res = monte_carlo(config, args.trials, threads=args.threads)
        _write(res.trials, args)
        for line in _summary_lines(res.summary):
            print(line, file=sys.stderr)
        feasible = any(r.feasible for r in res.trials)
    elif args.command == "sweep":
        axis = args.axis or config.sweep_axis
        values = args.values or config.sweep_values
        if not axis or not values:
            raise ConfigError("sweep needs an axis and values (flags or config)")
        res = run_sweep(axis, sorted(values), config, args.trials, threads=args.threads)
        _write(res.summary, args)
        feasible = any(r.feasible for r in res.trials)
    else:
        geom = config.geometry(config.user, config.target)
        step = args.step or config.exhaustive_step_m
        try:
            ex = exhaustive_search(geom, config.rf, config.spec, config.p_max_watts,
                                   config.sigma_u2_watts, step=step, allow_large=args.allow_large)
        except SearchTooLargeError as exc:
            raise ConfigError(str(exc)) from None
        row = TrialResult(0, "exhaustive", *config.user, *config.target, ex.rate,
                          ex.radar_snr, ex.feasible, 0.0, 0,
                          [] if ex.x is None else [float(v) for v in ex.x])
        _write([row], args)
        feasible = ex.feasible
    return EXIT_OK if feasible else EXIT_INFEASIBLE


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return run(args)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except NUMERICAL_ERRORS as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
