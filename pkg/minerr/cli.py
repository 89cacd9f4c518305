"""Command-line front end.

    minerr verify <file>
    minerr simulate <file> --out <dir> [--dt X] [--t-end X] [--oracle] [--force]
    minerr compare <file> --out <dir>

Exit codes: 0 success, 1 property or hypothesis failure, 2 input or usage
error.
"""

# external imports
import argparse
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

# internal imports
from . import __version__
from .exprlang import EvalError
from .io import (
    ScenarioError,
    load_scenario,
    write_trajectory_csv,
    write_error_oracle_csv,
    comparison_frame,
    write_json,
    FLOAT_FORMAT,
)
from .model import EnvelopeViolation
from .observer import HypothesisViolation, ValidationFailure, validate_gains
from .sim import Simulation, ErrorSimulation, Completed, check_gains
from .metrics import compute_metrics, dominance_margins, intersection_frames, interval_widths
from .runner import simulate_batch

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

# absolute tolerance of the order relations (framer, dominance).
ORDER_TOL = 1e-6


def _error(message):
    print("minerr: {}".format(message), file=sys.stderr)


def cmd_verify(args):
    scenario = load_scenario(args.scenario)
    report = validate_gains(scenario.observer_plant(), scenario.gains, raise_on_failure=False)

    document = {"scenario": scenario.name, "initial_box": True, "transform": scenario.transform is not None}
    document.update(report.to_dict())
    print(json.dumps(document, indent=2))

    if not report.passed:
        _error(str(ValidationFailure(report)))
        return EXIT_FAILURE
    return EXIT_OK


def _with_overrides(scenario, args):
    changes = {key: getattr(args, key) for key in ("dt", "t_end") if getattr(args, key) is not None}
    if not changes:
        return scenario
    try:
        return scenario.with_sim(**changes)
    except ValueError as err:
        raise ScenarioError(str(err), args.scenario, "sim") from err


def _oracle_deviation(traj, errors):
    ebar, elower = traj.errors()
    m = min(len(traj), len(errors))
    return float(max(np.max(np.abs(ebar[:m] - errors.ebar[:m])), np.max(np.abs(elower[:m] - errors.elower[:m]))))


def cmd_simulate(args):
    scenario = _with_overrides(load_scenario(args.scenario), args)

    try:
        report = check_gains(scenario, force=args.force)
    except ValidationFailure as failure:
        _error("{} (use --force to simulate anyway)".format(failure))
        return EXIT_FAILURE

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    code = EXIT_OK
    simulation = Simulation(scenario)
    try:
        traj = simulation.run(progressbar=args.progressbar)
    except (EnvelopeViolation, EvalError) as err:
        _error(str(err))
        traj = simulation.trajectory()
        code = EXIT_FAILURE

    write_trajectory_csv(traj, out / "trajectory.csv")

    metrics = compute_metrics(traj, scenario, report)
    if not isinstance(traj.status, Completed):
        code = EXIT_FAILURE
    elif metrics.max_framer_violation > ORDER_TOL * (1 + float(np.max(np.abs(traj.x)))):
        _error("framer violated by {:.3e}".format(metrics.max_framer_violation))
        code = EXIT_FAILURE

    document = {
        "scenario": scenario.name,
        "status": str(traj.status),
        "t_escape": getattr(traj.status, "t_escape", None),
        "generated_at": datetime.now(timezone.utc).isoformat(),
        "status_detail": traj.status.to_dict(),
        "diagnostics": traj.diagnostics,
        "metrics": metrics.to_dict(),
    }

    if args.oracle:
        if scenario.transform is not None:
            _error("the error oracle is defined for untransformed scenarios only, skipped")
            document["oracle_deviation"] = None
        else:
            oracle = ErrorSimulation(scenario)
            try:
                errors = oracle.run()
            except (EnvelopeViolation, EvalError):
                errors = oracle.trajectory()
            write_error_oracle_csv(errors, out / "error_oracle.csv")
            document["oracle_deviation"] = _oracle_deviation(traj, errors)

    write_json(document, out / "metrics.json")
    print("{}: {} ({} samples), written to {}".format(scenario.name, traj.status, len(traj), out))
    return code


def cmd_compare(args):
    scenario = _with_overrides(load_scenario(args.scenario), args)
    gains = scenario.gains
    if gains.phi < 2:
        _error("compare needs a scenario with at least two gains, got phi=1")
        return EXIT_USAGE

    try:
        check_gains(scenario)
    except ValidationFailure as failure:
        _error(str(failure))
        return EXIT_FAILURE

    # upper gain k is paired with lower gain k.
    singles = [
        scenario.with_gains(gains.single(k), name="{}_single{}".format(scenario.name, k))
        for k in range(1, gains.phi + 1)
    ]

    try:
        trajectories = simulate_batch([scenario] + singles, validate=False, force_sequential=args.sequential)
    except (EnvelopeViolation, EvalError) as err:
        _error(str(err))
        return EXIT_FAILURE

    unfinished = [t.name for t in trajectories if not isinstance(t.status, Completed)]
    if unfinished:
        _error("runs did not complete: {}".format(", ".join(unfinished)))
        return EXIT_FAILURE

    multi, single_trajs = trajectories[0], trajectories[1:]
    margins = dominance_margins(multi, single_trajs)
    xbar_cap, xlower_cap = intersection_frames(single_trajs)
    intersection_margin = float(min(np.min(xbar_cap - multi.xbar), np.min(multi.xlower - xlower_cap)))

    widths = {"multi": interval_widths(multi)}
    for k, single in enumerate(single_trajs, start=1):
        widths["single{}".format(k)] = interval_widths(single)
    widths["intersection"] = xbar_cap - xlower_cap

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    comparison_frame(multi.times, widths).to_csv(out / "comparison.csv", index=False, float_format=FLOAT_FORMAT)

    passed = min(margins) >= -ORDER_TOL and intersection_margin >= -ORDER_TOL
    write_json(
        {
            "scenario": scenario.name,
            "phi": gains.phi,
            "margins": {"single{}".format(k): m for k, m in enumerate(margins, start=1)},
            "dominance_margin": min(margins),
            "intersection_margin": intersection_margin,
            "tolerance": ORDER_TOL,
            "passed": passed,
        },
        out / "comparison.json",
    )

    print("{}: dominance margin {:.3e}, written to {}".format(scenario.name, min(margins), out))
    if not passed:
        _error("multi-gain frames leave a single-gain frame (margin {:.3e})".format(min(margins)))
        return EXIT_FAILURE
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="minerr", description="Min/max multi-gain interval observers.")
    parser.add_argument("--version", action="version", version="%(prog)s " + __version__)
    parser.add_argument("--verbose", "-v", action="store_true", help="Log progress at DEBUG level")

    subparsers = parser.add_subparsers(dest="command", required=True)

    verify = subparsers.add_parser("verify", help="Check the gain hypotheses and print certificates")
    verify.add_argument("scenario", help="Scenario JSON file")
    verify.set_defaults(func=cmd_verify)

    simulate = subparsers.add_parser("simulate", help="Simulate plant and observer, write CSV and metrics")
    simulate.add_argument("scenario", help="Scenario JSON file")
    simulate.add_argument("--out", "-o", required=True, help="Output directory")
    simulate.add_argument("--dt", type=float, help="Step size, overrides the scenario")
    simulate.add_argument("--t-end", dest="t_end", type=float, help="Horizon, overrides the scenario")
    simulate.add_argument("--oracle", action="store_true", help="Also integrate the error dynamics directly")
    simulate.add_argument("--force", action="store_true", help="Simulate despite failed gain hypotheses")
    simulate.add_argument("--progressbar", action="store_true", help="Draw a progressbar")
    simulate.set_defaults(func=cmd_simulate)

    compare = subparsers.add_parser("compare", help="Compare the multi-gain observer with single-gain observers")
    compare.add_argument("scenario", help="Scenario JSON file")
    compare.add_argument("--out", "-o", required=True, help="Output directory")
    compare.add_argument("--dt", type=float, help="Step size, overrides the scenario")
    compare.add_argument("--t-end", dest="t_end", type=float, help="Horizon, overrides the scenario")
    compare.add_argument("--sequential", action="store_true", help="Do not use Ray workers")
    compare.set_defaults(func=cmd_compare)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )

    try:
        return args.func(args)
    except ScenarioError as err:
        _error(str(err))
        return EXIT_USAGE
    except HypothesisViolation as err:
        _error(str(err))
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
