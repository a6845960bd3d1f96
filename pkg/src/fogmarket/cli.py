"""Command-line interface: ``run``, ``sweep`` and ``validate``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Optional, Sequence

from .harness import SWEEP_VARIABLES, GeneratorParams, SweepSpec, generate_scenario, rows_to_csv, rows_to_json, run_sweep
from .market import cloud_only_baseline, run_market
from .model import ScenarioError, load_scenario, load_scenario_doc, save_scenario, validate_scenario

EXIT_OK, EXIT_INVALID, EXIT_USAGE = 0, 1, 2
INT_VARIABLES = ("n_dss", "n_fn")


def parse_grid(text: str, integer: bool = False) -> tuple[float, ...]:
    """``start:stop:step`` (stop inclusive) or a comma-separated list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"grid range must be start:stop:step, got {text!r}")
        start, stop, step = (float(p) for p in parts)
        if step <= 0 or stop < start:
            raise ValueError(f"invalid grid range {text!r}")
        n = int(round((stop - start) / step)) + 1
        values = [start + i * step for i in range(n) if start + i * step <= stop + 1e-9 * abs(step)]
        values = [round(v, 12) for v in values]
    else:
        values = [float(v) for v in text.split(",") if v.strip()]
    if integer:
        if any(v != int(v) for v in values):
            raise ValueError("integer variable needs integer grid values")
        return tuple(int(v) for v in values)
    return tuple(values)


def _add_generator_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("scenario generator")
    defaults = GeneratorParams()
    g.add_argument("--n-dss", type=int, default=defaults.n_dss)
    g.add_argument("--n-dso", type=int, default=defaults.n_dso)
    g.add_argument("--n-fn", type=int, default=defaults.n_fn)
    g.add_argument("--diameter", type=float, default=defaults.district_diameter, help="district diameter, km")
    g.add_argument("--mu", type=float, default=defaults.mu)
    g.add_argument("--t-th", type=float, default=defaults.t_th)
    g.add_argument("--lambda-mean", type=float, default=defaults.lambda_mean)
    g.add_argument("--theta", type=float, default=defaults.theta)
    g.add_argument("--kappa", type=float, default=defaults.kappa)
    g.add_argument("--cloud-distance", type=float, default=defaults.cloud_distance)
    g.add_argument("--cloud-cost", type=float, default=defaults.cloud_unit_cost)
    g.add_argument("--seed", type=int, default=defaults.seed)


def _params_from_args(args) -> GeneratorParams:
    return GeneratorParams(
        n_dss=args.n_dss,
        n_dso=args.n_dso,
        n_fn=args.n_fn,
        district_diameter=args.diameter,
        mu=args.mu,
        t_th=args.t_th,
        lambda_mean=args.lambda_mean,
        theta=args.theta,
        kappa=args.kappa,
        cloud_distance=args.cloud_distance,
        cloud_unit_cost=args.cloud_cost,
        seed=args.seed,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fogmarket", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one market and print the outcome as JSON")
    run.add_argument("--scenario", help="scenario JSON file (overrides generator flags)")
    run.add_argument("--baseline", action="store_true", help="also report the cloud-only baseline")
    run.add_argument("--save-scenario", metavar="FILE", help="write the scenario used to FILE")
    run.add_argument("--out", metavar="FILE", help="write the outcome here instead of stdout")
    _add_generator_flags(run)

    sweep = sub.add_parser("sweep", help="sweep one generator variable")
    sweep.add_argument("--var", required=True, choices=SWEEP_VARIABLES)
    sweep.add_argument("--grid", required=True, help="start:stop:step (inclusive) or comma list")
    sweep.add_argument("--reps", type=int, default=30)
    sweep.add_argument("--workers", type=int, default=1)
    sweep.add_argument("--out", metavar="FILE", help="output file (default stdout)")
    sweep.add_argument("--format", choices=("csv", "json"), default="csv")
    _add_generator_flags(sweep)

    val = sub.add_parser("validate", help="check a scenario file")
    val.add_argument("--scenario", required=True)
    return parser


def _emit(text: str, path: Optional[str]) -> None:
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_run(args) -> int:
    if args.scenario:
        scenario = load_scenario(args.scenario)
    else:
        scenario = generate_scenario(_params_from_args(args))
    if args.save_scenario:
        save_scenario(scenario, args.save_scenario)
    doc = {"outcome": run_market(scenario).to_dict()}
    if args.baseline:
        doc["baseline"] = cloud_only_baseline(scenario).to_dict()
    _emit(json.dumps(doc, indent=2) + "\n", args.out)
    return EXIT_OK


def _cmd_sweep(args) -> int:
    grid = parse_grid(args.grid, integer=args.var in INT_VARIABLES)
    spec = SweepSpec(args.var, grid, args.reps, _params_from_args(args))
    rows = run_sweep(spec, workers=args.workers)
    text = rows_to_csv(rows) if args.format == "csv" else rows_to_json(rows)
    _emit(text, args.out)
    return EXIT_OK


def _cmd_validate(args) -> int:
    violations = validate_scenario(load_scenario_doc(args.scenario))
    if violations:
        for v in violations:
            print(f"violation: {v}", file=sys.stderr)
        return EXIT_INVALID
    print("ok")
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        return _cmd_validate(args)
    except ScenarioError as exc:
        for v in exc.violations:
            print(f"violation: {v}", file=sys.stderr)
        return EXIT_INVALID
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
