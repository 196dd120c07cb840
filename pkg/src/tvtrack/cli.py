"""Command-line entry point: ``tvtrack {run,sweep,stability,compare}``."""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from .costs import ConvergenceError, CostError
from .dynamics import SimulationError
from .experiments import ScenarioError, load_preset, load_scenario, runner
from .experiments.io import report_items
from .graph import GraphError
from .linalg import EigenSolverError, LinalgError
from .stability import StabilityError

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3
EXIT_PARTIAL = 4


def _scenario(args):
    if args.config and args.preset:
        raise ScenarioError("give either --config or --preset, not both")
    if args.config:
        return load_scenario(args.config)
    return load_preset(args.preset or "paper_sec4")


def _parse_sweep(spec: str) -> tuple[str, list]:
    name, sep, values = spec.partition("=")
    if not sep or not values.strip():
        raise ScenarioError(f"--sweep expects PARAM=v1,v2,..., got {spec!r}")
    return name.strip(), [v.strip() for v in values.split(",") if v.strip()]


def cmd_run(args) -> int:
    s = _scenario(args)
    start = time.perf_counter()
    res = runner.run_scenario(s, args.out)
    elapsed = time.perf_counter() - start
    for key, val in res.summary().items():
        print(f"{key} = {val}")
    print(f"elapsed_s = {elapsed:.3f}")
    print(f"output = {args.out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    s = _scenario(args)
    if not args.sweep:
        raise ScenarioError("sweep needs --sweep PARAM=v1,v2,...")
    param, values = _parse_sweep(args.sweep)
    res = runner.run_sweep(s, param, values, args.out, jobs=args.jobs)
    print(",".join(["value", "status", "e_bar", "max_e", "supra_delta_bar", "loop_stable"]))
    for row in res.rows:
        print(",".join(row[c] for c in ("value", "status", "e_bar", "max_e", "supra_delta_bar", "loop_stable")))
    for value, err in res.failures:
        print(f"failed {param}={value}: {err}", file=sys.stderr)
    return EXIT_PARTIAL if res.failures else EXIT_OK


def cmd_stability(args) -> int:
    s = _scenario(args)
    path = Path(args.out) / "stability.txt" if args.out else None
    report = runner.stability_report(s, path)
    for key, val in report_items(report).items():
        print(f"{key} = {val}")
    return EXIT_OK


def cmd_compare(args) -> int:
    s = _scenario(args)
    out = runner.compare_central(s, args.out)
    for key, val in out.items():
        print(f"{key} = {val}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tvtrack",
        description="Distributed time-varying optimization: simulation and bound checks.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_default):
        p.add_argument("--config", metavar="PATH", help="scenario file")
        p.add_argument("--preset", choices=["paper_sec4", "static_quadratic"],
                       help="built-in scenario (default: paper_sec4)")
        p.add_argument("--out", metavar="DIR", default=out_default, help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="reserved; runs are deterministic and ignore it")

    p = sub.add_parser("run", help="simulate one scenario")
    common(p, "out")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a scenario for several values of one parameter")
    common(p, "out")
    p.add_argument("--sweep", metavar="PARAM=v1,v2,...", required=True,
                   help="parameter to vary: k_bar, delta_c, delta_t or omega")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("stability", help="compute step bounds and convergence constants")
    common(p, None)
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("compare", help="distributed run against the centralized baseline")
    common(p, "out")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ScenarioError, GraphError, CostError) as exc:
        print(f"error[validation]: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (SimulationError, StabilityError, LinalgError, EigenSolverError, ConvergenceError) as exc:
        print(f"error[runtime]: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
