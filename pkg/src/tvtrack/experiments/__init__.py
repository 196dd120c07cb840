from .config import (
    Scenario,
    ScenarioError,
    dump_scenario,
    load_preset,
    load_scenario,
    parse_scenario,
)
from .runner import (
    RunResult,
    SweepResult,
    build_problem,
    compare_central,
    run_scenario,
    run_sweep,
    stability_report,
)

__all__ = [
    "RunResult",
    "Scenario",
    "ScenarioError",
    "SweepResult",
    "build_problem",
    "compare_central",
    "dump_scenario",
    "load_preset",
    "load_scenario",
    "parse_scenario",
    "run_scenario",
    "run_sweep",
    "stability_report",
]
