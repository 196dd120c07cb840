"""Scenario execution: single runs, sweeps, stability reports and baselines."""

from __future__ import annotations

import csv
import dataclasses
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import costs, dynamics, metrics, stability
from ..costs import CostBounds, Problem, QuadraticCost, QuadraticSinusoidalCost
from ..graph import Graph
from . import io
from .config import Scenario, ScenarioError, fmt, render_sections, scenario_sections

log = logging.getLogger(__name__)


@dataclass
class RunResult:
    scenario: Scenario
    series: dynamics.TimeSeries
    metrics: metrics.MetricSeries
    report: stability.StabilityReport
    check: metrics.BoundCheck
    region_ok: bool
    files: dict[str, Path] = field(default_factory=dict)

    def summary(self) -> dict[str, str]:
        ms, chk, r = self.metrics, self.check, self.report
        return {
            "e_bar": fmt(ms.e_bar),
            "max_e": fmt(ms.e.max()),
            "final_e": fmt(ms.e[-1]),
            "final_disagreement": fmt(ms.disagreement[-1]),
            "bounds_evaluable": io.format_value(chk.evaluable),
            "consensus_bound_pass": io.format_value(chk.consensus_pass),
            "gradient_bound_pass": io.format_value(chk.gradient_pass),
            "consensus_margin": fmt(chk.consensus_margin),
            "gradient_margin": fmt(chk.gradient_margin),
            "max_consensus_err": fmt(chk.max_consensus_err),
            "max_late_grad_norm": fmt(chk.max_grad_norm),
            "region_ok": io.format_value(self.region_ok),
            "delta_bar": fmt(r.delta_bar),
            "delta_c": fmt(r.delta_c),
            "phi": fmt(r.phi),
            "phi_norm": fmt(r.phi_norm),
            "phi_rho": fmt(r.phi_rho),
            "loop_radius": fmt(r.loop_radius),
        }


def build_graph(s: Scenario) -> Graph:
    if s.graph_family == "edges":
        return Graph.from_edges(s.n_agents, s.edges)
    return getattr(Graph, s.graph_family)(s.n_agents)


def build_costs(s: Scenario) -> list:
    if s.cost_family == "quadratic_sinusoidal":
        return [QuadraticSinusoidalCost(a, b, s.omega) for a, b in zip(s.curvature, s.multiplier)]
    return [
        QuadraticCost(h, offset=o, amplitude=a, rate=r)
        for h, o, a, r in zip(s.hessians, s.offsets, s.amplitudes, s.rates)
    ]


def build_problem(s: Scenario) -> Problem:
    """Problem with cost bounds attached according to the scenario's bounds mode."""
    p = Problem(build_graph(s), build_costs(s))
    window = (0.0, s.horizon)
    if s.bounds_mode == "region":
        b = costs.estimate_bounds(p, s.region, window, s.bound_samples)
    elif s.bounds_mode == "optimum":
        b = costs.bounds_along_optimum(p, window, s.bound_samples)
    else:
        m, l = p.curvature_bounds() or (None, None)
        m = s.declared_m if s.declared_m is not None else m
        l = s.declared_l if s.declared_l is not None else l
        if m is None or l is None:
            raise ScenarioError("declared bounds need m and l for costs without curvature bounds", path="bounds.m")
        b = CostBounds(m=m, l=l, c0=s.declared_c0, c1=s.declared_c1, provenance="declared")
    return p.with_bounds(b)


def resolve(s: Scenario) -> tuple[Problem, dynamics.OrchestratorConfig, stability.StabilityReport]:
    """Build the problem, resolve ``delta_c`` and compute the stability report."""
    p = build_problem(s)
    x0 = np.asarray(s.x0).reshape(p.n_agents, p.dimension)
    pre = stability.analyze(p, None if s.auto_delta_c else s.delta_c, states=x0, t=0.0)
    cfg = dynamics.OrchestratorConfig(
        delta_t=s.delta_t, k_bar=s.k_bar, delta_c=pre.delta_c, horizon=s.horizon, substeps=s.substeps
    )
    loop = dynamics.interval_map_radius(p, cfg) if p.is_quadratic and p.n_agents > 1 else math.nan
    report = stability.analyze(p, pre.delta_c, states=x0, t=0.0, loop_radius=loop)
    return p, cfg, report


def _write_summary(path: Path, result: RunResult) -> None:
    sections = {"summary": result.summary()}
    sections.update(scenario_sections(result.scenario, result.report.delta_c))
    path.write_text(render_sections(sections))


def run_scenario(s: Scenario, out_dir=None) -> RunResult:
    """Simulate ``s``; with ``out_dir`` also write run/consensus CSVs, report and summary."""
    p, cfg, report = resolve(s)
    series = dynamics.orchestrate(p, cfg, s.x0, s.v0, s.z0)
    if math.isfinite(series.delta_bar_min) and series.delta_bar_min < report.delta_bar:
        report = dataclasses.replace(
            report,
            delta_bar=series.delta_bar_min,
            notes=report.notes + (f"running minimum of delta_bar along the run: {series.delta_bar_min:.6g}",),
        )
    ms = metrics.tracking_error(series, p)
    check = metrics.check_bounds(ms, series, report, s.transient_fraction)
    region_ok = True
    if s.bounds_mode == "region":
        lo, hi = s.region
        region_ok = bool(np.all((series.x >= lo) & (series.x <= hi)))
    result = RunResult(s, series, ms, report, check, region_ok)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        files = {
            "run": out / "run.csv",
            "consensus": out / "consensus.csv",
            "stability": out / "stability.txt",
            "summary": out / "summary.cfg",
        }
        io.write_run_csv(files["run"], series, ms)
        io.write_consensus_csv(files["consensus"], series, ms)
        io.write_report(files["stability"], report)
        _write_summary(files["summary"], result)
        result.files = files
    log.info("%s: e_bar=%.6g delta_c=%.6g", s.name, ms.e_bar, report.delta_c)
    return result


def stability_report(s: Scenario, path=None) -> stability.StabilityReport:
    _, _, report = resolve(s)
    if path is not None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        io.write_report(path, report)
    return report


@dataclass
class SweepResult:
    param: str
    rows: list[dict]
    failures: list[tuple[str, str]]
    table_path: Path | None = None


SWEEP_COLUMNS = (
    "value", "status", "e_bar", "max_e", "consensus_margin", "gradient_margin",
    "delta_c", "delta_bar", "supra_delta_bar", "loop_radius", "loop_stable", "error",
)


def _label(value) -> str:
    return value if isinstance(value, str) else fmt(value)


def _sweep_one(args):
    base, param, value, out_dir = args
    label = _label(value)
    row = {c: "" for c in SWEEP_COLUMNS}
    row["value"] = label
    try:
        s = base.with_param(param, value)
        run_dir = None if out_dir is None else Path(out_dir) / f"{param}={label}"
        res = run_scenario(s, run_dir)
        r = res.report
        row.update(
            status="ok",
            e_bar=fmt(res.metrics.e_bar),
            max_e=fmt(res.metrics.e.max()),
            consensus_margin=fmt(res.check.consensus_margin),
            gradient_margin=fmt(res.check.gradient_margin),
            delta_c=fmt(r.delta_c),
            delta_bar=fmt(r.delta_bar),
            supra_delta_bar=io.format_value(r.delta_c >= r.delta_bar),
            loop_radius=fmt(r.loop_radius),
            loop_stable=io.format_value(not r.loop_radius >= 1),
        )
    except Exception as exc:  # noqa: BLE001 - one failed run must not stop the sweep
        row.update(status="failed", error=f"{type(exc).__name__}: {exc}")
        try:
            s = base.with_param(param, value)
            _, _, r = resolve(s)
            row.update(
                delta_c=fmt(r.delta_c), delta_bar=fmt(r.delta_bar),
                supra_delta_bar=io.format_value(r.delta_c >= r.delta_bar), loop_radius=fmt(r.loop_radius),
                loop_stable=io.format_value(not r.loop_radius >= 1),
            )
        except Exception:  # noqa: BLE001
            pass
    return row


def run_sweep(base: Scenario, param: str, values, out_dir=None, jobs: int = 1) -> SweepResult:
    """Run ``base`` once per value of ``param`` and tabulate the outcomes."""
    base.with_param(param, values[0] if values else 0)  # validates the parameter name
    tasks = [(base, param, v, out_dir) for v in values]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_one, tasks))
    else:
        rows = [_sweep_one(t) for t in tasks]
    failures = [(r["value"], r["error"]) for r in rows if r["status"] != "ok"]
    result = SweepResult(param, rows, failures)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        path = out / "comparison.csv"
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(SWEEP_COLUMNS), lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
        result.table_path = path
    return result


def compare_central(s: Scenario, out_dir=None, settle_time: float = 10.0) -> dict:
    """Distributed run against the centralized flow started from the mean of ``x0``."""
    res = run_scenario(s, None if out_dir is None else Path(out_dir) / "distributed")
    prob = build_problem(s)
    x0 = np.asarray(s.x0).reshape(s.n_agents, s.dimension).mean(axis=0)
    step = s.delta_t / s.substeps
    central = dynamics.central_baseline(prob, x0, step, s.horizon)
    err = np.linalg.norm(central.x - central.x_star, axis=1)
    late = central.t > settle_time
    out = {
        "distributed_e_bar": fmt(res.metrics.e_bar),
        "distributed_final_e": fmt(res.metrics.e[-1]),
        "central_e_bar": fmt(metrics.average_error(err, t=central.t)),
        "central_max_err_after_settle": fmt(err[late].max() if late.any() else math.nan),
        "central_final_err": fmt(err[-1]),
        "settle_time": fmt(settle_time),
    }
    if out_dir is not None:
        out_path = Path(out_dir)
        out_path.mkdir(parents=True, exist_ok=True)
        dim = s.dimension
        cols = ["t"] + [f"x_{d + 1}" for d in range(dim)] + [f"x_star_{d + 1}" for d in range(dim)] + ["error"]
        io.write_table(out_path / "central.csv", cols, np.column_stack([central.t, central.x, central.x_star, err]))
        (out_path / "compare.txt").write_text("".join(f"{k} = {v}\n" for k, v in out.items()))
    return out
