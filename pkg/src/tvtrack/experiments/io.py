"""CSV and key-value report files; floats are written with 17 significant digits."""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from ..dynamics import TimeSeries
from ..metrics import MetricSeries, average_error
from ..stability import StabilityReport
from .config import fmt


def _agent_cols(prefix: str, n_agents: int, dim: int) -> list[str]:
    if dim == 1:
        return [f"{prefix}_{i + 1}" for i in range(n_agents)]
    return [f"{prefix}_{i + 1}_{d + 1}" for i in range(n_agents) for d in range(dim)]


def run_columns(n_agents: int, dim: int) -> list[str]:
    return (
        ["t"]
        + _agent_cols("x", n_agents, dim)
        + [f"x_star_{d + 1}" for d in range(dim)]
        + _agent_cols("psi", n_agents, dim)
        + ["e", "grad_norm", "disagreement"]
    )


def consensus_columns(n_agents: int, dim: int) -> list[str]:
    pbar = ["pbar"] if dim == 1 else [f"pbar_{d + 1}" for d in range(dim)]
    return ["k"] + _agent_cols("p", n_agents, dim) + pbar + ["consensus_err"]


def write_run_csv(path, ts: TimeSeries, ms: MetricSeries) -> None:
    m = len(ts.t)
    table = np.column_stack(
        [
            ts.t,
            ts.x.reshape(m, -1),
            ts.x_star,
            ts.psi.reshape(m, -1),
            ms.e,
            ms.grad_norm,
            ms.disagreement,
        ]
    )
    write_table(path, run_columns(ts.n_agents, ts.dimension), table)


def write_consensus_csv(path, ts: TimeSeries, ms: MetricSeries) -> None:
    kk = len(ts.k)
    table = np.column_stack([ts.p.reshape(kk, -1), ts.pbar, ms.consensus_err])
    cols = consensus_columns(ts.n_agents, ts.dimension)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for k, row in zip(ts.k, table):
            w.writerow([str(int(k))] + [fmt(v) for v in row])


def write_table(path, cols, table) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for row in table:
            w.writerow([fmt(v) for v in row])


def read_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)


def load_timeseries(run_csv, consensus_csv, n_agents: int, dim: int) -> tuple[TimeSeries, MetricSeries]:
    """Rebuild the recorded series from the two CSV files of a run."""
    cols, run = read_csv(run_csv)
    if cols != run_columns(n_agents, dim):
        raise ValueError(f"{run_csv}: unexpected columns")
    ccols, cons = read_csv(consensus_csv)
    if ccols != consensus_columns(n_agents, dim):
        raise ValueError(f"{consensus_csv}: unexpected columns")
    m, kk, nd = len(run), len(cons), n_agents * dim
    t = run[:, 0]
    x = run[:, 1: 1 + nd].reshape(m, n_agents, dim)
    x_star = run[:, 1 + nd: 1 + nd + dim]
    psi = run[:, 1 + nd + dim: 1 + 2 * nd + dim].reshape(m, n_agents, dim)
    e, grad_norm, dis = run[:, -3], run[:, -2], run[:, -1]
    p = cons[:, 1: 1 + nd].reshape(kk, n_agents, dim)
    pbar = cons[:, 1 + nd: 1 + nd + dim]
    ts = TimeSeries(
        t=t, x=x, psi=psi, x_star=x_star, k=cons[:, 0].astype(int), p=p, pbar=pbar,
        refresh_t=np.empty(0), refresh_x=np.empty((0, n_agents, dim)),
    )
    horizon = t[-1] - t[0]
    ms = MetricSeries(
        e=e, grad_norm=grad_norm, disagreement=dis, consensus_err=cons[:, -1],
        e_bar=average_error(e, t=t, horizon=horizon) if horizon > 0 else float(e[0]),
    )
    return ts, ms


REPORT_FIELDS = (
    "n_agents", "delta_bar", "delta_c", "phi_norm", "phi_rho", "phi", "phi_source",
    "m", "l", "c0", "c1", "bounds_provenance", "c_d", "c_bar", "eps_bar",
    "alpha", "beta", "gamma", "c_nabla", "loop_radius",
)


def format_value(v) -> str:
    if isinstance(v, bool) or isinstance(v, str):
        return str(v).lower() if isinstance(v, bool) else v
    if isinstance(v, int):
        return str(v)
    return fmt(v)


def report_items(r: StabilityReport) -> dict[str, str]:
    items = {k: format_value(getattr(r, k)) for k in REPORT_FIELDS}
    items["consensus_bound"] = format_value(r.consensus_bound)
    items["gradient_bound"] = format_value(r.gradient_bound)
    items["bounds_evaluable"] = format_value(r.evaluable)
    for i, note in enumerate(r.notes, start=1):
        items[f"note_{i}"] = note
    return items


def write_report(path, r: StabilityReport) -> None:
    text = "".join(f"{k} = {v}\n" for k, v in report_items(r).items())
    Path(path).write_text(text)


def parse_value(text: str):
    t = text.strip()
    if t in ("true", "false"):
        return t == "true"
    try:
        if t.lstrip("-").isdigit():
            return int(t)
        return float(t)
    except ValueError:
        return t


def read_report(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        key, _, val = line.partition("=")
        out[key.strip()] = parse_value(val)
    return out


def is_nan(v) -> bool:
    return isinstance(v, float) and math.isnan(v)
