"""Tracking-error metrics and runtime checks of the convergence bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from .costs import Problem
from .dynamics import TimeSeries
from .stability import StabilityReport


@dataclass(frozen=True)
class MetricSeries:
    e: np.ndarray
    grad_norm: np.ndarray
    disagreement: np.ndarray
    consensus_err: np.ndarray
    e_bar: float


@dataclass(frozen=True)
class BoundCheck:
    evaluable: bool
    consensus_pass: bool
    gradient_pass: bool
    consensus_margin: float
    gradient_margin: float
    consensus_bound: float
    gradient_bound: float
    max_consensus_err: float
    max_grad_norm: float

    @property
    def passed(self) -> bool:
        return self.evaluable and self.consensus_pass and self.gradient_pass


def average_error(e, delta_sample: float | None = None, horizon: float | None = None, t=None) -> float:
    """Time average ``(1/T) int_0^T e`` by the trapezoidal rule.

    Give either the uniform sample spacing or the sample times ``t``.
    """
    e = np.asarray(e, dtype=float)
    if t is None:
        if delta_sample is None:
            raise ValueError("need delta_sample or sample times")
        integral = trapezoid(e, dx=delta_sample)
        span = delta_sample * (len(e) - 1)
    else:
        t = np.asarray(t, dtype=float)
        integral = trapezoid(e, t)
        span = t[-1] - t[0]
    horizon = span if horizon is None else horizon
    return float(integral / horizon)


def tracking_error(ts: TimeSeries, p: Problem) -> MetricSeries:
    diff = ts.x - ts.x_star[:, None, :]
    e = np.linalg.norm(diff.reshape(len(ts.t), -1), axis=1)
    grads = np.stack(
        [p.gradients(x, t).mean(axis=0) for x, t in zip(ts.x, ts.t)]
    )
    grad_norm = np.linalg.norm(grads, axis=1)
    dev = ts.x - ts.x.mean(axis=1, keepdims=True)
    disagreement = np.linalg.norm(dev.reshape(len(ts.t), -1), axis=1)
    cdiff = ts.p - ts.pbar[:, None, :]
    consensus_err = np.linalg.norm(cdiff.reshape(len(ts.k), -1), axis=1)
    horizon = ts.t[-1] - ts.t[0]
    e_bar = average_error(e, t=ts.t, horizon=horizon) if horizon > 0 else float(e[0])
    return MetricSeries(e=e, grad_norm=grad_norm, disagreement=disagreement,
                        consensus_err=consensus_err, e_bar=e_bar)


def _margin(value: float, bound: float) -> float:
    if value == 0:
        return 0.0
    if bound == 0:
        return math.inf
    return value / bound


def check_bounds(
    ms: MetricSeries, ts: TimeSeries, report: StabilityReport, transient_fraction: float = 0.5
) -> BoundCheck:
    """Compare measured errors with the consensus and gradient bounds.

    The consensus bound is checked at every round, the gradient bound only
    on samples with ``t > t0 + transient_fraction * T``. Margins are
    ``measured / bound``; a margin ``<= 1`` passes.
    """
    if not 0 <= transient_fraction < 1:
        raise ValueError(f"transient_fraction must be in [0, 1), got {transient_fraction}")
    t0, t1 = ts.t[0], ts.t[-1]
    late = ts.t > t0 + transient_fraction * (t1 - t0)
    max_cons = float(ms.consensus_err.max())
    max_grad = float(ms.grad_norm[late].max()) if late.any() else 0.0
    if not report.evaluable:
        return BoundCheck(False, False, False, math.nan, math.nan, math.nan, math.nan, max_cons, max_grad)
    cb, gb = report.consensus_bound, report.gradient_bound
    cm, gm = _margin(max_cons, cb), _margin(max_grad, gb)
    return BoundCheck(
        evaluable=True,
        consensus_pass=cm <= 1,
        gradient_pass=gm <= 1,
        consensus_margin=cm,
        gradient_margin=gm,
        consensus_bound=cb,
        gradient_bound=gb,
        max_consensus_err=max_cons,
        max_grad_norm=max_grad,
    )
