"""Continuous-time tracking dynamics and the two-timescale orchestration."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import consensus, stability
from .consensus import ConsensusState, ReferenceSet
from .costs import Problem, descent_direction, optimum
from .graph import Graph


class SimulationError(RuntimeError):
    pass


class SimulationDiverged(SimulationError):
    pass


@dataclass(frozen=True)
class OrchestratorConfig:
    delta_t: float
    k_bar: int
    delta_c: float
    horizon: float
    substeps: int = 10

    def __post_init__(self):
        if not self.delta_t > 0:
            raise ValueError(f"delta_t must be positive, got {self.delta_t}")
        if int(self.k_bar) != self.k_bar or self.k_bar < 1:
            raise ValueError(f"k_bar must be a positive integer, got {self.k_bar}")
        if int(self.substeps) != self.substeps or self.substeps < 1:
            raise ValueError(f"substeps must be a positive integer, got {self.substeps}")
        if not self.delta_c > 0:
            raise ValueError(f"delta_c must be positive, got {self.delta_c}")
        if not self.horizon > 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if abs(self.horizon / self.delta_t - self.n_intervals) > 1e-9 * max(1.0, self.n_intervals):
            raise ValueError(
                f"horizon {self.horizon} is not a multiple of delta_t {self.delta_t}"
            )

    @property
    def n_intervals(self) -> int:
        return int(round(self.horizon / self.delta_t))


@dataclass
class TrackerState:
    x: np.ndarray  # (N, n)
    psi: np.ndarray  # (N, n)
    t: float
    s: int


@dataclass
class TimeSeries:
    """Recorded trajectories of one orchestrated run.

    Continuous-time samples ``t, x, psi, x_star`` are taken at every
    integrator substep; ``k, p, pbar`` are the consensus rounds, where the
    rows with ``k`` in ``[s*k_bar, (s+1)*k_bar)`` use the references sampled
    at ``t_s`` (held in ``refresh_t``/``refresh_x``).
    """

    t: np.ndarray
    x: np.ndarray
    psi: np.ndarray
    x_star: np.ndarray
    k: np.ndarray
    p: np.ndarray
    pbar: np.ndarray
    refresh_t: np.ndarray
    refresh_x: np.ndarray
    delta_bar_min: float = math.nan

    @property
    def n_agents(self) -> int:
        return self.x.shape[1]

    @property
    def dimension(self) -> int:
        return self.x.shape[2]


@dataclass
class CentralSeries:
    t: np.ndarray
    x: np.ndarray  # (M, n)
    x_star: np.ndarray


def rhs(x, psi, g: Graph) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    psi = np.asarray(psi, dtype=float)
    if x.shape != psi.shape or x.shape[0] != g.n_agents:
        raise ValueError(f"state shape {x.shape} and estimate shape {psi.shape} mismatch for {g.n_agents} agents")
    return -psi - g.laplacian @ x


def _rk4(f, x: np.ndarray, h: float) -> np.ndarray:
    k1 = f(x)
    k2 = f(x + 0.5 * h * k1)
    k3 = f(x + 0.5 * h * k2)
    k4 = f(x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_interval(
    ts: TrackerState, g: Graph, delta_t: float, substeps: int = 10
) -> tuple[TrackerState, np.ndarray]:
    """Advance ``x`` over one switching period with ``psi`` held.

    Returns the new state and the states at the start of each substep.
    """
    h = delta_t / substeps
    lap = g.laplacian
    psi = ts.psi
    x = ts.x
    samples = np.empty((substeps,) + x.shape)
    for j in range(substeps):
        samples[j] = x
        x = _rk4(lambda y: -psi - lap @ y, x, h)
    if not np.all(np.isfinite(x)):
        raise SimulationDiverged(f"non-finite agent state in interval s={ts.s} (t={ts.t:g})")
    return TrackerState(x=x, psi=psi, t=(ts.s + 1) * delta_t, s=ts.s + 1), samples


def _as_states(problem: Problem, a, name: str) -> np.ndarray | None:
    if a is None:
        return None
    arr = np.asarray(a, dtype=float)
    shape = (problem.n_agents, problem.dimension)
    if arr.size != shape[0] * shape[1]:
        raise ValueError(f"{name} has {arr.size} entries, expected {shape[0] * shape[1]}")
    return arr.reshape(shape)


def orchestrate(
    problem: Problem,
    cfg: OrchestratorConfig,
    x0,
    v0=None,
    z0=None,
    track_delta_bar: bool | None = None,
) -> TimeSeries:
    """Run the consensus estimator and the tracking dynamics together.

    On each interval ``[t_s, t_s + delta_t)``: hold ``psi`` at the current
    estimator output, resample the references at ``(x(t_s), t_s)``, take
    ``k_bar`` consensus rounds, then integrate the agents with ``psi`` held.
    The first ``psi`` is the output for the references at ``(x(0), 0)``.
    """
    g = problem.graph
    n_agents, n = problem.n_agents, problem.dimension
    x = _as_states(problem, x0, "x0").copy()
    if track_delta_bar is None:
        track_delta_bar = not problem.constant_hessian
    d = g.decomposition

    refs = ReferenceSet.sample(problem, x, 0.0)
    cs = ConsensusState.initial(refs, _as_states(problem, v0, "v0"), _as_states(problem, z0, "z0"))
    tracker = TrackerState(x=x, psi=cs.p.copy(), t=0.0, s=0)
    pbar = consensus.weighted_average(refs)

    n_int, sub, kb = cfg.n_intervals, cfg.substeps, cfg.k_bar
    m = n_int * sub + 1
    kk = n_int * kb + 1
    t_out = np.empty(m)
    x_out = np.empty((m, n_agents, n))
    psi_out = np.empty((m, n_agents, n))
    p_out = np.empty((kk, n_agents, n))
    pbar_out = np.empty((kk, n))
    ref_t = np.empty(n_int)
    ref_x = np.empty((n_int, n_agents, n))
    dbar_min = math.inf
    h = cfg.delta_t / sub

    # divergence is detected explicitly below
    with np.errstate(over="ignore", invalid="ignore"):
        for s in range(n_int):
            t_s = s * cfg.delta_t
            psi = cs.p.copy()
            refs = ReferenceSet.sample(problem, tracker.x, t_s)
            ref_t[s], ref_x[s] = t_s, tracker.x
            if track_delta_bar:
                try:
                    ts = stability.build_abar(d, refs.hessians, n)
                    dbar_min = min(dbar_min, stability.delta_bar(ts))
                except stability.NotHurwitzError:
                    dbar_min = math.nan
            cs = cs.rebase(refs)
            pbar = consensus.weighted_average(refs)
            for j in range(kb):
                p_out[s * kb + j] = cs.p
                pbar_out[s * kb + j] = pbar
                cs = consensus.step(cs, refs, g, cfg.delta_c)
            if not np.all(np.isfinite(cs.p)):
                raise SimulationDiverged(f"non-finite consensus output in interval s={s} (t={t_s:g})")
            tracker, samples = integrate_interval(
                TrackerState(x=tracker.x, psi=psi, t=t_s, s=s), g, cfg.delta_t, sub
            )
            rows = slice(s * sub, (s + 1) * sub)
            t_out[rows] = t_s + h * np.arange(sub)
            x_out[rows] = samples
            psi_out[rows] = psi

    p_out[-1] = cs.p
    pbar_out[-1] = pbar
    t_out[-1] = n_int * cfg.delta_t
    x_out[-1] = tracker.x
    psi_out[-1] = tracker.psi
    x_star = np.stack([optimum(problem, t) for t in t_out])
    return TimeSeries(
        t=t_out,
        x=x_out,
        psi=psi_out,
        x_star=x_star,
        k=np.arange(kk),
        p=p_out,
        pbar=pbar_out,
        refresh_t=ref_t,
        refresh_x=ref_x,
        delta_bar_min=dbar_min if track_delta_bar else math.nan,
    )


def central_baseline(problem: Problem, x0, step: float, horizon: float) -> CentralSeries:
    """Centralized prediction-correction flow, integrated with RK4."""
    n_steps = int(round(horizon / step))
    if n_steps < 1 or abs(n_steps * step - horizon) > 1e-9 * max(1.0, horizon):
        raise ValueError(f"horizon {horizon} is not a multiple of step {step}")
    n_agents = problem.n_agents
    x = np.asarray(x0, dtype=float).reshape(problem.dimension)

    def f(y, t):
        return -descent_direction(problem, np.tile(y, (n_agents, 1)), t)

    ts = step * np.arange(n_steps + 1)
    xs = np.empty((n_steps + 1, problem.dimension))
    xs[0] = x
    for i in range(n_steps):
        t = ts[i]
        k1 = f(x, t)
        k2 = f(x + 0.5 * step * k1, t + 0.5 * step)
        k3 = f(x + 0.5 * step * k2, t + 0.5 * step)
        k4 = f(x + step * k3, t + step)
        x = x + (step / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise SimulationDiverged(f"central baseline diverged at t={t:g}")
        xs[i + 1] = x
    x_star = np.stack([optimum(problem, t) for t in ts])
    return CentralSeries(t=ts, x=xs, x_star=x_star)


def interval_map_radius(problem: Problem, cfg: OrchestratorConfig) -> float:
    """Spectral radius of the closed loop over one switching period.

    For quadratic costs the whole algorithm is affine in its state
    ``(x, R^T v, z, p)``; this returns the spectral radius of the linear
    part. Values ``>= 1`` mean the coupled loop diverges even when the
    estimator alone is stable. The component of ``v`` along ``1`` never
    influences anything and is factored out.
    """
    if not problem.is_quadratic:
        raise ValueError("interval map is linear only for quadratic cost families")
    g = problem.graph
    n_agents, n = problem.n_agents, problem.dimension
    r_mat = g.decomposition.r_mat
    hess = np.stack([c.a for c in problem.costs])
    sizes = [n_agents * n, (n_agents - 1) * n, n_agents * n, n_agents * n]
    dim = sum(sizes)
    cols = np.empty((dim, dim))
    splits = np.cumsum(sizes)[:-1]
    for col in range(dim):
        e = np.zeros(dim)
        e[col] = 1.0
        xb, ub, zb, pb = np.split(e, splits)
        x = xb.reshape(n_agents, n)
        v = r_mat @ ub.reshape(n_agents - 1, n)
        z = zb.reshape(n_agents, n)
        psi = pb.reshape(n_agents, n)
        refs = ReferenceSet(hessians=hess, gh=np.einsum("ijk,ik->ij", hess, x))
        cs = ConsensusState(v=v, z=z, p=z + refs.gh)
        cs = consensus.run(cs, refs, g, cfg.delta_c, cfg.k_bar)
        tracker, _ = integrate_interval(TrackerState(x=x, psi=psi, t=0.0, s=0), g, cfg.delta_t, cfg.substeps)
        cols[:, col] = np.concatenate(
            [tracker.x.ravel(), (r_mat.T @ cs.v).ravel(), cs.z.ravel(), cs.p.ravel()]
        )
    return float(max(abs(np.linalg.eigvals(cols))))
