"""Time-varying local costs, derivative bounds and optimum oracles."""

from __future__ import annotations

import abc
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from . import linalg
from .graph import Graph

BOUND_INFLATION = 1.1


class CostError(ValueError):
    pass


class NoClosedFormError(CostError):
    """The problem family has no analytic optimum; use :func:`numeric_optimum`."""


class ConvergenceError(RuntimeError):
    pass


class CostModel(abc.ABC):
    """A local cost ``f(x, t)`` on ``R^n`` with exact derivatives.

    Subclasses provide the value, the gradient in ``x``, the Hessian in
    ``x`` and the mixed derivative ``d/dt grad_x f``. ``curvature_bounds``
    should return the declared ``(m, l)`` with ``m I <= hessian <= l I``.
    """

    dimension: int = 1
    #: True when the Hessian does not depend on ``(x, t)``.
    constant_hessian: bool = False

    @abc.abstractmethod
    def value(self, x: np.ndarray, t: float) -> float: ...

    @abc.abstractmethod
    def grad(self, x: np.ndarray, t: float) -> np.ndarray: ...

    @abc.abstractmethod
    def hessian(self, x: np.ndarray, t: float) -> np.ndarray: ...

    @abc.abstractmethod
    def grad_xt(self, x: np.ndarray, t: float) -> np.ndarray: ...

    def curvature_bounds(self) -> tuple[float, float] | None:
        return None


class QuadraticCost(CostModel):
    """``f(x, t) = 1/2 x^T A x + (c + s sin(nu t))^T x``.

    ``A`` must be symmetric positive definite. With ``n = 1``,
    ``A = 2a``, ``c = 0``, ``s = 1`` and ``nu = b*omega`` this is
    :class:`QuadraticSinusoidalCost`.
    """

    constant_hessian = True

    def __init__(self, hessian, offset=None, amplitude=None, rate: float = 0.0):
        a = np.atleast_2d(np.asarray(hessian, dtype=float))
        n = a.shape[0]
        if a.shape != (n, n):
            raise CostError(f"hessian must be square, got shape {a.shape}")
        vals, _ = linalg.eig_symmetric(a)
        if vals[0] <= 0:
            raise CostError(f"hessian must be positive definite (min eigenvalue {vals[0]:.3e})")
        self.dimension = n
        self.a = a
        self.offset = np.zeros(n) if offset is None else np.asarray(offset, dtype=float).reshape(n)
        self.amplitude = (
            np.zeros(n) if amplitude is None else np.asarray(amplitude, dtype=float).reshape(n)
        )
        self.rate = float(rate)
        self._bounds = (float(vals[0]), float(vals[-1]))

    def linear_term(self, t: float) -> np.ndarray:
        return self.offset + self.amplitude * np.sin(self.rate * t)

    def value(self, x, t):
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ self.a @ x + self.linear_term(t) @ x)

    def grad(self, x, t):
        return self.a @ np.asarray(x, dtype=float) + self.linear_term(t)

    def hessian(self, x, t):
        return self.a.copy()

    def grad_xt(self, x, t):
        return self.amplitude * self.rate * np.cos(self.rate * t)

    def curvature_bounds(self):
        return self._bounds

    def __repr__(self) -> str:
        return f"QuadraticCost(n={self.dimension}, rate={self.rate})"


class QuadraticSinusoidalCost(QuadraticCost):
    """Scalar cost ``a x^2 + sin(b omega t) x``."""

    def __init__(self, curvature: float, multiplier: float, omega: float):
        if curvature <= 0:
            raise CostError(f"curvature must be positive, got {curvature}")
        super().__init__([[2.0 * curvature]], offset=[0.0], amplitude=[1.0], rate=multiplier * omega)
        self.curvature = float(curvature)
        self.multiplier = float(multiplier)
        self.omega = float(omega)

    def __repr__(self) -> str:
        return f"QuadraticSinusoidalCost(a={self.curvature}, b={self.multiplier}, omega={self.omega})"


@dataclass(frozen=True)
class CostBounds:
    m: float
    l: float
    c0: float
    c1: float
    provenance: str = "declared"

    def __post_init__(self):
        if not (0 < self.m <= self.l):
            raise CostError(f"need 0 < m <= l, got m={self.m}, l={self.l}")
        if self.c0 < 0 or self.c1 < 0:
            raise CostError("gradient bounds c0, c1 must be nonnegative")
        if self.provenance not in ("declared", "sampled"):
            raise CostError(f"unknown provenance {self.provenance!r}")

    @property
    def c_d(self) -> float:
        """Bound on the norm of the global descent direction."""
        return (self.c0 + self.c1) / self.m


@dataclass(frozen=True)
class Problem:
    graph: Graph
    costs: tuple[CostModel, ...]
    bounds: CostBounds | None = None

    def __post_init__(self):
        object.__setattr__(self, "costs", tuple(self.costs))
        if len(self.costs) != self.graph.n_agents:
            raise CostError(
                f"{len(self.costs)} costs given for a graph with {self.graph.n_agents} agents"
            )
        dims = {c.dimension for c in self.costs}
        if len(dims) != 1:
            raise CostError(f"all costs must share one dimension, got {sorted(dims)}")

    @property
    def n_agents(self) -> int:
        return self.graph.n_agents

    @property
    def dimension(self) -> int:
        return self.costs[0].dimension

    @property
    def constant_hessian(self) -> bool:
        return all(c.constant_hessian for c in self.costs)

    @property
    def is_quadratic(self) -> bool:
        return all(isinstance(c, QuadraticCost) for c in self.costs)

    def curvature_bounds(self) -> tuple[float, float] | None:
        per_agent = [c.curvature_bounds() for c in self.costs]
        if any(b is None for b in per_agent):
            return None
        return min(b[0] for b in per_agent), max(b[1] for b in per_agent)

    def with_bounds(self, bounds: CostBounds) -> Problem:
        return Problem(self.graph, self.costs, bounds)

    def hessians(self, states: np.ndarray, t: float) -> np.ndarray:
        return np.stack([c.hessian(x, t) for c, x in zip(self.costs, states)])

    def gradients(self, states: np.ndarray, t: float) -> np.ndarray:
        return np.stack([c.grad(x, t) for c, x in zip(self.costs, states)])

    def mixed(self, states: np.ndarray, t: float) -> np.ndarray:
        return np.stack([c.grad_xt(x, t) for c, x in zip(self.costs, states)])

    def average_gradient(self, x: np.ndarray, t: float) -> np.ndarray:
        """Gradient of ``(1/N) sum_i f^i`` at the common point ``x``."""
        return np.mean([c.grad(x, t) for c in self.costs], axis=0)


def _check_dim(c: CostModel, x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (c.dimension,):
        raise CostError(f"state has shape {x.shape}, cost expects ({c.dimension},)")
    return x


def derivatives(c: CostModel, x, t: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(grad, hessian, grad_xt)`` of ``c`` at ``(x, t)``."""
    x = _check_dim(c, x)
    return c.grad(x, t), c.hessian(x, t), c.grad_xt(x, t)


def _stack_states(p: Problem, states) -> np.ndarray:
    s = np.asarray(states, dtype=float).reshape(p.n_agents, p.dimension)
    return s


def descent_direction(p: Problem, states, t: float) -> np.ndarray:
    """Newton-like global direction built from each agent's own state.

    Solves ``(sum_i H^i) d = sum_i (g^i + h^i)`` with every local derivative
    evaluated at that agent's state.
    """
    s = _stack_states(p, states)
    h_sum = p.hessians(s, t).sum(axis=0)
    rhs = (p.gradients(s, t) + p.mixed(s, t)).sum(axis=0)
    return linalg.solve_linear(h_sum, rhs)


def optimal_trajectory(p: Problem, t: float) -> np.ndarray:
    if not p.is_quadratic:
        raise NoClosedFormError("no closed-form optimum for this cost family; use numeric_optimum")
    a_sum = sum(c.a for c in p.costs)
    b_sum = sum(c.linear_term(t) for c in p.costs)
    return 0.0 - linalg.solve_linear(a_sum, b_sum)


def numeric_optimum(
    p: Problem, t: float, tol: float = 1e-10, x0=None, max_iter: int = 100
) -> np.ndarray:
    """Newton iteration on the frozen average cost at time ``t``."""
    n = p.dimension
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).reshape(n)
    for _ in range(max_iter):
        g = p.average_gradient(x, t)
        if np.linalg.norm(g) <= tol:
            return x
        h = np.mean([c.hessian(x, t) for c in p.costs], axis=0)
        x = x - linalg.solve_linear(h, g)
    g = p.average_gradient(x, t)
    if np.linalg.norm(g) <= tol:
        return x
    raise ConvergenceError(
        f"Newton iteration did not reach tol={tol:g} in {max_iter} steps (|grad| = {np.linalg.norm(g):.3e})"
    )


def optimum(p: Problem, t: float) -> np.ndarray:
    try:
        return optimal_trajectory(p, t)
    except NoClosedFormError:
        return numeric_optimum(p, t)


def _sample_points(n_dims: int, samples: int) -> np.ndarray:
    # unscrambled Halton keeps the estimate deterministic
    pts = qmc.Halton(d=n_dims, scramble=False).random(samples + 1)[1:]
    return pts


def estimate_bounds(
    p: Problem, region: tuple[float, float], t_range: tuple[float, float], samples: int = 256
) -> CostBounds:
    """Estimate ``m, l, C0, C1`` by sampling a box region and a time window.

    Every agent's state is sampled over the box ``[lo, hi]^n``; box corners
    are always included. Gradient bounds are inflated by 10%; curvature
    bounds are exact when the costs declare them.
    """
    if samples < 1:
        raise CostError("samples must be at least 1")
    lo, hi = float(region[0]), float(region[1])
    t0, t1 = float(t_range[0]), float(t_range[1])
    if lo > hi or t0 > t1:
        raise CostError(f"empty region {region} or time window {t_range}")
    n = p.dimension
    unit = _sample_points(n + 1, samples)
    xs = lo + (hi - lo) * unit[:, :n]
    ts = t0 + (t1 - t0) * unit[:, n]
    corners = np.array(np.meshgrid(*[[lo, hi]] * n)).reshape(n, -1).T if n <= 10 else np.empty((0, n))
    corner_ts = np.linspace(t0, t1, max(1, min(samples, 16)))
    pts = [(x, t) for x, t in zip(xs, ts)]
    pts += [(x, t) for x in corners for t in corner_ts]
    return _bounds_from_points(p, [[x] * p.n_agents for x, _ in pts], [t for _, t in pts])


def bounds_along_optimum(
    p: Problem, t_range: tuple[float, float], samples: int = 256
) -> CostBounds:
    """Bounds sampled with every agent sitting on the optimal trajectory."""
    ts = np.linspace(float(t_range[0]), float(t_range[1]), max(samples, 1))
    return _bounds_from_points(p, [[optimum(p, t)] * p.n_agents for t in ts], ts)


def _bounds_from_points(p: Problem, states, ts) -> CostBounds:
    c0 = c1 = 0.0
    m_s, l_s = np.inf, 0.0
    declared = p.curvature_bounds()
    for xs, t in zip(states, ts):
        for c, x in zip(p.costs, xs):
            g, h, gt = derivatives(c, x, t)
            c0 = max(c0, float(np.linalg.norm(g)))
            c1 = max(c1, float(np.linalg.norm(gt)))
            if declared is None:
                ev = np.linalg.eigvalsh(h)
                m_s, l_s = min(m_s, ev[0]), max(l_s, ev[-1])
    m, l = declared if declared is not None else (float(m_s), float(l_s))
    return CostBounds(m=m, l=l, c0=BOUND_INFLATION * c0, c1=BOUND_INFLATION * c1, provenance="sampled")
