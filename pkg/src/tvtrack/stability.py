"""Transformed consensus system and the constants of the convergence bounds.

``build_abar`` assembles the error dynamics of the consensus estimator in
the coordinates ``(T^T (p - pbar), q_{2:N})``. Everything else turns
curvature/gradient bounds and the contraction factor of ``I + delta_c A``
into the two asymptotic guarantees: a bound on ``||p - pbar||`` and a bound
on the average gradient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import linalg
from .costs import CostBounds, Problem
from .graph import LaplacianDecomposition

AUTO_DELTA_FRACTION = 0.5


class StabilityError(ValueError):
    pass


class NotHurwitzError(StabilityError):
    def __init__(self, eigenvalue: complex):
        super().__init__(f"system matrix is not Hurwitz: eigenvalue {eigenvalue:.6g} has Re >= 0")
        self.eigenvalue = eigenvalue


class InfeasibleParametersError(StabilityError):
    def __init__(self, violated: list[str]):
        super().__init__("infeasible Lyapunov parameters: " + "; ".join(violated))
        self.violated = violated


@dataclass(frozen=True)
class TransformedSystem:
    a_bar: np.ndarray
    b_bar: np.ndarray
    n_agents: int
    dimension: int


@dataclass(frozen=True)
class BoundConstants:
    c_d: float
    c_bar: float
    eps_bar: float


@dataclass(frozen=True)
class StabilityReport:
    n_agents: int
    delta_bar: float
    delta_c: float
    phi_norm: float
    phi_rho: float
    phi: float
    phi_source: str
    m: float
    l: float
    c0: float
    c1: float
    bounds_provenance: str
    c_d: float
    c_bar: float
    eps_bar: float
    alpha: float
    beta: float
    gamma: float
    c_nabla: float
    loop_radius: float = math.nan
    notes: tuple[str, ...] = field(default=())

    @property
    def evaluable(self) -> bool:
        return math.isfinite(self.eps_bar)

    @property
    def consensus_bound(self) -> float:
        """Asymptotic bound on ``||p(k) - pbar(k)||`` over the whole network."""
        if not self.evaluable:
            return math.nan
        return self.n_agents * self.c_bar * (1 + self.phi) / (1 - self.phi**2)

    @property
    def gradient_bound(self) -> float:
        if not self.evaluable:
            return math.nan
        return self.c_nabla * self.eps_bar


def _block_diag(blocks: np.ndarray) -> np.ndarray:
    return scipy.linalg.block_diag(*blocks)


def build_abar(d: LaplacianDecomposition, hessians, n: int) -> TransformedSystem:
    """Assemble ``A_bar`` and ``B_bar`` for per-agent Hessians ``(N, n, n)``."""
    n_agents = d.laplacian.shape[0]
    h = np.asarray(hessians, dtype=float)
    if h.ndim == 2 and h.shape == (n_agents * n, n_agents * n):
        h_big = h
    else:
        h = h.reshape(n_agents, n, n)
        for i, blk in enumerate(h):
            if not np.allclose(blk, blk.T, rtol=0, atol=1e-10 * max(1.0, np.abs(blk).max())):
                raise StabilityError(f"Hessian block {i} is not symmetric")
        h_big = _block_diag(h)
    if h_big.shape != (n_agents * n, n_agents * n):
        raise StabilityError(f"Hessian matrix has shape {h_big.shape}, expected {(n_agents * n,) * 2}")
    if not np.any(h_big) and not np.any(d.laplacian):
        raise StabilityError("zero Hessians with a zero Laplacian give a degenerate system")
    eye = np.eye(n)
    t_n = linalg.kron(d.t_mat, eye)
    l_n = linalg.kron(d.laplacian, eye)
    m = (n_agents - 1) * n
    size = n_agents * n + m
    a_bar = np.zeros((size, size))
    a_bar[: n_agents * n, : n_agents * n] = -t_n.T @ (h_big + l_n) @ t_n
    a_bar[n: n_agents * n, n_agents * n:] = -np.eye(m)
    a_bar[n_agents * n:, n: n_agents * n] = linalg.kron(d.l_plus @ d.l_plus, eye)
    b = np.zeros((2 * n_agents - 1, 2 * n_agents))
    b[:n_agents, :n_agents] = d.t_mat.T
    b[n_agents:, n_agents:] = d.r_mat.T
    return TransformedSystem(a_bar=a_bar, b_bar=linalg.kron(b, eye), n_agents=n_agents, dimension=n)


def delta_bar(ts: TransformedSystem) -> float:
    """Largest admissible consensus step: ``min -2 Re(g) / |g|^2`` over the spectrum."""
    vals = linalg.eig_general(ts.a_bar)
    worst = max(vals, key=lambda g: g.real)
    if worst.real >= 0:
        raise NotHurwitzError(worst)
    return min(-2.0 * g.real / abs(g) ** 2 for g in vals)


def phi(ts: TransformedSystem, delta_c: float) -> tuple[float, float]:
    """Spectral norm and spectral radius of ``I + delta_c A_bar``."""
    if delta_c <= 0:
        raise StabilityError(f"delta_c must be positive, got {delta_c}")
    m = np.eye(ts.a_bar.shape[0]) + delta_c * ts.a_bar
    return linalg.spectral_norm(m), linalg.spectral_radius(m)


def constants(b: CostBounds, phi_value: float) -> BoundConstants:
    if not 0 <= phi_value < 1:
        raise StabilityError(
            f"contraction factor phi = {phi_value:.6g} is not below 1; reduce delta_c"
        )
    c_d = b.c_d
    c_bar = 8.0 * (b.c0 + b.c1) + 2.0 * (1.0 + 2.0 * b.l) * c_d
    eps_bar = 2.0 * c_d + c_bar * (1.0 + phi_value) / (1.0 - phi_value**2)
    return BoundConstants(c_d=c_d, c_bar=c_bar, eps_bar=eps_bar)


def lyapunov_feasibility(l: float, alpha: float, beta: float, gamma: float) -> list[str]:
    """Constraints of the gradient-bound argument that ``(alpha, beta, gamma)`` violates.

    Needs ``alpha, gamma > 0``, ``beta > l^2/2`` (positive leading
    coefficient) and ``alpha - (alpha*gamma + beta)/2 > 0`` (the
    disagreement term is dissipative), which forces ``alpha > l^2/4``.
    """
    violated = []
    if alpha <= 0:
        violated.append(f"alpha > 0 (alpha = {alpha:g})")
    if gamma <= 0:
        violated.append(f"gamma > 0 (gamma = {gamma:g})")
    if beta <= l**2 / 2:
        violated.append(f"beta > l^2/2 (beta = {beta:g}, l^2/2 = {l**2 / 2:g})")
    if alpha - (alpha * gamma + beta) / 2 <= 0:
        violated.append(
            f"alpha - (alpha*gamma + beta)/2 > 0 (value {alpha - (alpha * gamma + beta) / 2:g})"
        )
    return violated


def c_nabla(b: CostBounds, alpha: float, beta: float, gamma: float) -> float:
    l = b.l
    violated = []
    if alpha <= 0:
        violated.append(f"alpha > 0 (alpha = {alpha:g})")
    if gamma <= 0:
        violated.append(f"gamma > 0 (gamma = {gamma:g})")
    if beta <= l**2 / 2:
        violated.append(f"beta > l^2/2 (beta = {beta:g}, l^2/2 = {l**2 / 2:g})")
    if violated:
        raise InfeasibleParametersError(violated)
    den = 2.0 - l**2 / beta
    return (l + math.sqrt(l**2 + (alpha / gamma) * den)) / den


def select_lyapunov_params(b: CostBounds) -> tuple[float, float, float]:
    """Deterministic ``(alpha, beta, gamma)`` inside the feasible set."""
    l2 = b.l**2
    alpha, beta = l2, l2
    gamma = 0.5 * (2.0 - beta / alpha)
    return alpha, beta, gamma


def analyze(
    problem: Problem,
    delta_c: float | None = None,
    states=None,
    t: float = 0.0,
    loop_radius: float = math.nan,
) -> StabilityReport:
    """Stability constants for ``problem`` at the Hessians of ``(states, t)``.

    ``delta_c=None`` selects ``AUTO_DELTA_FRACTION * delta_bar``. Constant
    Hessian families give the same ``A_bar`` for every ``k``.
    """
    if problem.bounds is None:
        raise StabilityError("problem has no cost bounds; attach them with Problem.with_bounds")
    b = problem.bounds
    n_agents, n = problem.n_agents, problem.dimension
    x = np.zeros((n_agents, n)) if states is None else np.asarray(states, dtype=float).reshape(n_agents, n)
    ts = build_abar(problem.graph.decomposition, problem.hessians(x, t), n)
    dbar = delta_bar(ts)
    dc = AUTO_DELTA_FRACTION * dbar if delta_c is None else float(delta_c)
    notes = []
    if dc >= dbar:
        notes.append(f"delta_c = {dc:.6g} is not below delta_bar = {dbar:.6g}")
    phi_norm, phi_rho = phi(ts, dc)
    if phi_norm < 1:
        phi_used, source = phi_norm, "norm"
    else:
        phi_used, source = phi_rho, "radius"
        notes.append(
            f"||I + delta_c A_bar|| = {phi_norm:.6g} >= 1 (non-normal); using spectral radius {phi_rho:.6g}"
        )
    try:
        consts = constants(b, phi_used)
    except StabilityError as exc:
        notes.append(f"bounds not evaluable: {exc}")
        c_d = b.c_d
        consts = BoundConstants(
            c_d=c_d, c_bar=8.0 * (b.c0 + b.c1) + 2.0 * (1.0 + 2.0 * b.l) * c_d, eps_bar=math.nan
        )
    alpha, beta, gamma = select_lyapunov_params(b)
    violated = lyapunov_feasibility(b.l, alpha, beta, gamma)
    if violated:
        notes.append("Lyapunov parameters violate: " + "; ".join(violated))
    if math.isfinite(loop_radius) and loop_radius >= 1:
        notes.append(f"closed-loop interval map has spectral radius {loop_radius:.6g} >= 1")
    return StabilityReport(
        n_agents=n_agents,
        delta_bar=dbar,
        delta_c=dc,
        phi_norm=phi_norm,
        phi_rho=phi_rho,
        phi=phi_used,
        phi_source=source,
        m=b.m,
        l=b.l,
        c0=b.c0,
        c1=b.c1,
        bounds_provenance=b.provenance,
        c_d=consts.c_d,
        c_bar=consts.c_bar,
        eps_bar=consts.eps_bar,
        alpha=alpha,
        beta=beta,
        gamma=gamma,
        c_nabla=c_nabla(b, alpha, beta, gamma),
        loop_radius=loop_radius,
        notes=tuple(notes),
    )
