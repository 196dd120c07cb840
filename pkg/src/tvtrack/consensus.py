"""Discrete-time weighted-average consensus estimator.

Each agent ``i`` holds auxiliary states ``v^i, z^i`` and the output
``p^i = z^i + g^i + h^i``. With frozen references every ``p^i`` converges
to the Hessian-weighted average ``(sum H^i)^{-1} sum (g^i + h^i)``.

Stacked quantities are ``(N, n)`` arrays; the Laplacian acts on the agent
axis, which is the action of ``L kron I_n`` on the flattened vector.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import linalg
from .costs import Problem
from .graph import Graph, LaplacianDecomposition


class ConsensusError(ValueError):
    pass


@dataclass(frozen=True)
class ReferenceSet:
    hessians: np.ndarray  # (N, n, n)
    gh: np.ndarray  # (N, n), g^i + h^i
    t_s: float = 0.0

    def __post_init__(self):
        h = np.asarray(self.hessians, dtype=float)
        gh = np.asarray(self.gh, dtype=float)
        if gh.ndim == 1:
            gh = gh[:, None]
        if h.ndim == 1:
            h = h[:, None, None]
        n_agents, n = gh.shape
        if h.shape != (n_agents, n, n):
            raise ConsensusError(f"hessians shape {h.shape} does not match gh shape {gh.shape}")
        object.__setattr__(self, "hessians", h)
        object.__setattr__(self, "gh", gh)

    @property
    def n_agents(self) -> int:
        return self.gh.shape[0]

    @property
    def dimension(self) -> int:
        return self.gh.shape[1]

    @classmethod
    def sample(cls, problem: Problem, states, t: float) -> ReferenceSet:
        """Local derivatives of every agent at its own state and time ``t``."""
        x = np.asarray(states, dtype=float).reshape(problem.n_agents, problem.dimension)
        return cls(
            hessians=problem.hessians(x, t),
            gh=problem.gradients(x, t) + problem.mixed(x, t),
            t_s=float(t),
        )


@dataclass(frozen=True)
class ConsensusState:
    v: np.ndarray
    z: np.ndarray
    p: np.ndarray
    k: int = 0

    @classmethod
    def initial(cls, refs: ReferenceSet, v0=None, z0=None) -> ConsensusState:
        shape = refs.gh.shape
        v = np.zeros(shape) if v0 is None else np.asarray(v0, dtype=float).reshape(shape)
        z = np.zeros(shape) if z0 is None else np.asarray(z0, dtype=float).reshape(shape)
        return cls(v=v, z=z, p=z + refs.gh, k=0)

    def rebase(self, refs: ReferenceSet) -> ConsensusState:
        """Recompute the output against freshly sampled references."""
        return replace(self, p=self.z + refs.gh)


@dataclass(frozen=True)
class ConsensusDiagnostics:
    pbar: np.ndarray
    e_transformed: np.ndarray
    q1: np.ndarray
    q2n: np.ndarray
    w: np.ndarray

    @property
    def y(self) -> np.ndarray:
        return np.concatenate([self.e_transformed.ravel(), self.q2n.ravel()])


def weighted_average(refs: ReferenceSet) -> np.ndarray:
    return linalg.solve_linear(refs.hessians.sum(axis=0), refs.gh.sum(axis=0))


def _check(s: ConsensusState, refs: ReferenceSet, g: Graph):
    if s.v.shape != refs.gh.shape or s.z.shape != refs.gh.shape:
        raise ConsensusError(f"state shape {s.z.shape} does not match references {refs.gh.shape}")
    if refs.n_agents != g.n_agents:
        raise ConsensusError(f"references for {refs.n_agents} agents, graph has {g.n_agents}")


def step(s: ConsensusState, refs: ReferenceSet, g: Graph, delta_c: float) -> ConsensusState:
    """One synchronous round: all agents read round-k values, then write."""
    if delta_c <= 0:
        raise ConsensusError(f"delta_c must be positive, got {delta_c}")
    _check(s, refs, g)
    lap = g.laplacian
    hp = np.einsum("ijk,ik->ij", refs.hessians, s.p)
    v = s.v + delta_c * (lap @ s.p)
    z = s.z - delta_c * (hp - refs.gh + lap @ (s.p + s.v))
    return ConsensusState(v=v, z=z, p=z + refs.gh, k=s.k + 1)


def step_local(s: ConsensusState, refs: ReferenceSet, g: Graph, delta_c: float) -> ConsensusState:
    """Per-agent form of :func:`step`; agent ``i`` reads only its neighbours."""
    _check(s, refs, g)
    v = np.empty_like(s.v)
    z = np.empty_like(s.z)
    for i in range(g.n_agents):
        dp = np.zeros(refs.dimension)
        dv = np.zeros(refs.dimension)
        for j in g.neighbors(i):
            a_ij = g.adjacency[i, j]
            dp += a_ij * (s.p[i] - s.p[j])
            dv += a_ij * (s.v[i] - s.v[j])
        v[i] = s.v[i] + delta_c * dp
        z[i] = s.z[i] - delta_c * (refs.hessians[i] @ s.p[i] - refs.gh[i] + dp + dv)
    return ConsensusState(v=v, z=z, p=z + refs.gh, k=s.k + 1)


def run(
    s: ConsensusState, refs: ReferenceSet, g: Graph, delta_c: float, k_bar: int
) -> ConsensusState:
    if k_bar < 1:
        raise ConsensusError(f"k_bar must be at least 1, got {k_bar}")
    for _ in range(k_bar):
        s = step(s, refs, g, delta_c)
    return s


def diagnostics(
    s: ConsensusState, refs: ReferenceSet, d: LaplacianDecomposition
) -> ConsensusDiagnostics:
    """Coordinates of the state in the consensus/disagreement basis ``T``."""
    if d.laplacian.shape[0] != refs.n_agents:
        raise ConsensusError("decomposition does not match the reference set")
    pbar = weighted_average(refs)
    t = d.t_mat
    w = refs.gh - np.einsum("ijk,k->ij", refs.hessians, pbar)
    e_tr = t.T @ (s.p - pbar)
    q = t.T @ (d.laplacian @ s.v - w)
    return ConsensusDiagnostics(pbar=pbar, e_transformed=e_tr, q1=q[0], q2n=q[1:], w=w)
