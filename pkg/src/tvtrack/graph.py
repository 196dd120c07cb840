"""Undirected weighted graphs and the Laplacian decomposition.

The decomposition splits ``R^N`` into the consensus direction
``r = 1/sqrt(N)`` and an orthonormal complement ``R``; ``T = [r R]`` maps
stacked agent vectors into coordinates where the Laplacian is
``diag(0, L+)`` with ``L+ = R^T L R``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import linalg

CONNECTIVITY_TOL = 1e-10


class GraphError(ValueError):
    pass


class DisconnectedGraphError(GraphError):
    def __init__(self, lambda2: float):
        super().__init__(f"graph is not connected (lambda_2 = {lambda2:.3e})")
        self.lambda2 = lambda2


@dataclass(frozen=True)
class LaplacianDecomposition:
    laplacian: np.ndarray
    lam: np.ndarray
    r_vec: np.ndarray
    r_mat: np.ndarray
    t_mat: np.ndarray
    l_plus: np.ndarray


class Graph:
    """An undirected graph given by a symmetric nonnegative adjacency matrix.

    Connectivity is checked on construction, so every ``Graph`` instance has
    ``lambda_2 > 0``.
    """

    def __init__(self, adjacency):
        a = np.array(adjacency, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
            raise GraphError(f"adjacency must be a non-empty square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise GraphError("adjacency has non-finite entries")
        if np.any(a < 0):
            raise GraphError("adjacency weights must be nonnegative")
        if np.any(np.diag(a) != 0):
            raise GraphError("adjacency must have a zero diagonal (no self loops)")
        if not np.array_equal(a, a.T):
            raise GraphError("adjacency must be symmetric")
        a.setflags(write=False)
        self.adjacency = a
        lam = self.decomposition.lam
        if self.n_agents > 1 and lam[1] <= CONNECTIVITY_TOL:
            raise DisconnectedGraphError(float(lam[1]))

    @property
    def n_agents(self) -> int:
        return self.adjacency.shape[0]

    @classmethod
    def from_edges(cls, n_agents: int, edges) -> Graph:
        """Build from ``(i, j)`` or ``(i, j, weight)`` tuples with 0-based indices."""
        a = np.zeros((n_agents, n_agents))
        for edge in edges:
            i, j = int(edge[0]), int(edge[1])
            w = float(edge[2]) if len(edge) > 2 else 1.0
            if not (0 <= i < n_agents and 0 <= j < n_agents):
                raise GraphError(f"edge ({i}, {j}) out of range for {n_agents} agents")
            if i == j:
                raise GraphError(f"self loop at node {i}")
            a[i, j] = a[j, i] = w
        return cls(a)

    @classmethod
    def ring(cls, n_agents: int) -> Graph:
        if n_agents < 3:
            return cls.path(n_agents)
        return cls.from_edges(n_agents, [(i, (i + 1) % n_agents) for i in range(n_agents)])

    @classmethod
    def path(cls, n_agents: int) -> Graph:
        return cls.from_edges(n_agents, [(i, i + 1) for i in range(n_agents - 1)])

    @classmethod
    def complete(cls, n_agents: int) -> Graph:
        return cls.from_edges(
            n_agents, [(i, j) for i in range(n_agents) for j in range(i + 1, n_agents)]
        )

    def neighbors(self, i: int) -> list[int]:
        return [int(j) for j in np.flatnonzero(self.adjacency[i])]

    @cached_property
    def laplacian(self) -> np.ndarray:
        lap = np.diag(self.adjacency.sum(axis=1)) - self.adjacency
        lap.setflags(write=False)
        return lap

    @cached_property
    def decomposition(self) -> LaplacianDecomposition:
        return decompose(self)

    def __repr__(self) -> str:
        return f"Graph(n_agents={self.n_agents}, edges={int(np.count_nonzero(self.adjacency) // 2)})"


def laplacian(g: Graph) -> np.ndarray:
    return g.laplacian


def consensus_basis(n: int) -> np.ndarray:
    """Orthogonal ``T`` whose first column is ``1/sqrt(n)``.

    Uses the Householder reflector mapping ``e_1`` onto ``1/sqrt(n)``, so the
    result depends only on ``n``.
    """
    r = np.full(n, 1.0 / np.sqrt(n))
    u = r.copy()
    u[0] -= 1.0
    uu = u @ u
    if uu == 0.0:
        return np.eye(n)
    t = np.eye(n) - (2.0 / uu) * np.outer(u, u)
    t[:, 0] = r
    return t


def decompose(g: Graph) -> LaplacianDecomposition:
    lap = g.laplacian
    lam, _ = linalg.eig_symmetric(lap)
    t = consensus_basis(g.n_agents)
    r_mat = t[:, 1:]
    l_plus = r_mat.T @ lap @ r_mat
    l_plus = 0.5 * (l_plus + l_plus.T)
    for arr in (lam, t, l_plus):
        arr.setflags(write=False)
    return LaplacianDecomposition(
        laplacian=lap, lam=lam, r_vec=t[:, 0], r_mat=r_mat, t_mat=t, l_plus=l_plus
    )


def apply_laplacian_stacked(g: Graph, s, n: int) -> np.ndarray:
    """Compute ``(L kron I_n) s`` for a flat vector of ``N*n`` entries."""
    s = np.asarray(s, dtype=float)
    if s.ndim != 1 or s.size != g.n_agents * n:
        raise GraphError(f"expected {g.n_agents * n} stacked entries, got shape {s.shape}")
    return (g.laplacian @ s.reshape(g.n_agents, n)).reshape(-1)
