"""Dense matrix kernels used across the package.

Thin, contract-checked wrappers around numpy/scipy. Matrices are plain
``numpy.ndarray`` objects; eigenvalues of non-symmetric matrices are Python
``complex`` values.
"""

from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg

SYMMETRY_TOL = 1e-10
PIVOT_TOL = 1e-12


class LinalgError(ValueError):
    """Raised when an input violates a kernel's preconditions."""


class SingularMatrixError(LinalgError):
    def __init__(self, pivot: int, magnitude: float):
        super().__init__(
            f"matrix is singular to working precision: pivot {pivot} has magnitude {magnitude:.3e}"
        )
        self.pivot = pivot


class EigenSolverError(RuntimeError):
    """The eigenvalue iteration failed to converge."""


def _as_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if a.ndim != 2:
        raise LinalgError(f"expected a 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise LinalgError("matrix has non-finite entries")
    return a


def _as_square(m) -> np.ndarray:
    a = _as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise LinalgError(f"expected a square matrix, got shape {a.shape}")
    return a


def kron(a, b) -> np.ndarray:
    return np.kron(_as_matrix(a), _as_matrix(b))


def eig_symmetric(m) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a real symmetric matrix.

    Returns ``(values, vectors)`` with values ascending and the eigenvectors
    stored as orthonormal columns.
    """
    a = _as_square(m)
    asym = np.linalg.norm(a - a.T)
    if asym > SYMMETRY_TOL * max(1.0, np.linalg.norm(a)):
        raise LinalgError(f"matrix is not symmetric (||m - m^T||_F = {asym:.3e})")
    vals, vecs = np.linalg.eigh(0.5 * (a + a.T))
    return vals, vecs


def eig_general(m) -> list[complex]:
    a = _as_square(m)
    try:
        vals = np.linalg.eigvals(a)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(f"eigenvalue iteration did not converge: {exc}") from exc
    return [complex(v) for v in vals]


def spectral_norm(m) -> float:
    a = _as_matrix(m)
    if a.size == 0:
        return 0.0
    top = np.linalg.eigvalsh(a.T @ a)[-1]
    return float(np.sqrt(max(top, 0.0)))


def spectral_radius(m) -> float:
    vals = eig_general(m)
    return max((abs(v) for v in vals), default=0.0)


def solve_linear(a, b) -> np.ndarray:
    """Solve ``a @ x = b`` by LU with partial pivoting."""
    a = _as_square(a)
    b = np.asarray(b, dtype=float)
    if b.shape[0] != a.shape[0]:
        raise LinalgError(f"right-hand side has {b.shape[0]} rows, matrix has {a.shape[0]}")
    scale = np.linalg.norm(a)
    with warnings.catch_warnings():
        # exact zero pivots are reported below with their index
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
    diag = np.abs(np.diag(lu))
    bad = np.flatnonzero(diag <= PIVOT_TOL * scale)
    if scale == 0.0 or bad.size:
        idx = int(bad[0]) if bad.size else 0
        raise SingularMatrixError(idx, float(diag[idx]))
    return scipy.linalg.lu_solve((lu, piv), b, check_finite=False)
