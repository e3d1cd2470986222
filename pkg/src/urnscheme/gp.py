"""Finite-grid sampling of the Gaussian limits.

The ``nu``-component limit of the at-least-``k`` processes is sampled from
its covariance matrix on a grid (Cholesky factor times standard normals);
the ``theta = 1`` limit is a standard Wiener process.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, NumericalError
from .theory import cov_limit

JITTERS = (0.0, 1e-12, 1e-10, 1e-8)


def cholesky(a: np.ndarray) -> np.ndarray:
    """Lower-triangular ``L`` with ``L @ L.T == a``; raises ``LinAlgError`` if not PD."""
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    low = np.zeros_like(a)
    for j in range(n):
        row = low[j, :j]
        d = a[j, j] - row @ row
        if not d > 0:
            raise np.linalg.LinAlgError(f"matrix not positive definite at pivot {j}")
        low[j, j] = math.sqrt(d)
        low[j + 1:, j] = (a[j + 1:, j] - low[j + 1:, :j] @ row) / low[j, j]
    return low


def factorize(matrix: np.ndarray) -> tuple[np.ndarray, float]:
    """Cholesky factor with escalating diagonal jitter; returns ``(L, jitter)``."""
    eye = np.eye(matrix.shape[0])
    for eps in JITTERS:
        try:
            return cholesky(matrix + eps * eye), eps
        except np.linalg.LinAlgError:
            continue
    raise NumericalError("covariance matrix not factorizable", max_jitter=JITTERS[-1])


@dataclass(frozen=True)
class GridKernelMatrix:
    """Kernel matrix on ``grid x {1..nu}``; row ``g * nu + (i - 1)`` is ``(grid[g], i)``."""

    grid: np.ndarray
    nu: int
    theta: float | None
    matrix: np.ndarray
    factor: np.ndarray
    jitter: float

    @classmethod
    def from_matrix(cls, matrix, grid=None, nu: int = 1, theta=None) -> "GridKernelMatrix":
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ContractError("covariance matrix must be square")
        if grid is None:
            grid = np.arange(1, matrix.shape[0] // nu + 1, dtype=float)
        factor, eps = factorize(matrix)
        return cls(np.asarray(grid, dtype=float), nu, theta, matrix, factor, eps)


def kernel_matrix(grid, nu: int, theta: float) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    size = grid.size * nu
    mat = np.empty((size, size))
    for g, tau in enumerate(grid):
        for i in range(1, nu + 1):
            row = g * nu + i - 1
            for h in range(g, grid.size):
                for j in range(1, nu + 1):
                    col = h * nu + j - 1
                    if col < row:
                        continue
                    mat[row, col] = mat[col, row] = cov_limit(i, j, tau, grid[h], theta)
    return mat


def build_kernel_matrix(grid, nu: int, theta: float) -> GridKernelMatrix:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or np.any(np.diff(grid) <= 0) or grid[0] <= 0 or grid[-1] > 1:
        raise ContractError("grid must be ascending inside (0, 1]")
    mat = kernel_matrix(grid, nu, theta)
    factor, eps = factorize(mat)
    return GridKernelMatrix(grid, nu, theta, mat, factor, eps)


def sample_gaussian_paths(km: GridKernelMatrix, m_reps: int, seed=0) -> np.ndarray:
    """``m_reps`` zero-mean draws, shape ``(m_reps, len(grid), nu)``."""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((m_reps, km.matrix.shape[0]))
    draws = z @ km.factor.T
    return draws.reshape(m_reps, -1, km.nu)


def sample_wiener(grid, m_reps: int, seed=0) -> np.ndarray:
    """Standard Wiener process on ``grid``, shape ``(m_reps, len(grid))``."""
    grid = np.asarray(grid, dtype=float)
    if np.any(np.diff(grid) < 0) or grid[0] < 0:
        raise ContractError("grid must be ascending in [0, 1]")
    rng = np.random.default_rng(seed)
    steps = np.diff(np.concatenate([[0.0], grid]))
    incr = rng.standard_normal((m_reps, grid.size)) * np.sqrt(steps)
    return np.cumsum(incr, axis=1)
