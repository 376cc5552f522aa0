"""Complex linear-algebra contracts used by every scheme.

All rank decisions are singular-value based with tolerances relative to the
matrix scale, so jointly rescaling a system leaves decisions (and the
returned solutions, up to the same scale) unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import RankDeficientError

DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class LinearSystem:
    """A constraint stack A x = b with at most as many rows as unknowns."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.a))
        if a.shape[0] > a.shape[1]:
            raise ValueError("least-norm use requires rows <= columns")


def least_norm_solve(a: np.ndarray, b: np.ndarray,
                     tol: float = DEFAULT_TOL) -> np.ndarray:
    """Minimum-Euclidean-norm solution of the underdetermined system A x = b.

    Raises RankDeficientError when the rows of A are dependent up to ``tol``
    (relative to the largest singular value), which signals a degenerate
    constraint stack such as duplicated channel rows.
    """
    a = np.atleast_2d(np.asarray(a, dtype=complex))
    b = np.asarray(b, dtype=complex).reshape(-1)
    r, n = a.shape
    if r == 0:
        return np.zeros(n, dtype=complex)
    if b.shape[0] != r:
        raise ValueError("right-hand side length does not match row count")
    s = np.linalg.svd(a, compute_uv=False)
    if s[min(r, n) - 1] <= tol * s[0] or r > n:
        raise RankDeficientError(
            f"rows not independent up to tol={tol:g} (sv ratio "
            f"{s[min(r, n) - 1] / s[0]:.3e})")
    x, *_ = np.linalg.lstsq(a, b, rcond=None)
    return x


def solve_system(sys: LinearSystem, tol: float = DEFAULT_TOL) -> np.ndarray:
    return least_norm_solve(sys.a, sys.b, tol=tol)


def pinv_apply(a: np.ndarray, y: np.ndarray,
               tol: float = DEFAULT_TOL) -> np.ndarray:
    """Least-squares estimate of x from y = A x for full-column-rank A."""
    a = np.atleast_2d(np.asarray(a, dtype=complex))
    y = np.asarray(y, dtype=complex).reshape(-1)
    m, n = a.shape
    if n == 0:
        return np.zeros(0, dtype=complex)
    s = np.linalg.svd(a, compute_uv=False)
    if m < n or s[n - 1] <= tol * s[0]:
        raise RankDeficientError(
            f"matrix of shape {m}x{n} lacks full column rank")
    x, *_ = np.linalg.lstsq(a, y, rcond=None)
    return x


def rank_and_condition(a: np.ndarray, tol: float = DEFAULT_TOL):
    """(numerical rank, condition number) from singular values."""
    a = np.atleast_2d(np.asarray(a, dtype=complex))
    if a.size == 0:
        raise ValueError("matrix is empty")
    s = np.linalg.svd(a, compute_uv=False)
    rank = int(np.sum(s > tol * s[0]))
    cond = float(s[0] / s[-1]) if s[-1] > tol * s[0] else np.inf
    return rank, cond


def null_space_basis(a: np.ndarray, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Orthonormal columns spanning the null space of A."""
    a = np.atleast_2d(np.asarray(a, dtype=complex))
    u, s, vh = np.linalg.svd(a)
    rank = int(np.sum(s > tol * (s[0] if s.size else 0.0)))
    return vh[rank:].conj().T


def zf_error_variances(a: np.ndarray, noise_var: float) -> np.ndarray:
    """Per-entry error variance of the zero-forcing estimate from A.

    For y = A x + z with z ~ CN(0, noise_var I), the estimate pinv(A) y has
    error covariance noise_var * (A^H A)^{-1}; this returns its diagonal.
    """
    a = np.atleast_2d(np.asarray(a, dtype=complex))
    gram = a.conj().T @ a
    return noise_var * np.real(np.diag(np.linalg.inv(gram)))
