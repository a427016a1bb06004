"""Dense linear algebra primitives shared by the solvers.

Matrices are plain ``float64`` numpy arrays. The helpers here validate shapes
and finiteness on the way in so that the solver loops can stay unchecked.
"""

from __future__ import annotations

import abc
import math
from pathlib import Path
from typing import Sequence

import numpy as np


class DimensionError(ValueError):
    """Raised when operand shapes are incompatible."""


class ConvergenceError(RuntimeError):
    """Raised by an iterative routine that ran out of iterations.

    The best estimate reached so far is kept in :attr:`estimate`.
    """

    def __init__(self, message, estimate):
        super().__init__(message)
        self.estimate = estimate


def as_matrix(A) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix entries must be finite")
    return A


def as_vector(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise DimensionError(f"expected a non-empty 1-D vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("vector entries must be finite")
    return x


def matvec(A, x) -> np.ndarray:
    """Return ``A @ x`` after checking that the shapes agree."""
    A = as_matrix(A)
    x = as_vector(x)
    if A.shape[1] != x.shape[0]:
        raise DimensionError(f"cannot apply {A.shape} matrix to vector of dim {x.shape[0]}")
    return A @ x


def adjoint_matvec(A, x) -> np.ndarray:
    """Return ``A.T @ x`` without forming the transpose."""
    A = as_matrix(A)
    x = as_vector(x)
    if A.shape[0] != x.shape[0]:
        raise DimensionError(f"cannot apply adjoint of {A.shape} matrix to vector of dim {x.shape[0]}")
    return x @ A


def compose_dictionaries(dicts: Sequence, i: int = 1, L: int | None = None) -> np.ndarray:
    """Product ``D_i D_{i+1} ... D_L`` of a chain of dictionaries.

    Indices are 1-based to match the usual layer numbering, so
    ``compose_dictionaries(ds, 1)`` is the global dictionary and
    ``compose_dictionaries(ds, L, L)`` returns ``D_L`` itself.
    """
    if L is None:
        L = len(dicts)
    if not 1 <= i <= L <= len(dicts):
        raise IndexError(f"need 1 <= i <= L <= {len(dicts)}, got i={i}, L={L}")
    out = as_matrix(dicts[i - 1])
    for k in range(i, L):
        D = as_matrix(dicts[k])
        if out.shape[1] != D.shape[0]:
            raise DimensionError(
                f"dictionary {k} has {out.shape[1]} columns but dictionary {k + 1} has {D.shape[0]} rows"
            )
        out = out @ D
    return out


def spectral_norm(A, tol: float = 1e-9, max_iter: int = 100_000) -> float:
    """Largest singular value of `A` by power iteration on ``A.T A``.

    The iteration starts from the normalized all-ones vector, so the result
    is a deterministic function of `A`. Successive changes of the estimate
    are extrapolated geometrically and the loop stops once the predicted
    remaining relative error is below `tol`.

    Raises
    ------
    ConvergenceError
        If `max_iter` iterations pass without meeting `tol`. The exception
        carries the last estimate.
    """
    A = as_matrix(A)
    return _power_iteration(lambda v: A @ v, lambda u: u @ A, A.shape[1], tol, max_iter, A)


def _power_iteration(apply, adjoint, dim, tol, max_iter, A=None):
    if tol <= 0:
        raise ValueError("tol must be positive")
    v = np.full(dim, 1.0 / math.sqrt(dim))
    if not np.any(adjoint(apply(v))):
        if A is None or not np.any(A):
            return 0.0
        # all-ones lies in the null space; restart from the heaviest column
        v = np.zeros(dim)
        v[int(np.argmax(np.linalg.norm(A, axis=0)))] = 1.0
    lam = 0.0
    step = math.inf
    for _ in range(max_iter):
        w = adjoint(apply(v))
        nw = float(np.linalg.norm(w))
        # both are lower bounds on the top eigenvalue of A.T A
        new = max(float(v @ w), nw)
        v = w / nw
        change = abs(new - lam)
        if lam > 0:
            ratio = change / step if step > 0 else 0.0
            remaining = change * ratio / (1.0 - ratio) if ratio < 1 else math.inf
            if remaining <= tol * new or change == 0.0:
                return math.sqrt(new)
        step = change
        lam = new
    raise ConvergenceError(f"power iteration did not converge in {max_iter} iterations", math.sqrt(lam))


class LinearOperator(abc.ABC):
    """Minimal apply/adjoint interface that a solver needs from a dictionary."""

    shape: tuple[int, int]

    @abc.abstractmethod
    def apply(self, x: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def adjoint(self, x: np.ndarray) -> np.ndarray: ...

    def norm(self, tol: float = 1e-9) -> float:
        """Spectral norm via power iteration on ``adjoint(apply(.))``."""
        return _power_iteration(self.apply, self.adjoint, self.shape[1], tol, 100_000)


class DenseOperator(LinearOperator):
    """:class:`LinearOperator` backed by an explicit matrix."""

    def __init__(self, A):
        self.matrix = as_matrix(A)
        self.shape = self.matrix.shape

    def apply(self, x):
        return matvec(self.matrix, x)

    def adjoint(self, x):
        return adjoint_matvec(self.matrix, x)

    def norm(self, tol=1e-9):
        return spectral_norm(self.matrix, tol=tol)


def write_matrix_csv(path, A) -> None:
    """Write a matrix (or a vector, as one column) with round-trip precision."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim == 1:
        A = A[:, None]
    np.savetxt(path, A, delimiter=",", fmt="%.17g")


def read_matrix_csv(path) -> np.ndarray:
    A = np.loadtxt(Path(path), delimiter=",", dtype=np.float64, ndmin=2)
    return as_matrix(A)


def read_vector_csv(path) -> np.ndarray:
    return as_vector(read_matrix_csv(path).ravel())
