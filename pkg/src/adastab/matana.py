"""M-/H-matrix classification, diagonal-dominance scalings and matrix measures.

The M-matrix test solves ``M d = 1`` instead of computing eigenvalues: a
Z-matrix is a nonsingular M-matrix exactly when it is nonsingular with an
entrywise nonnegative inverse, and ``d = M^{-1} 1 > 0`` is then the positive
vector certifying generalized diagonal dominance. One solve therefore gives
both the classification and the scaling.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConvergenceFailure, DimensionMismatch

__all__ = [
    "DEFAULT_TOL",
    "Classification",
    "as_square",
    "comparison_matrix",
    "is_m_matrix",
    "is_h_matrix",
    "find_row_scaling",
    "find_column_scaling",
    "is_generalized_row_dominant",
    "is_generalized_column_dominant",
    "measure_one_norm",
    "measure_inf_norm",
    "eigenvalues",
    "classify",
    "parse_matrix_text",
    "read_matrix",
    "write_matrix",
]

DEFAULT_TOL = 1e-9


def as_square(A) -> np.ndarray:
    """Return ``A`` as a finite float n x n array (n >= 1) or raise ValueError."""
    M = np.asarray(A, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] < 1:
        raise DimensionMismatch(f"expected a square n x n matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix contains NaN or Inf entries")
    return M


def _positive_vector(x, n: int) -> np.ndarray:
    v = np.asarray(x, dtype=float).ravel()
    if v.shape[0] != n:
        raise DimensionMismatch(f"vector length {v.shape[0]} does not match n = {n}")
    if np.any(v <= 0):
        raise ValueError("scaling vector must be strictly positive")
    return v


def comparison_matrix(A) -> np.ndarray:
    A = as_square(A)
    M = -np.abs(A)
    np.fill_diagonal(M, np.abs(np.diag(A)))
    return M


def _solve_ones(M: np.ndarray, tol: float) -> Optional[np.ndarray]:
    """Solve ``M d = 1``; return d if it is entrywise > tol, else None."""
    n = M.shape[0]
    if n == 1:
        return np.ones(1) if M[0, 0] > tol else None
    try:
        d = np.linalg.solve(M, np.ones(n))
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(d)) or np.any(d <= tol):
        return None
    # a near-singular solve can return garbage that happens to be positive
    if not np.allclose(M @ d, 1.0, rtol=0.0, atol=1e-6):
        return None
    return d


def is_m_matrix(A, tol: float = DEFAULT_TOL) -> bool:
    """True iff off-diagonals are non-positive (up to tol) and ``A^{-1} 1 > tol``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    A = as_square(A)
    off = A - np.diag(np.diag(A))
    if np.any(off > tol):
        return False
    return _solve_ones(A, tol) is not None


def is_h_matrix(A, tol: float = DEFAULT_TOL) -> bool:
    return is_m_matrix(comparison_matrix(A), tol)


def find_row_scaling(A, tol: float = DEFAULT_TOL, normalize: bool = True) -> Optional[np.ndarray]:
    """Positive d with ``|a_ii| d_i > sum_{j != i} |a_ij| d_j`` for all rows.

    Computed as ``d = M_A^{-1} 1`` so every row inequality holds with margin 1.
    With ``normalize`` (the default) d is rescaled so that ``max(d) == 1``,
    which shrinks the margin to ``1 / max(M_A^{-1} 1)`` but keeps the
    output deterministic under matrix rescaling. Returns None when A is not
    an H-matrix.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    d = _solve_ones(comparison_matrix(A), tol)
    if d is None:
        return None
    return d / d.max() if normalize else d


def find_column_scaling(A, tol: float = DEFAULT_TOL, normalize: bool = True) -> Optional[np.ndarray]:
    """Row scaling of ``A.T``; A is an H-matrix iff its transpose is."""
    return find_row_scaling(as_square(A).T, tol, normalize=normalize)


def _dominance_margins(A: np.ndarray, x: np.ndarray) -> np.ndarray:
    absA = np.abs(A)
    diag = np.diag(absA) * x
    return diag - (absA @ x - diag)


def is_generalized_row_dominant(A, x) -> bool:
    A = as_square(A)
    x = _positive_vector(x, A.shape[0])
    return bool(np.all(_dominance_margins(A, x) > 0))


def is_generalized_column_dominant(A, x) -> bool:
    A = as_square(A)
    x = _positive_vector(x, A.shape[0])
    return bool(np.all(_dominance_margins(A.T, x) > 0))


def measure_inf_norm(A) -> float:
    """Matrix measure induced by the infinity norm: max_i (a_ii + sum_{j!=i} |a_ij|)."""
    A = as_square(A)
    d = np.diag(A)
    return float(np.max(d + np.abs(A).sum(axis=1) - np.abs(d)))


def measure_one_norm(A) -> float:
    """Matrix measure induced by the 1-norm: max_j (a_jj + sum_{i!=j} |a_ij|)."""
    return measure_inf_norm(as_square(A).T)


def eigenvalues(A) -> np.ndarray:
    A = as_square(A)
    try:
        return np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(f"eigenvalue iteration did not converge: {exc}") from exc


@dataclass(frozen=True)
class Classification:
    n: int
    is_m_matrix: bool
    is_h_matrix: bool
    has_positive_diagonal: bool
    row_scaling: Optional[np.ndarray]
    column_scaling: Optional[np.ndarray]
    eigenvalues_of_comparison: np.ndarray

    def to_dict(self) -> dict:
        def vec(v):
            return None if v is None else [float(a) for a in v]

        return {
            "n": self.n,
            "is_m_matrix": self.is_m_matrix,
            "is_h_matrix": self.is_h_matrix,
            "has_positive_diagonal": self.has_positive_diagonal,
            "row_scaling": vec(self.row_scaling),
            "column_scaling": vec(self.column_scaling),
            "eigenvalues_of_comparison": [
                [float(z.real), float(z.imag)] for z in self.eigenvalues_of_comparison
            ],
        }


def classify(A, tol: float = DEFAULT_TOL) -> Classification:
    A = as_square(A)
    row = find_row_scaling(A, tol)
    col = find_column_scaling(A, tol)
    return Classification(
        n=A.shape[0],
        is_m_matrix=is_m_matrix(A, tol),
        is_h_matrix=row is not None,
        has_positive_diagonal=bool(np.all(np.diag(A) > 0)),
        row_scaling=row,
        column_scaling=col,
        eigenvalues_of_comparison=eigenvalues(comparison_matrix(A)),
    )


def parse_matrix_text(text: str) -> np.ndarray:
    """Parse the plain-text format: first line n, then n rows of n numbers."""
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise ValueError("empty matrix file")
    try:
        n = int(lines[0])
    except ValueError:
        raise ValueError(f"first line must be the dimension n, got {lines[0]!r}") from None
    if n < 1:
        raise ValueError("dimension must be >= 1")
    rows = lines[1:]
    if len(rows) != n:
        raise ValueError(f"expected {n} matrix rows, found {len(rows)}")
    data = []
    for i, row in enumerate(rows, start=2):
        vals = row.split()
        if len(vals) != n:
            raise ValueError(f"row on line {i} has {len(vals)} entries, expected {n}")
        data.append([float(v) for v in vals])
    return as_square(data)


def read_matrix(path) -> np.ndarray:
    return parse_matrix_text(Path(path).read_text())


def write_matrix(path, A) -> None:
    A = as_square(A)
    rows = [" ".join(repr(float(v)) for v in row) for row in A]
    Path(path).write_text(f"{A.shape[0]}\n" + "\n".join(rows) + "\n")
