"""Brute-force dense linear algebra used as the reference for everything else.

Nothing here knows about the lattice: it takes matrices and certifies its own
output (eigen residuals, orthonormality, backward error), so the acceptance
tests can assert on certificates instead of trusting the solver.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceFailure, NearSingular, SymmetryViolation

EIGENSOLVE_CAP = 4096   # dense O(n^3) eigensolve stays desk-scale
SOLVE_CAP = 16384
CLUSTER_TOL = 1e-9      # eigenvalue clustering for multiplicity counts


@dataclass(frozen=True)
class DenseSpectrum:
    eigenvalues: np.ndarray   # ascending
    eigenvectors: np.ndarray  # orthonormal columns, matching order
    residual: float           # max ||A v - lam v|| over returned pairs


@dataclass(frozen=True)
class ResolventSolve:
    vector: np.ndarray
    residual_norm: float
    backward_error: float


def dense_eigensolve(matrix: np.ndarray) -> DenseSpectrum:
    """Full spectral decomposition of a symmetric matrix, residual-certified."""
    a = np.asarray(matrix, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if n > EIGENSOLVE_CAP:
        raise ValueError(f"matrix side {n} exceeds the eigensolve cap {EIGENSOLVE_CAP}")
    if np.max(np.abs(a - a.T)) > 1e-12:
        raise SymmetryViolation("matrix is not symmetric within 1e-12")
    try:
        vals, vecs = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc
    residual = float(np.max(np.linalg.norm(a @ vecs - vecs * vals, axis=0)))
    norm_a = float(max(np.max(np.abs(vals)), 1e-300))
    if residual > 1e-10 * norm_a:
        raise ConvergenceFailure(f"eigen residual {residual:.3e} exceeds 1e-10 * ||A||")
    ortho_defect = float(np.max(np.abs(vecs.T @ vecs - np.eye(n))))
    if ortho_defect > 1e-10:
        raise ConvergenceFailure(f"eigenvector orthonormality defect {ortho_defect:.3e}")
    return DenseSpectrum(eigenvalues=vals, eigenvectors=vecs, residual=residual)


def dense_resolvent_solve(matrix: np.ndarray, lam, y: int) -> ResolventSolve:
    """Solve (A - lam*I) u = delta_y with an a-posteriori backward-error certificate."""
    a = np.asarray(matrix)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if n > SOLVE_CAP:
        raise ValueError(f"matrix side {n} exceeds the solve cap {SOLVE_CAP}")
    if not 0 <= y < n:
        raise ValueError(f"source index {y} outside the block of size {n}")
    lam = complex(lam)
    shifted = a - lam * np.eye(n) if lam.imag != 0 else a.astype(float) - lam.real * np.eye(n)
    rhs = np.zeros(n, dtype=shifted.dtype)
    rhs[y] = 1.0
    try:
        u = np.linalg.solve(shifted, rhs)
    except np.linalg.LinAlgError as exc:
        raise NearSingular(str(exc)) from exc
    norm_shifted = float(np.linalg.norm(shifted, np.inf))
    residual = float(np.linalg.norm(shifted @ u - rhs))
    backward = residual / (norm_shifted * float(np.linalg.norm(u)) + 1.0)
    if backward > 1e-8:
        raise NearSingular(f"backward error {backward:.3e}: shift too close to the spectrum")
    # ||u|| against a unit source is 1/dist(lam, spectrum) for symmetric A
    norm_u = float(np.linalg.norm(u))
    if norm_u > 1e12:
        raise NearSingular(f"resolvent norm {norm_u:.3e}: shift within 1e-12 of the spectrum")
    return ResolventSolve(vector=u, residual_norm=residual, backward_error=backward)


def multiplicities(eigenvalues, cluster_tol: float = CLUSTER_TOL):
    """Cluster a sorted eigenvalue list into (value, count) pairs.

    Distinct truncated eigenvalues are separated by far more than the default
    tolerance for every depth the oracle can handle.
    """
    vals = np.sort(np.asarray(eigenvalues, dtype=float))
    out = []
    start = 0
    for i in range(1, len(vals) + 1):
        if i == len(vals) or vals[i] - vals[i - 1] > cluster_tol:
            group = vals[start:i]
            out.append((float(np.mean(group)), len(group)))
            start = i
    return out
