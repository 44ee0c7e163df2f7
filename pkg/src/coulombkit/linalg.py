"""Small dense linear-algebra kernel.

Everything here operates on matrices no larger than a few tens of rows:
column-major vectorization, Kronecker products, a cyclic-Jacobi symmetric
eigensolver, the relative-difference matrix B, and its right pseudoinverse.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve


@dataclass(frozen=True)
class EigenPair:
    """One eigenvalue with its unit-norm eigenvector."""

    value: float
    vector: np.ndarray


def vec(matrix: np.ndarray) -> np.ndarray:
    """Stack the columns of ``matrix``, leftmost column first."""
    return np.asarray(matrix, dtype=float).reshape(-1, order="F")


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product with the standard block layout."""
    return np.kron(np.asarray(a, dtype=float), np.asarray(b, dtype=float))


def jacobi_eigh(
    matrix: np.ndarray,
    max_sweeps: int = 100,
    off_tol: float = 1e-12,
) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Parameters
    ----------
    matrix : (n, n) symmetric array.
    max_sweeps : iteration cap; one sweep visits every off-diagonal pair.
    off_tol : stop when the off-diagonal Frobenius norm falls below
        ``off_tol * max(1, ||matrix||_F)``.

    Returns
    -------
    values : (n,) eigenvalues in ascending order.
    vectors : (n, n) orthonormal eigenvectors, column k pairs with values[k].

    Raises
    ------
    ValueError : input not square or not symmetric.
    numpy.linalg.LinAlgError : no convergence within ``max_sweeps``.
    """
    a = np.array(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    n = a.shape[0]
    scale = np.linalg.norm(a)
    asym = np.abs(a - a.T).max() if n > 1 else 0.0
    if asym > 1e-8 * (1.0 + scale):
        raise ValueError(f"matrix is not symmetric (max asymmetry {asym:.3e})")
    a = 0.5 * (a + a.T)
    v = np.eye(n)
    if n == 1:
        return a[0].copy(), v
    threshold = off_tol * max(1.0, scale)

    def off_norm(m: np.ndarray) -> float:
        # summed directly; the ||M||_F^2 - sum(diag^2) form cancels badly
        off = m.copy()
        np.fill_diagonal(off, 0.0)
        return float(np.linalg.norm(off))

    converged = off_norm(a) <= threshold
    for _ in range(max_sweeps):
        if converged:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 0.25 * threshold / (n * n):
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) if theta != 0 else 1.0
                t = t / (abs(theta) + np.sqrt(1.0 + theta * theta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                rot_p = c * a[:, p] - s * a[:, q]
                rot_q = s * a[:, p] + c * a[:, q]
                a[:, p], a[:, q] = rot_p, rot_q
                rot_p = c * a[p, :] - s * a[q, :]
                rot_q = s * a[p, :] + c * a[q, :]
                a[p, :], a[q, :] = rot_p, rot_q
                a[p, q] = 0.0
                a[q, p] = 0.0
                rot_p = c * v[:, p] - s * v[:, q]
                rot_q = s * v[:, p] + c * v[:, q]
                v[:, p], v[:, q] = rot_p, rot_q
        converged = off_norm(a) <= threshold
    if not converged:
        raise np.linalg.LinAlgError(
            f"Jacobi eigensolver did not converge in {max_sweeps} sweeps"
        )
    values = np.diag(a).copy()
    order = np.argsort(values, kind="stable")
    return values[order], v[:, order]


def sym_eig(matrix: np.ndarray) -> list[EigenPair]:
    """Eigenpairs of a symmetric matrix, ascending by eigenvalue."""
    values, vectors = jacobi_eigh(matrix)
    return [EigenPair(float(values[k]), vectors[:, k].copy()) for k in range(len(values))]


def difference_matrix(count: int, dim: int) -> np.ndarray:
    """Map stacked per-spacecraft vectors to consecutive differences.

    Returns B = D (x) I_dim where D is the (count-1) x count matrix with
    rows (..., -1, 1, ...), so B @ Col(u_1..u_N) = Col(u_2-u_1, ...).
    """
    if count < 2:
        raise ValueError(f"formation needs at least 2 spacecraft, got {count}")
    if dim < 1:
        raise ValueError(f"spatial dimension must be >= 1, got {dim}")
    d_mat = np.zeros((count - 1, count))
    idx = np.arange(count - 1)
    d_mat[idx, idx] = -1.0
    d_mat[idx, idx + 1] = 1.0
    return np.kron(d_mat, np.eye(dim))


def right_pseudoinverse(matrix: np.ndarray) -> np.ndarray:
    """Moore-Penrose pseudoinverse B+ = B' (B B')^-1 for full-row-rank B.

    (B B')^-1 is applied through a Cholesky factorization; for difference
    matrices B B' is the SPD second-difference matrix (x) identity.

    Raises
    ------
    numpy.linalg.LinAlgError : rows are linearly dependent (singular system).
    """
    b = np.asarray(matrix, dtype=float)
    gram = b @ b.T
    try:
        factor = cho_factor(gram, lower=True)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            "rows are linearly dependent; right pseudoinverse undefined"
        ) from exc
    return cho_solve(factor, b).T
