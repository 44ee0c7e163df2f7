"""Point-charge force model for hybrid Coulomb spacecraft formations.

Forces follow the inverse-square pairwise law with Coulomb constant
k_c = 8.99e9 N m^2 / C^2. Relative quantities difference consecutive
spacecraft: entry i of a relative vector is (value at i+1) - (value at i).
Charges are carried in coulombs everywhere in this package; interfaces
that talk to humans convert to microcoulombs.
"""

from dataclasses import dataclass

import numpy as np

from .linalg import difference_matrix, vec

COULOMB_CONSTANT = 8.99e9
"""Coulomb's constant k_c in N m^2 / C^2."""

MIN_SEPARATION = 1e-6
"""Smallest allowed pairwise distance (m); the force law is singular at zero."""


class SingularGeometryError(ValueError):
    """Raised when two spacecraft are coincident (or numerically so)."""


@dataclass(frozen=True)
class FormationState:
    """Positions of all spacecraft, one row per spacecraft, in meters.

    Invariants: at least two spacecraft, finite coordinates, and every
    pairwise separation above MIN_SEPARATION.
    """

    positions: np.ndarray

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.positions, dtype=float))
        if pos.ndim != 2:
            raise ValueError("positions must be an (N, d) array")
        if pos.shape[0] < 2:
            raise ValueError(f"formation needs at least 2 spacecraft, got {pos.shape[0]}")
        if pos.shape[1] < 1:
            raise ValueError("spatial dimension must be >= 1")
        if not np.all(np.isfinite(pos)):
            raise ValueError("positions must be finite")
        diff = pos[:, None, :] - pos[None, :, :]
        dist = np.linalg.norm(diff, axis=2)
        np.fill_diagonal(dist, np.inf)
        if dist.min() <= MIN_SEPARATION:
            i, j = np.unravel_index(np.argmin(dist), dist.shape)
            raise SingularGeometryError(
                f"spacecraft {i} and {j} are separated by {dist[i, j]:.3e} m "
                f"(minimum {MIN_SEPARATION:.0e} m)"
            )
        object.__setattr__(self, "positions", pos)

    @property
    def count(self) -> int:
        return self.positions.shape[0]

    @property
    def dimension(self) -> int:
        return self.positions.shape[1]


def _check_charges(state: FormationState, charges: np.ndarray) -> np.ndarray:
    q = np.asarray(charges, dtype=float).reshape(-1)
    if q.shape[0] != state.count:
        raise ValueError(f"expected {state.count} charges, got {q.shape[0]}")
    if not np.all(np.isfinite(q)):
        raise ValueError("charges must be finite")
    return q


def _pair_kernels(state: FormationState) -> np.ndarray:
    """(N, N, d) array of (x_i - x_j) / ||x_i - x_j||^3, zero on the diagonal."""
    pos = state.positions
    diff = pos[:, None, :] - pos[None, :, :]
    dist = np.linalg.norm(diff, axis=2)
    np.fill_diagonal(dist, 1.0)
    kern = diff / dist[:, :, None] ** 3
    idx = np.arange(state.count)
    kern[idx, idx, :] = 0.0
    return kern


def coulomb_forces(state: FormationState, charges: np.ndarray) -> np.ndarray:
    """Coulomb force on every spacecraft, (N, d) in newtons.

    Row i is the pairwise sum k_c * q_i q_j (x_i - x_j) / ||x_i - x_j||^3
    over j != i.
    """
    q = _check_charges(state, charges)
    kern = _pair_kernels(state)
    coef = COULOMB_CONSTANT * (q[:, None] * q[None, :])
    return np.einsum("ij,ijk->ik", coef, kern)


def coulomb_force_on(index: int, state: FormationState, charges: np.ndarray) -> np.ndarray:
    """Coulomb force on spacecraft ``index`` (0-based), in newtons."""
    if not 0 <= index < state.count:
        raise IndexError(f"spacecraft index {index} out of range for N={state.count}")
    return coulomb_forces(state, charges)[index]


def coulomb_row_map(index: int, state: FormationState) -> np.ndarray:
    """Linear map a_i with F_i = k_c * a_i @ vec(q q'), shape (d, N^2).

    Built from symmetrized single-entry indicators, so the columns for
    diagonal entries of the outer product are identically zero.
    """
    if not 0 <= index < state.count:
        raise IndexError(f"spacecraft index {index} out of range for N={state.count}")
    n, d = state.count, state.dimension
    kern = _pair_kernels(state)
    out = np.zeros((d, n * n))
    for j in range(n):
        if j == index:
            continue
        indicator = np.zeros((n, n))
        indicator[index, j] = 0.5
        indicator[j, index] = 0.5
        out += np.outer(kern[index, j], vec(indicator))
    return out


def relative_coulomb_matrix(state: FormationState) -> np.ndarray:
    """Map A(x) with relative Coulomb force = k_c * A(x) @ vec(q q').

    Rows stack the consecutive differences a_{i+1} - a_i; the result has
    shape (d(N-1), N^2).
    """
    rows = [coulomb_row_map(i, state) for i in range(state.count)]
    return np.vstack([rows[i + 1] - rows[i] for i in range(state.count - 1)])


def relative_coulomb_force(state: FormationState, charges: np.ndarray) -> np.ndarray:
    """Stacked consecutive differences of the per-spacecraft Coulomb forces."""
    forces = coulomb_forces(state, charges)
    return np.diff(forces, axis=0).reshape(-1)


def relative_thrust(thrusts: np.ndarray) -> np.ndarray:
    """Stacked consecutive differences of per-spacecraft thrusts, B @ T."""
    t = np.asarray(thrusts, dtype=float)
    if t.ndim != 2:
        raise ValueError("thrusts must be an (N, d) array")
    if not np.all(np.isfinite(t)):
        raise ValueError("thrusts must be finite")
    b = difference_matrix(t.shape[0], t.shape[1])
    return b @ t.reshape(-1)
