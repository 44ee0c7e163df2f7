"""Hybrid charge/thrust control allocation.

Given a formation geometry and a commanded relative force, the allocator
sweeps the trace SDP over a set of ball radii, extracts a realizable
charge vector from each optimal matrix through its dominant eigenpair,
completes the command with minimal-norm thrusts, and keeps the candidate
needing the least thrust. The thruster-only assignment (q = 0,
T = B+ f_cmd) seeds the competition, so the result is never worse than
not using Coulomb actuation at all, and the completion step makes the
commanded relative force hold exactly for every returned candidate.
"""

from dataclasses import dataclass, field

import numpy as np

from . import sdp
from .formation import (
    COULOMB_CONSTANT,
    FormationState,
    relative_coulomb_force,
    relative_coulomb_matrix,
)
from .linalg import difference_matrix, right_pseudoinverse, sym_eig

ZERO_CHARGE_EIGENVALUE = 1e-18 * COULOMB_CONSTANT
"""Dominant eigenvalues at or below this are treated as q = 0 (sub-attocoulomb)."""


def default_epsilon_set(f_norm: float, count: int = 30) -> np.ndarray:
    """Linearly spaced radii in [0.01, 0.999] * ||f_cmd||."""
    if f_norm <= 0.0:
        raise ValueError("command norm must be positive")
    if count < 1:
        raise ValueError("count must be >= 1")
    return np.linspace(0.01 * f_norm, 0.999 * f_norm, count)


def _validated_epsilons(values, f_norm: float) -> np.ndarray:
    eps = np.sort(np.asarray(list(values), dtype=float))
    if eps.size == 0:
        raise ValueError("epsilon search set must be nonempty")
    if not np.all(np.isfinite(eps)):
        raise ValueError("epsilon values must be finite")
    if eps[0] < 0.0 or eps[-1] >= f_norm:
        raise ValueError(
            f"epsilon values must lie in [0, ||f_cmd||) = [0, {f_norm:.6g})"
        )
    return eps


def extract_charges(q_matrix: np.ndarray) -> np.ndarray:
    """Charges realizing the best rank-one approximation of a PSD matrix.

    q = sqrt(lambda_max / k_c) * v_max, with the sign flipped so the entry
    of largest magnitude is positive (the eigenvector sign is arbitrary).
    """
    pairs = sym_eig(q_matrix)
    top = pairs[-1]
    trace = sum(p.value for p in pairs)
    if top.value < -sdp._PSD_SLACK * (1.0 + abs(trace)):
        raise ValueError(
            f"matrix is not positive semidefinite (lambda_max = {top.value:.3e})"
        )
    if top.value <= ZERO_CHARGE_EIGENVALUE:
        return np.zeros(len(pairs))
    charges = np.sqrt(top.value / COULOMB_CONSTANT) * top.vector
    lead = np.argmax(np.abs(charges))
    return charges if charges[lead] >= 0.0 else -charges


def complete_thrust(
    state: FormationState, f_cmd: np.ndarray, charges: np.ndarray
) -> np.ndarray:
    """Minimal-norm thrusts covering what the Coulomb forces do not.

    T = B+ (f_cmd - relative Coulomb force), reshaped to (N, d); satisfies
    B T + relative Coulomb force = f_cmd to linear-solve precision.
    """
    f = np.asarray(f_cmd, dtype=float).reshape(-1)
    b_pinv = right_pseudoinverse(difference_matrix(state.count, state.dimension))
    stacked = b_pinv @ (f - relative_coulomb_force(state, charges))
    return stacked.reshape(state.count, state.dimension)


def percent_error(
    state: FormationState, charges: np.ndarray, f_cmd: np.ndarray
) -> float:
    """100 * ||relative Coulomb force - f_cmd|| / ||f_cmd||."""
    f = np.asarray(f_cmd, dtype=float).reshape(-1)
    f_norm = np.linalg.norm(f)
    if f_norm <= 0.0:
        raise ValueError("percent error is undefined for a zero command")
    return 100.0 * float(
        np.linalg.norm(relative_coulomb_force(state, charges) - f) / f_norm
    )


@dataclass(frozen=True)
class EpsilonDiagnostic:
    """Per-epsilon record of the sweep."""

    epsilon: float
    status: str
    eigenvalues: np.ndarray        # ascending eigenvalues of the optimal Q
    residual: float                # ||A vec(Q) - f_cmd||
    trace: float
    charges: np.ndarray            # extracted candidate (C); empty on failure
    thrust_norm: float             # stacked Euclidean norm of the completion
    percent_error: float           # fit error of the extracted charges (%)


@dataclass(frozen=True)
class AllocationResult:
    """Chosen actuation plus the full sweep diagnostics.

    thrust_norm is the stacked Euclidean norm used by the selection rule;
    propellant is the per-spacecraft norm sum used as the consumption
    proxy. chosen_epsilon is None when the thruster-only seed won.
    percent_error is None only for a zero command.
    """

    charges: np.ndarray
    thrusts: np.ndarray
    chosen_epsilon: float | None
    thrust_norm: float
    percent_error: float | None
    propellant: float
    thruster_only_propellant: float
    all_failed: bool
    diagnostics: list[EpsilonDiagnostic] = field(default_factory=list)

    @property
    def reduction_percent(self) -> float | None:
        """Propellant saving vs thruster-only; None when nothing was commanded."""
        if self.thruster_only_propellant <= 0.0:
            return None
        return 100.0 * (1.0 - self.propellant / self.thruster_only_propellant)


def _propellant_proxy(thrusts: np.ndarray) -> float:
    return float(np.sum(np.linalg.norm(thrusts, axis=1)))


def allocate(
    state: FormationState,
    f_cmd: np.ndarray,
    epsilons=None,
    tol: float = sdp.DEFAULT_TOL,
    max_iter: int = sdp.DEFAULT_MAX_ITER,
) -> AllocationResult:
    """Run the allocation sweep and return the minimum-thrust candidate.

    Epsilon values default to ``default_epsilon_set``; explicit values must
    lie in [0, ||f_cmd||). Failed solves (infeasible radii included) are
    recorded in the diagnostics and skipped; if every radius fails the
    thruster-only seed is returned with ``all_failed`` set. Ties on the
    thrust norm keep the earlier candidate, i.e. the smaller radius.
    """
    f = np.asarray(f_cmd, dtype=float).reshape(-1)
    expected = state.dimension * (state.count - 1)
    if f.shape[0] != expected:
        raise ValueError(f"f_cmd must have length {expected}, got {f.shape[0]}")
    f_norm = float(np.linalg.norm(f))
    n, d = state.count, state.dimension

    if f_norm == 0.0:
        return AllocationResult(
            charges=np.zeros(n),
            thrusts=np.zeros((n, d)),
            chosen_epsilon=None,
            thrust_norm=0.0,
            percent_error=None,
            propellant=0.0,
            thruster_only_propellant=0.0,
            all_failed=False,
        )

    eps_values = (
        default_epsilon_set(f_norm)
        if epsilons is None
        else _validated_epsilons(epsilons, f_norm)
    )

    seed_thrusts = complete_thrust(state, f, np.zeros(n))
    best_charges = np.zeros(n)
    best_thrusts = seed_thrusts
    best_norm = float(np.linalg.norm(seed_thrusts))
    chosen: float | None = None

    a_matrix = relative_coulomb_matrix(state)
    solutions = sdp.solve_trace_sweep(
        a_matrix, f, eps_values, n=n, tol=tol, max_iter=max_iter
    )

    diagnostics: list[EpsilonDiagnostic] = []
    any_success = False
    for eps, sol in zip(eps_values, solutions):
        if not sol.optimal:
            diagnostics.append(
                EpsilonDiagnostic(
                    epsilon=float(eps),
                    status=sol.status,
                    eigenvalues=np.array([]),
                    residual=float("nan"),
                    trace=float("nan"),
                    charges=np.array([]),
                    thrust_norm=float("nan"),
                    percent_error=float("nan"),
                )
            )
            continue
        any_success = True
        candidate = extract_charges(sol.q_matrix)
        thrusts = complete_thrust(state, f, candidate)
        thrust_norm = float(np.linalg.norm(thrusts))
        diagnostics.append(
            EpsilonDiagnostic(
                epsilon=float(eps),
                status=sol.status,
                eigenvalues=np.array([p.value for p in sym_eig(sol.q_matrix)]),
                residual=sol.residual,
                trace=sol.trace,
                charges=candidate,
                thrust_norm=thrust_norm,
                percent_error=percent_error(state, candidate, f),
            )
        )
        if thrust_norm < best_norm:
            best_charges, best_thrusts, best_norm = candidate, thrusts, thrust_norm
            chosen = float(eps)

    return AllocationResult(
        charges=best_charges,
        thrusts=best_thrusts,
        chosen_epsilon=chosen,
        thrust_norm=best_norm,
        percent_error=percent_error(state, best_charges, f),
        propellant=_propellant_proxy(best_thrusts),
        thruster_only_propellant=_propellant_proxy(seed_thrusts),
        all_failed=not any_success,
        diagnostics=diagnostics,
    )
