"""Trace-minimization semidefinite solver.

Solves, for a formation map A and relative-force command f,

    minimize    Tr(Q)
    subject to  || A vec(Q) - f || <= epsilon,   Q symmetric PSD,

the convex surrogate whose low-rank optima carry realizable charge sets.
The default backend is an embedded Douglas-Rachford splitting between the
two proximable pieces: (trace + PSD cone) on one side and the preimage of
the epsilon-ball on the other. Both prox steps are exact, which keeps the
reported Q exactly PSD with hard-zero spurious eigenvalues. An optional
backend delegates to cvxpy when it is installed.

Two facts about this problem family are used as exact short cuts:

* epsilon >= ||f|| makes Q = 0 optimal (feasible with zero trace).
* Feasibility is decided by the distance from f to range(A): because the
  diagonal of Q never enters A vec(Q) for formation-built maps, PSD-ness
  can always be restored by diagonal padding, so the PSD cone maps onto
  all of range(A). Commands farther than epsilon from range(A) are
  certifiably infeasible. (Physically, range(A) excludes the net-torque
  directions internal Coulomb forces cannot produce.)
"""

import math
from dataclasses import dataclass

import numpy as np

from .formation import FormationState, relative_coulomb_matrix

STATUS_OPTIMAL = "optimal"
STATUS_INFEASIBLE = "infeasible"
STATUS_NUMERICAL_FAILURE = "numerical-failure"

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 50_000
_DEFAULT_PROX_SCALE = 0.3
_CHECK_EVERY = 5
_RANK_TOL = 1e-12          # relative eigenvalue cutoff for range(A) detection
_PSD_SLACK = 1e-7          # allowed relative negative eigenvalue in returned Q
_RESIDUAL_SLACK = 1e-6     # allowed relative overshoot of the ball constraint

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class TraceProblem:
    """One trace-minimization instance.

    a_matrix maps vec(Q) (column-major, length n^2) to the relative-force
    space; f_cmd is the commanded relative force; epsilon the ball radius.
    """

    a_matrix: np.ndarray
    f_cmd: np.ndarray
    epsilon: float
    n: int

    def __post_init__(self):
        a = np.asarray(self.a_matrix, dtype=float)
        f = np.asarray(self.f_cmd, dtype=float).reshape(-1)
        if a.ndim != 2 or a.shape[1] != self.n * self.n:
            raise ValueError(
                f"a_matrix must have n^2 = {self.n * self.n} columns, got shape {a.shape}"
            )
        if a.shape[0] != f.shape[0]:
            raise ValueError("a_matrix row count and f_cmd length disagree")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(f))):
            raise ValueError("problem data must be finite")
        if not self.epsilon >= 0.0:
            raise ValueError(f"epsilon must be nonnegative, got {self.epsilon}")
        object.__setattr__(self, "a_matrix", a)
        object.__setattr__(self, "f_cmd", f)


@dataclass(frozen=True)
class SdpSolution:
    """Solver output: the PSD matrix plus convergence diagnostics.

    gap_estimate is a certified optimality gap (trace minus a dual lower
    bound built from the terminal residual direction); NaN when the solve
    did not reach an optimal point.
    """

    q_matrix: np.ndarray
    status: str
    residual: float
    trace: float
    gap_estimate: float
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == STATUS_OPTIMAL


def build_trace_problem(
    state: FormationState, f_cmd: np.ndarray, epsilon: float
) -> TraceProblem:
    """Assemble the trace problem for a formation and a force command."""
    f = np.asarray(f_cmd, dtype=float).reshape(-1)
    expected = state.dimension * (state.count - 1)
    if f.shape[0] != expected:
        raise ValueError(f"f_cmd must have length {expected}, got {f.shape[0]}")
    return TraceProblem(
        a_matrix=relative_coulomb_matrix(state),
        f_cmd=f,
        epsilon=float(epsilon),
        n=state.count,
    )


def _svec_basis(n: int) -> np.ndarray:
    """(n^2, p) basis with vec(Q) = S @ svec(Q); svec is an isometry."""
    p = n * (n + 1) // 2
    s = np.zeros((n * n, p))
    k = 0
    for j in range(n):
        for i in range(j, n):
            if i == j:
                s[j * n + i, k] = 1.0
            else:
                s[j * n + i, k] = 1.0 / _SQRT2
                s[i * n + j, k] = 1.0 / _SQRT2
            k += 1
    return s


class _TriIndexer:
    """Batched conversion between svec coordinates and symmetric matrices."""

    def __init__(self, n: int):
        self.n = n
        rows, cols = [], []
        for j in range(n):
            for i in range(j, n):
                rows.append(i)
                cols.append(j)
        self.rows = np.array(rows)
        self.cols = np.array(cols)
        self.is_diag = self.rows == self.cols

    def to_matrices(self, s: np.ndarray) -> np.ndarray:
        mats = np.zeros((s.shape[0], self.n, self.n))
        vals = np.where(self.is_diag, s, s / _SQRT2)
        mats[:, self.rows, self.cols] = vals
        mats[:, self.cols, self.rows] = vals
        return mats

    def to_svec(self, mats: np.ndarray) -> np.ndarray:
        tri = mats[:, self.rows, self.cols]
        return np.where(self.is_diag, tri, _SQRT2 * tri)


class _Workspace:
    """Problem-family data shared across epsilon values: the svec'd map,
    the eigendecomposition of A A', and the normalization constants."""

    def __init__(self, a_matrix: np.ndarray, f_cmd: np.ndarray, n: int):
        self.n = n
        self.tri = _TriIndexer(n)
        self.a_svec = a_matrix @ _svec_basis(n)
        self.f = f_cmd
        self.f_norm = float(np.linalg.norm(f_cmd))
        gram = self.a_svec @ self.a_svec.T
        g, w_eig = np.linalg.eigh(gram)
        g = np.clip(g, 0.0, None)
        self.g = g
        self.w_eig = w_eig
        self.g_max = float(g[-1])
        self.degenerate = self.g_max == 0.0 or self.f_norm == 0.0
        if self.degenerate:
            self.range_dist = self.f_norm
            return
        self.null_mask = g <= _RANK_TOL * self.g_max
        self.a_hat = self.a_svec / math.sqrt(self.g_max)
        self.f_hat = f_cmd / self.f_norm
        self.g_hat = g / self.g_max
        f_coords = w_eig.T @ self.f_hat
        self.range_dist = self.f_norm * float(
            np.sqrt(np.sum(np.where(self.null_mask, f_coords, 0.0) ** 2))
        )

    def project_to_ball(self, points: np.ndarray, eps: np.ndarray) -> np.ndarray:
        """Exact projection of svec points onto {s : ||a_hat s - f_hat|| <= eps}.

        Solved per point through the secular equation in the eigenbasis of
        A A'; components in the null space of A' are untouched (they are
        fixed by f_hat and already accounted for in the feasibility check).
        A safeguarded Newton iteration inside an analytic bracket handles
        arbitrarily tight radii; eps == 0 falls back to the affine
        projection onto {s : a_hat s = f_hat}.
        """
        resid = points @ self.a_hat.T - self.f_hat
        norms = np.linalg.norm(resid, axis=1)
        need = norms > eps
        if not need.any():
            return points
        coords = resid @ self.w_eig
        active = ~self.null_mask
        g_act = np.where(active, self.g_hat, 0.0)
        sq_act = np.where(active, coords, 0.0) ** 2
        sum_act = np.sum(sq_act, axis=1)
        const = np.sum(np.where(self.null_mask, coords, 0.0) ** 2, axis=1)

        affine = need & (eps <= 0.0)
        curved = need & ~affine
        lam = np.zeros(len(points))
        if curved.any():
            target = np.maximum(eps**2 - const, 1e-30 * np.maximum(eps, 1e-30) ** 2)
            # psi(lam) = sum sq_act/(1+lam g)^2 is convex decreasing; bracket
            # from the extreme active eigenvalues, then safeguarded Newton.
            g_lo = np.min(np.where(active, self.g_hat, np.inf))
            root = np.sqrt(sum_act / target) - 1.0
            hi = np.where(curved, np.maximum(root / g_lo, 0.0), 0.0)
            lo = np.where(curved, np.maximum(root, 0.0), 0.0)  # g_hi == 1
            lam = lo.copy()
            for _ in range(100):
                denom = 1.0 + lam[:, None] * g_act[None, :]
                terms = sq_act / denom**2
                psi = np.sum(terms, axis=1)
                err = psi - target
                lo = np.where(err > 0, np.maximum(lo, lam), lo)
                hi = np.where(err < 0, np.minimum(hi, lam), hi)
                dpsi = np.sum(-2.0 * g_act[None, :] * terms / denom, axis=1)
                newton = lam - err / np.where(dpsi == 0.0, -1.0, dpsi)
                inside = (newton > lo) & (newton < hi)
                step = np.where(inside, newton, 0.5 * (lo + hi))
                settled = np.abs(err) <= 1e-13 * np.maximum(target, 1e-300)
                lam = np.where(curved & ~settled, step, lam)
                if np.all(settled | ~curved):
                    break

        denom = 1.0 + lam[:, None] * g_act[None, :]
        shrunk = np.where(active, coords / denom, coords)
        moved = points - lam[:, None] * ((shrunk @ self.w_eig.T) @ self.a_hat)
        if affine.any():
            inv_g = np.where(active, 1.0 / np.where(active, self.g_hat, 1.0), 0.0)
            exact = points - ((coords * inv_g) @ self.w_eig.T) @ self.a_hat
            moved = np.where(affine[:, None], exact, moved)
        return np.where(need[:, None], moved, points)


def _zero_solution(ws: _Workspace, iterations: int = 0) -> SdpSolution:
    return SdpSolution(
        q_matrix=np.zeros((ws.n, ws.n)),
        status=STATUS_OPTIMAL,
        residual=ws.f_norm,
        trace=0.0,
        gap_estimate=0.0,
        iterations=iterations,
    )


def _infeasible_solution(ws: _Workspace) -> SdpSolution:
    return SdpSolution(
        q_matrix=np.zeros((ws.n, ws.n)),
        status=STATUS_INFEASIBLE,
        residual=ws.f_norm,
        trace=0.0,
        gap_estimate=float("nan"),
        iterations=0,
    )


def _dual_lower_bound(
    a_matrix: np.ndarray, f_cmd: np.ndarray, epsilon: float, residual_vec: np.ndarray
) -> float:
    """Certified lower bound on the optimal trace.

    Any multiplier y with I + He(mat(A' y)) PSD bounds the optimum below by
    -f'y - epsilon ||y||. The terminal residual direction is the natural
    candidate; the scale along it is chosen from the eigenrange of the
    lifted direction so the certificate is always valid.
    """
    r_norm = np.linalg.norm(residual_vec)
    if r_norm <= 0.0:
        return 0.0
    r_hat = residual_vec / r_norm
    n = int(round(math.sqrt(a_matrix.shape[1])))
    lifted = (a_matrix.T @ r_hat).reshape((n, n), order="F")
    lifted = 0.5 * (lifted + lifted.T)
    mu = np.linalg.eigvalsh(lifted)
    big = 1e18
    theta_hi = 1.0 / max(-mu[0], 1.0 / big)
    theta_lo = -1.0 / max(mu[-1], 1.0 / big)
    f_dot = float(f_cmd @ r_hat)
    best = 0.0
    for theta in (theta_lo, theta_hi):
        best = max(best, -theta * f_dot - epsilon * abs(theta))
    return best


def _finalize(
    ws: _Workspace,
    x_svec: np.ndarray,
    epsilon: float,
    scale: float,
    iterations: int,
    converged: bool,
) -> SdpSolution:
    """Assemble a solution from the PSD-side iterate, verifying the
    contract (residual within the ball, eigenvalues nonneg up to slack)."""
    x = x_svec[None, :]
    resid = np.linalg.norm(x[0] @ ws.a_hat.T - ws.f_hat) * ws.f_norm
    if resid > epsilon * (1.0 + 0.5 * _RESIDUAL_SLACK):
        x = ws.project_to_ball(x, np.array([epsilon / ws.f_norm]))
        resid = np.linalg.norm(x[0] @ ws.a_hat.T - ws.f_hat) * ws.f_norm
    q = ws.tri.to_matrices(x)[0] * scale
    q = 0.5 * (q + q.T)
    trace = float(np.trace(q))
    eigs = np.linalg.eigvalsh(q)
    psd_ok = eigs[0] >= -_PSD_SLACK * (1.0 + abs(trace))
    res_ok = resid <= epsilon * (1.0 + _RESIDUAL_SLACK)
    if converged and psd_ok and res_ok:
        status = STATUS_OPTIMAL
    elif res_ok and psd_ok:
        status = STATUS_NUMERICAL_FAILURE  # feasible point, convergence uncertified
    else:
        status = STATUS_INFEASIBLE  # no feasible point found at the cap
    res_vec = ws.a_svec @ (ws.tri.to_svec(q[None, :, :])[0]) - ws.f
    gap = float("nan")
    if status == STATUS_OPTIMAL:
        gap = max(trace - _dual_lower_bound(_expand_a(ws), ws.f, epsilon, res_vec), 0.0)
    return SdpSolution(
        q_matrix=q,
        status=status,
        residual=float(np.linalg.norm(res_vec)),
        trace=trace,
        gap_estimate=gap,
        iterations=iterations,
    )


def _expand_a(ws: _Workspace) -> np.ndarray:
    """Recover the vec-acting map from the svec-acting one (adjoint use only)."""
    n = ws.n
    basis = _svec_basis(n)
    # a_svec = a_matrix @ basis and basis has orthonormal columns, so
    # a_svec @ basis.T reproduces the symmetric part of a_matrix, which is
    # all the dual certificate needs.
    return ws.a_svec @ basis.T


def solve_trace_sweep(
    a_matrix: np.ndarray,
    f_cmd: np.ndarray,
    epsilons,
    n: int | None = None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    prox_scale: float = _DEFAULT_PROX_SCALE,
) -> list[SdpSolution]:
    """Solve the trace problem for every epsilon in one batched run.

    The sweep shares all geometry-dependent precomputation; the splitting
    iterations for the remaining epsilon values run in lockstep and drop
    out of the batch as they converge. Results are returned in the order
    of ``epsilons``.
    """
    a = np.asarray(a_matrix, dtype=float)
    f = np.asarray(f_cmd, dtype=float).reshape(-1)
    eps_arr = np.asarray(list(epsilons), dtype=float)
    if n is None:
        n = int(round(math.sqrt(a.shape[1])))
    if n * n != a.shape[1]:
        raise ValueError("a_matrix column count is not a perfect square")
    if np.any(eps_arr < 0.0):
        raise ValueError("epsilon values must be nonnegative")

    ws = _Workspace(a, f, n)
    results: dict[int, SdpSolution] = {}
    pending: list[int] = []
    for k, eps in enumerate(eps_arr):
        if eps >= ws.f_norm:
            results[k] = _zero_solution(ws)
        elif ws.degenerate or ws.range_dist > eps * (1.0 + 1e-9) + 1e-300:
            results[k] = _infeasible_solution(ws)
        else:
            pending.append(k)

    if pending:
        scale = ws.f_norm / math.sqrt(ws.g_max)
        idx = np.array(pending)
        eps_hat = eps_arr[idx] / ws.f_norm
        # Smaller prox steps suit near-boundary radii where the optimum is
        # close to zero; the floor keeps progress on tiny commands.
        t_arr = np.maximum(prox_scale * (1.0 - eps_hat), 1e-6)
        p = n * (n + 1) // 2
        z = np.zeros((len(idx), p))
        x = np.zeros_like(z)
        iters_done = 0
        for it in range(1, max_iter + 1):
            z_mats = ws.tri.to_matrices(z)
            w, v = np.linalg.eigh(z_mats)
            shifted = np.clip(w - t_arr[:, None], 0.0, None)
            x_mats = (v * shifted[:, None, :]) @ np.swapaxes(v, 1, 2)
            x = ws.tri.to_svec(x_mats)
            reflected = 2.0 * x - z
            y = ws.project_to_ball(reflected, eps_hat)
            z += y - x
            iters_done = it
            if it % _CHECK_EVERY == 0:
                gap_norm = np.linalg.norm(y - x, axis=1)
                x_norm = np.linalg.norm(x, axis=1)
                conv = gap_norm <= tol * (1.0 + x_norm)
                if conv.any():
                    for loc in np.where(conv)[0]:
                        k = int(idx[loc])
                        results[k] = _finalize(
                            ws, x[loc], float(eps_arr[k]), scale, it, converged=True
                        )
                    keep = ~conv
                    idx, eps_hat, t_arr = idx[keep], eps_hat[keep], t_arr[keep]
                    z, x = z[keep], x[keep]
                    if idx.size == 0:
                        break
        for loc in range(idx.size):
            k = int(idx[loc])
            results[k] = _finalize(
                ws, x[loc], float(eps_arr[k]), scale, iters_done, converged=False
            )

    return [results[k] for k in range(len(eps_arr))]


def solve_trace(
    problem: TraceProblem,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    backend: str = "splitting",
) -> SdpSolution:
    """Solve one trace problem.

    backend "splitting" runs the embedded Douglas-Rachford method;
    "cvxpy" delegates to an installed conic solver behind the same
    contract (useful as an independent cross-check).
    """
    if backend == "splitting":
        return solve_trace_sweep(
            problem.a_matrix,
            problem.f_cmd,
            [problem.epsilon],
            n=problem.n,
            tol=tol,
            max_iter=max_iter,
        )[0]
    if backend == "cvxpy":
        return _solve_trace_cvxpy(problem)
    raise ValueError(f"unknown backend {backend!r}")


def _solve_trace_cvxpy(problem: TraceProblem) -> SdpSolution:
    import cvxpy as cp

    ws = _Workspace(problem.a_matrix, problem.f_cmd, problem.n)
    if problem.epsilon >= ws.f_norm:
        return _zero_solution(ws)
    if ws.degenerate or ws.range_dist > problem.epsilon * (1.0 + 1e-9) + 1e-300:
        return _infeasible_solution(ws)

    q_var = cp.Variable((problem.n, problem.n), PSD=True)
    objective = cp.Minimize(cp.trace(q_var))
    constraint = [
        cp.norm(problem.a_matrix @ cp.vec(q_var, order="F") - problem.f_cmd)
        <= problem.epsilon
    ]
    cvx_problem = cp.Problem(objective, constraint)
    cvx_problem.solve(solver=cp.CLARABEL)
    if cvx_problem.status in ("infeasible", "infeasible_inaccurate"):
        return _infeasible_solution(ws)
    if q_var.value is None:
        return SdpSolution(
            q_matrix=np.zeros((problem.n, problem.n)),
            status=STATUS_NUMERICAL_FAILURE,
            residual=float("nan"),
            trace=float("nan"),
            gap_estimate=float("nan"),
        )
    q = 0.5 * (q_var.value + q_var.value.T)
    res_vec = problem.a_matrix @ q.reshape(-1, order="F") - problem.f_cmd
    trace = float(np.trace(q))
    gap = max(
        trace - _dual_lower_bound(problem.a_matrix, problem.f_cmd, problem.epsilon, res_vec),
        0.0,
    )
    status = STATUS_OPTIMAL if cvx_problem.status in ("optimal",) else STATUS_NUMERICAL_FAILURE
    return SdpSolution(
        q_matrix=q,
        status=status,
        residual=float(np.linalg.norm(res_vec)),
        trace=trace,
        gap_estimate=gap,
        iterations=int(cvx_problem.solver_stats.num_iters or 0),
    )
