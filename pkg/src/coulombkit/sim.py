"""Deep-space reconfiguration maneuver simulator.

Double-integrator translational dynamics driven by a PD law on the
relative positions: each consecutive pair is commanded with
f_i = -m*kappa*(xi_i - xi_des_i) - m*rho*xidot_i, the allocator splits the
command between charges and thrusts once per step, and the resulting
forces are held constant across the step (zero-order hold) while the
states advance under fixed-step RK4.

Because the allocator satisfies the relative-force command exactly, the
relative trajectory is identical whether the command is served by the
hybrid allocation or by thrusters alone; only the propellant differs.
"""

from dataclasses import dataclass, field

import numpy as np

from .allocator import (
    AllocationResult,
    allocate,
    complete_thrust,
    default_epsilon_set,
    _propellant_proxy,
)
from .formation import FormationState, coulomb_forces


@dataclass(frozen=True)
class ManeuverConfig:
    """Maneuver definition.

    masses are per spacecraft (kg); kappa (1/s^2) and rho (1/s) are the PD
    gains, both required positive so the relative error dynamics are
    asymptotically stable; xi_desired holds the (N-1, d) target relative
    positions. epsilon_count sizes the per-step linear search grid;
    epsilon_values, when given, are absolute radii filtered per step to
    the admissible interval [0, ||f_cmd(t)||).
    """

    masses: np.ndarray
    kappa: float
    rho: float
    xi_desired: np.ndarray
    positions0: np.ndarray
    velocities0: np.ndarray
    dt: float
    t_final: float
    epsilon_count: int = 30
    epsilon_values: np.ndarray | None = None

    def __post_init__(self):
        masses = np.asarray(self.masses, dtype=float).reshape(-1)
        xi_des = np.atleast_2d(np.asarray(self.xi_desired, dtype=float))
        pos0 = np.atleast_2d(np.asarray(self.positions0, dtype=float))
        vel0 = np.atleast_2d(np.asarray(self.velocities0, dtype=float))
        n, d = pos0.shape
        if masses.shape[0] != n:
            raise ValueError(f"expected {n} masses, got {masses.shape[0]}")
        if np.any(masses <= 0.0):
            raise ValueError("masses must be positive")
        if xi_des.shape != (n - 1, d):
            raise ValueError(f"xi_desired must have shape {(n - 1, d)}")
        if vel0.shape != (n, d):
            raise ValueError(f"velocities0 must have shape {(n, d)}")
        if not (self.kappa > 0.0 and self.rho > 0.0):
            raise ValueError("kappa and rho must be positive for a stable loop")
        if not self.dt > 0.0:
            raise ValueError("dt must be positive")
        if self.t_final < self.dt:
            raise ValueError("t_final must be at least one step")
        if self.epsilon_count < 1:
            raise ValueError("epsilon_count must be >= 1")
        object.__setattr__(self, "masses", masses)
        object.__setattr__(self, "xi_desired", xi_des)
        object.__setattr__(self, "positions0", pos0)
        object.__setattr__(self, "velocities0", vel0)
        if self.epsilon_values is not None:
            eps = np.sort(np.asarray(self.epsilon_values, dtype=float))
            if eps.size == 0 or np.any(eps < 0.0) or not np.all(np.isfinite(eps)):
                raise ValueError("epsilon_values must be nonnegative finite scalars")
            object.__setattr__(self, "epsilon_values", eps)

    @classmethod
    def from_relative(
        cls,
        xi0: np.ndarray,
        xi_desired: np.ndarray,
        masses: np.ndarray,
        kappa: float,
        rho: float,
        dt: float,
        t_final: float,
        v0: np.ndarray | None = None,
        epsilon_count: int = 30,
        epsilon_values: np.ndarray | None = None,
    ) -> "ManeuverConfig":
        """Build a config from initial relative positions.

        Absolute positions are anchored at the origin (x_1 = 0, then
        cumulative sums of xi0); all reported quantities depend only on
        relative positions, so the anchor is observationally neutral.
        Velocities default to rest.
        """
        xi0 = np.atleast_2d(np.asarray(xi0, dtype=float))
        n = xi0.shape[0] + 1
        positions0 = np.vstack([np.zeros(xi0.shape[1]), np.cumsum(xi0, axis=0)])
        velocities0 = (
            np.zeros_like(positions0)
            if v0 is None
            else np.atleast_2d(np.asarray(v0, dtype=float))
        )
        return cls(
            masses=masses,
            kappa=kappa,
            rho=rho,
            xi_desired=xi_desired,
            positions0=positions0,
            velocities0=velocities0,
            dt=dt,
            t_final=t_final,
            epsilon_count=epsilon_count,
            epsilon_values=epsilon_values,
        )

    @property
    def count(self) -> int:
        return self.positions0.shape[0]

    @property
    def dimension(self) -> int:
        return self.positions0.shape[1]


@dataclass(frozen=True)
class StepRecord:
    """State and actuation at the start of one step."""

    time: float
    positions: np.ndarray
    velocities: np.ndarray
    xi: np.ndarray
    f_cmd: np.ndarray
    charges: np.ndarray
    thrusts: np.ndarray
    percent_error: float        # best fit over the sweep (NaN if uncommanded)
    propellant_increment: float
    fallback: bool              # True when every radius failed this step


@dataclass
class TrajectoryLog:
    records: list[StepRecord] = field(default_factory=list)

    def times(self) -> np.ndarray:
        return np.array([r.time for r in self.records])


def command_law(
    xi: np.ndarray, xi_dot: np.ndarray, cfg: ManeuverConfig
) -> np.ndarray:
    """Stacked PD relative-force command, one d-block per consecutive pair.

    Uses the mean spacecraft mass as the law's mass factor, which matches
    the uniform-mass case exactly.
    """
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    xi_dot = np.atleast_2d(np.asarray(xi_dot, dtype=float))
    if xi.shape != cfg.xi_desired.shape or xi_dot.shape != cfg.xi_desired.shape:
        raise ValueError(f"xi and xi_dot must have shape {cfg.xi_desired.shape}")
    mass = float(np.mean(cfg.masses))
    blocks = -mass * cfg.kappa * (xi - cfg.xi_desired) - mass * cfg.rho * xi_dot
    return blocks.reshape(-1)


def _rk4_frozen_force(
    positions: np.ndarray, velocities: np.ndarray, accel: np.ndarray, dt: float
) -> tuple[np.ndarray, np.ndarray]:
    """One RK4 step of the double integrator under a held acceleration."""

    def deriv(pos_vel):
        return pos_vel[1], accel

    y = (positions, velocities)
    k1 = deriv(y)
    k2 = deriv((y[0] + 0.5 * dt * k1[0], y[1] + 0.5 * dt * k1[1]))
    k3 = deriv((y[0] + 0.5 * dt * k2[0], y[1] + 0.5 * dt * k2[1]))
    k4 = deriv((y[0] + dt * k3[0], y[1] + dt * k3[1]))
    new_pos = positions + dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    new_vel = velocities + dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    return new_pos, new_vel


def _thruster_only(state: FormationState, f_cmd: np.ndarray) -> AllocationResult:
    thrusts = complete_thrust(state, f_cmd, np.zeros(state.count))
    propellant = _propellant_proxy(thrusts)
    return AllocationResult(
        charges=np.zeros(state.count),
        thrusts=thrusts,
        chosen_epsilon=None,
        thrust_norm=float(np.linalg.norm(thrusts)),
        percent_error=100.0,
        propellant=propellant,
        thruster_only_propellant=propellant,
        all_failed=False,
    )


def _step_epsilons(cfg: ManeuverConfig, f_norm: float) -> np.ndarray | None:
    if cfg.epsilon_values is None:
        return default_epsilon_set(f_norm, cfg.epsilon_count)
    usable = cfg.epsilon_values[cfg.epsilon_values < f_norm]
    if usable.size == 0:
        return default_epsilon_set(f_norm, cfg.epsilon_count)
    return usable


def step(
    positions: np.ndarray,
    velocities: np.ndarray,
    cfg: ManeuverConfig,
    time: float = 0.0,
    mode: str = "hybrid",
    tol: float = 1e-8,
) -> tuple[np.ndarray, np.ndarray, StepRecord]:
    """Advance one step: command, allocate, hold forces, integrate.

    Returns the next positions and velocities plus the log record for the
    step that was just taken.
    """
    state = FormationState(positions)
    xi = np.diff(positions, axis=0)
    xi_dot = np.diff(velocities, axis=0)
    f_cmd = command_law(xi, xi_dot, cfg)
    f_norm = float(np.linalg.norm(f_cmd))

    if mode == "hybrid" and f_norm > 0.0:
        result = allocate(state, f_cmd, epsilons=_step_epsilons(cfg, f_norm), tol=tol)
    elif mode == "thruster-only" and f_norm > 0.0:
        result = _thruster_only(state, f_cmd)
    elif mode in ("hybrid", "thruster-only"):
        result = allocate(state, f_cmd)  # zero command short-circuits
    else:
        raise ValueError(f"unknown mode {mode!r}")

    fit_errors = [
        diag.percent_error for diag in result.diagnostics if np.isfinite(diag.percent_error)
    ]
    if fit_errors:
        best_fit = float(min(fit_errors))
    elif f_norm > 0.0:
        best_fit = 100.0
    else:
        best_fit = float("nan")

    forces = result.thrusts + coulomb_forces(state, result.charges)
    accel = forces / cfg.masses[:, None]
    new_pos, new_vel = _rk4_frozen_force(positions, velocities, accel, cfg.dt)
    record = StepRecord(
        time=time,
        positions=positions.copy(),
        velocities=velocities.copy(),
        xi=xi,
        f_cmd=f_cmd,
        charges=result.charges,
        thrusts=result.thrusts,
        percent_error=best_fit,
        propellant_increment=result.propellant * cfg.dt,
        fallback=result.all_failed,
    )
    return new_pos, new_vel, record


def run_maneuver(
    cfg: ManeuverConfig, mode: str = "hybrid", tol: float = 1e-8
) -> tuple[TrajectoryLog, dict]:
    """Simulate the full maneuver and summarize propellant use.

    The thruster-only baseline is integrated from the same command history
    (the relative trajectory does not depend on the allocation), so the
    summary reports both consumptions and the percent reduction. The
    average percent error aggregates the per-step best Coulomb fit.
    """
    n_steps = int(round(cfg.t_final / cfg.dt))
    positions = cfg.positions0.copy()
    velocities = cfg.velocities0.copy()
    log = TrajectoryLog()
    propellant = 0.0
    baseline = 0.0
    for k in range(n_steps):
        state = FormationState(positions)
        f_cmd = command_law(
            np.diff(positions, axis=0), np.diff(velocities, axis=0), cfg
        )
        baseline_thrusts = complete_thrust(state, f_cmd, np.zeros(cfg.count))
        baseline += _propellant_proxy(baseline_thrusts) * cfg.dt
        positions, velocities, record = step(
            positions, velocities, cfg, time=k * cfg.dt, mode=mode, tol=tol
        )
        propellant += record.propellant_increment
        log.records.append(record)

    fit = np.array([r.percent_error for r in log.records])
    with np.errstate(invalid="ignore"):
        avg_fit = float(np.nanmean(fit)) if np.any(np.isfinite(fit)) else float("nan")
    summary = {
        "avg_percent_error": avg_fit,
        "propellant_used": propellant,
        "propellant_thruster_only": baseline,
        "reduction_percent": (
            100.0 * (1.0 - propellant / baseline) if baseline > 0.0 else None
        ),
    }
    return log, summary
