"""Control allocation for hybrid Coulomb spacecraft formations.

A formation whose spacecraft carry both active charge control and
conventional thrusters can serve part of a commanded relative force with
inter-spacecraft Coulomb forces, at negligible propellant cost. This
package provides the force model, the trace-minimization relaxation that
finds realizable charge sets, the sweep-based allocator with minimal-norm
thrust completion, and a deep-space maneuver simulator that quantifies
the propellant savings.
"""

from .allocator import (
    AllocationResult,
    EpsilonDiagnostic,
    allocate,
    complete_thrust,
    default_epsilon_set,
    extract_charges,
    percent_error,
)
from .formation import (
    COULOMB_CONSTANT,
    MIN_SEPARATION,
    FormationState,
    SingularGeometryError,
    coulomb_force_on,
    coulomb_forces,
    coulomb_row_map,
    relative_coulomb_force,
    relative_coulomb_matrix,
    relative_thrust,
)
from .linalg import (
    EigenPair,
    difference_matrix,
    jacobi_eigh,
    kron,
    right_pseudoinverse,
    sym_eig,
    vec,
)
from .scenario import Scenario, ScenarioError, load_scenario
from .sdp import (
    SdpSolution,
    TraceProblem,
    build_trace_problem,
    solve_trace,
    solve_trace_sweep,
)
from .sim import (
    ManeuverConfig,
    StepRecord,
    TrajectoryLog,
    command_law,
    run_maneuver,
    step,
)

__all__ = [
    "AllocationResult",
    "COULOMB_CONSTANT",
    "EigenPair",
    "EpsilonDiagnostic",
    "FormationState",
    "ManeuverConfig",
    "MIN_SEPARATION",
    "Scenario",
    "ScenarioError",
    "SdpSolution",
    "SingularGeometryError",
    "StepRecord",
    "TraceProblem",
    "TrajectoryLog",
    "allocate",
    "build_trace_problem",
    "command_law",
    "complete_thrust",
    "coulomb_force_on",
    "coulomb_forces",
    "coulomb_row_map",
    "default_epsilon_set",
    "difference_matrix",
    "extract_charges",
    "jacobi_eigh",
    "kron",
    "load_scenario",
    "percent_error",
    "relative_coulomb_force",
    "relative_coulomb_matrix",
    "relative_thrust",
    "right_pseudoinverse",
    "run_maneuver",
    "solve_trace",
    "solve_trace_sweep",
    "step",
    "sym_eig",
    "vec",
]

__version__ = "0.1.0"
