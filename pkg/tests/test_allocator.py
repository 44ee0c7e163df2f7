import numpy as np
import pytest

from coulombkit import (
    COULOMB_CONSTANT,
    FormationState,
    allocate,
    complete_thrust,
    default_epsilon_set,
    extract_charges,
    percent_error,
    relative_coulomb_force,
)
from coulombkit.linalg import difference_matrix, right_pseudoinverse

from checks import check_command_satisfaction_and_never_worse, check_extraction_roundtrip
from conftest import (
    BENCH_CHARGES_UC,
    COVERING_EPSILONS,
    FOUR_CRAFT_COMMAND,
    RANK_ONE_EPSILONS,
    TABLE_ALGORITHM,
    TABLE_ONLY_THRUSTERS,
)


def thrusts_match_up_to_sign(thrusts, reference, atol):
    direct = np.abs(thrusts - reference).max()
    flipped = np.abs(thrusts + reference).max()
    return min(direct, flipped) <= atol


def test_extract_zero_matrix():
    assert np.allclose(extract_charges(np.zeros((3, 3))), 0.0)


def test_extract_rank_one_example():
    u = np.array([3e-6, -4e-6])
    charges = extract_charges(COULOMB_CONSTANT * np.outer(u, u))
    assert np.allclose(np.abs(charges), np.abs(u), rtol=1e-12)
    # sign convention: the largest-magnitude entry comes out positive
    assert charges[1] > 0.0
    assert np.allclose(charges, -u)


def test_extract_rejects_negative_definite():
    with pytest.raises(ValueError):
        extract_charges(np.diag([-1.0, -2.0]))


def test_extraction_roundtrip_randomized():
    check_extraction_roundtrip()


def test_complete_thrust_zero_charges_matches_thruster_only(four_craft_state):
    thrusts = complete_thrust(four_craft_state, FOUR_CRAFT_COMMAND, np.zeros(4))
    assert np.abs(thrusts - TABLE_ONLY_THRUSTERS).max() <= 1e-3


def test_complete_thrust_bench_charges_matches_table(four_craft_state):
    # published column is reproduced up to a global sign (its printed signs
    # are inconsistent with the published thruster-only column: flipping
    # them is the only reading that satisfies the allocation identity)
    thrusts = complete_thrust(four_craft_state, FOUR_CRAFT_COMMAND, BENCH_CHARGES_UC * 1e-6)
    assert thrusts_match_up_to_sign(thrusts, TABLE_ALGORITHM, 1e-3)


def test_complete_thrust_exactly_served_command():
    state = FormationState([[0.0, 0.0], [5.0, 0.0], [9.0, 3.0]])
    charges = np.array([4e-5, -3e-5, 5e-5])
    f_cmd = relative_coulomb_force(state, charges)
    thrusts = complete_thrust(state, f_cmd, charges)
    assert np.abs(thrusts).max() <= 1e-15


def test_percent_error_extremes(four_craft_state):
    assert percent_error(four_craft_state, np.zeros(4), FOUR_CRAFT_COMMAND) == 100.0
    state = FormationState([[0.0, 0.0], [5.0, 0.0]])
    charges = np.array([2e-5, 3e-5])
    f_cmd = relative_coulomb_force(state, charges)
    assert percent_error(state, charges, f_cmd) <= 1e-10


def test_percent_error_zero_command_raises(four_craft_state):
    with pytest.raises(ValueError):
        percent_error(four_craft_state, np.zeros(4), np.zeros(6))


def test_allocate_bench_recovers_published_values(four_craft_state):
    result = allocate(four_craft_state, FOUR_CRAFT_COMMAND, epsilons=RANK_ONE_EPSILONS)
    assert result.chosen_epsilon == pytest.approx(0.05)
    charges_uc = result.charges * 1e6
    err = np.minimum(
        np.abs(charges_uc - BENCH_CHARGES_UC), np.abs(charges_uc + BENCH_CHARGES_UC)
    )
    assert np.all(err <= 0.02 * np.abs(BENCH_CHARGES_UC))
    assert thrusts_match_up_to_sign(result.thrusts, TABLE_ALGORITHM, 1e-3)


def test_allocate_covering_grid_reduction(four_craft_state):
    result = allocate(four_craft_state, FOUR_CRAFT_COMMAND, epsilons=COVERING_EPSILONS)
    assert 79.0 <= result.reduction_percent <= 85.0
    # infeasible radii below the reachable-set distance are recorded, not fatal
    failed = [d for d in result.diagnostics if d.status != "optimal"]
    assert failed and not result.all_failed
    assert all(d.epsilon < 0.015 for d in failed)


def test_allocate_command_satisfaction_and_never_worse():
    check_command_satisfaction_and_never_worse()


def test_allocate_perpendicular_two_craft_falls_back():
    state = FormationState([[0.0, 0.0], [10.0, 0.0]])
    f_cmd = np.array([0.0, 0.01])
    result = allocate(state, f_cmd)
    assert result.all_failed
    assert np.allclose(result.charges, 0.0)
    b_pinv = right_pseudoinverse(difference_matrix(2, 2))
    assert np.allclose(result.thrusts.reshape(-1), b_pinv @ f_cmd)
    assert result.chosen_epsilon is None


def test_allocate_near_boundary_radius(four_craft_state):
    f_norm = np.linalg.norm(FOUR_CRAFT_COMMAND)
    result = allocate(four_craft_state, FOUR_CRAFT_COMMAND, epsilons=[0.999 * f_norm])
    baseline = complete_thrust(four_craft_state, FOUR_CRAFT_COMMAND, np.zeros(4))
    # essentially thruster-only: the optimal matrix is nearly zero
    assert np.abs(result.thrusts - baseline).max() <= 1e-3
    assert result.thrust_norm <= np.linalg.norm(baseline) + 1e-12


def test_allocate_zero_command(four_craft_state):
    result = allocate(four_craft_state, np.zeros(6))
    assert np.allclose(result.charges, 0.0)
    assert np.allclose(result.thrusts, 0.0)
    assert result.percent_error is None
    assert result.reduction_percent is None
    assert not result.all_failed


def test_allocate_rejects_bad_epsilons(four_craft_state):
    f_norm = np.linalg.norm(FOUR_CRAFT_COMMAND)
    with pytest.raises(ValueError):
        allocate(four_craft_state, FOUR_CRAFT_COMMAND, epsilons=[])
    with pytest.raises(ValueError):
        allocate(four_craft_state, FOUR_CRAFT_COMMAND, epsilons=[-0.1])
    with pytest.raises(ValueError):
        allocate(four_craft_state, FOUR_CRAFT_COMMAND, epsilons=[f_norm])


def test_allocate_deterministic_and_sign_invariant(four_craft_state):
    first = allocate(four_craft_state, FOUR_CRAFT_COMMAND, epsilons=RANK_ONE_EPSILONS)
    second = allocate(four_craft_state, FOUR_CRAFT_COMMAND, epsilons=RANK_ONE_EPSILONS)
    assert np.array_equal(first.charges, second.charges)
    assert np.array_equal(first.thrusts, second.thrusts)
    # the completion is even in the charges
    flipped = complete_thrust(four_craft_state, FOUR_CRAFT_COMMAND, -first.charges)
    assert np.allclose(flipped, first.thrusts)


def test_default_epsilon_set_bounds():
    grid = default_epsilon_set(2.0)
    assert len(grid) == 30
    assert grid[0] == pytest.approx(0.02)
    assert grid[-1] == pytest.approx(1.998)
    with pytest.raises(ValueError):
        default_epsilon_set(0.0)


def test_diagnostics_are_complete(four_craft_state):
    result = allocate(four_craft_state, FOUR_CRAFT_COMMAND, epsilons=RANK_ONE_EPSILONS)
    assert len(result.diagnostics) == len(RANK_ONE_EPSILONS)
    for diag in result.diagnostics:
        assert diag.status == "optimal"
        assert diag.eigenvalues.shape == (4,)
        assert diag.charges.shape == (4,)
        assert np.isfinite(diag.percent_error)
    fits = [d.percent_error for d in result.diagnostics]
    assert np.argmin(fits) == 0  # best Coulomb fit at the tightest radius, 0.05
