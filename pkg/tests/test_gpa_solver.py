"""
Tests for the GPA allocation solver.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings as hypothesis_settings
from hypothesis import strategies as st

from signal_lab.core.exceptions import (
    ConfigurationError,
    DimensionMismatchError,
    GridTooLargeError,
    InfiniteCycleError,
)
from signal_lab.schemas.allocation import Allocation
from signal_lab.services.gpa_solver import (
    brute_force_oracle,
    cycle_length,
    cycles_diverge,
    divergent_cycle_recursion,
    objective,
    phase_loads,
    solve_gpa,
    solve_orthogonal,
)

SHARED_MIDDLE = [[1, 1, 0], [0, 1, 1]]


def assert_feasible(allocation: Allocation, w_bar: float = 0.0):
    assert all(v >= 0 for v in allocation.nu)
    assert allocation.w >= w_bar - 1e-12
    assert math.fsum(allocation.nu) + allocation.w == pytest.approx(1.0, abs=1e-9)


def test_objective_examples():
    """Test direct evaluation with the 0 log 0 convention."""
    value = objective([1, 0], np.eye(2), 0.1, Allocation(nu=(0.5, 0.0), w=0.5))
    assert value == pytest.approx(math.log(0.5) + 0.1 * math.log(0.5))
    assert objective([0, 0], np.eye(2), 0.1, Allocation(nu=(0.3, 0.2), w=0.5)) == pytest.approx(0.1 * math.log(0.5))
    assert objective([0, 0], np.eye(2), 0.1, Allocation(nu=(0.0, 0.0), w=1.0)) == 0.0


def test_objective_log_zero_guard():
    """Test that zero clearance gives minus infinity."""
    assert objective([1, 1], np.eye(2), 0.1, Allocation(nu=(0.5, 0.5), w=0.0)) == -math.inf


def test_objective_dimension_mismatch():
    """Test that shapes are checked."""
    with pytest.raises(DimensionMismatchError):
        objective([1, 1, 1], np.eye(2), 0.1, Allocation(nu=(0.5, 0.0), w=0.5))


def test_solve_orthogonal_single_loaded_phase():
    """Test the first allocation of the diverging two-lane junction."""
    allocation = solve_orthogonal([1, 0], 0.1)
    assert allocation.nu == pytest.approx((1 / 1.1, 0.0))
    assert allocation.w == pytest.approx(0.1 / 1.1)


def test_solve_orthogonal_closed_form():
    """Test the unbounded and bound-active closed forms."""
    free = solve_orthogonal([4, 6], 10.0)
    assert free.nu == pytest.approx((0.2, 0.3))
    assert free.w == pytest.approx(0.5)

    bound = solve_orthogonal([4, 6], 10.0, w_bar=0.6)
    assert bound.nu == pytest.approx((0.16, 0.24))
    assert bound.w == pytest.approx(0.6)


def test_solve_orthogonal_rejects_kappa():
    """Test that kappa must be positive."""
    with pytest.raises(ConfigurationError):
        solve_orthogonal([1, 2], 0.0)


def test_solve_gpa_zero_queues():
    """Test that an empty junction gets all clearance."""
    allocation = solve_gpa([0, 0, 0], SHARED_MIDDLE, 5.0)
    assert allocation.nu == (0.0, 0.0)
    assert allocation.w == 1.0


def test_solve_gpa_dispatches_orthogonal():
    """Test that orthogonal phase matrices use the closed form."""
    P = [[1, 0, 1], [0, 1, 0]]
    x = [2.0, 3.0, 1.0]
    assert solve_gpa(x, P, 5.0, 0.1) == solve_orthogonal(phase_loads(x, P), 5.0, 0.1)


def test_solve_gpa_shared_lane_matches_oracle():
    """Test the shared-lane instance against the grid oracle."""
    x = [2.0, 3.0, 1.0]
    allocation = solve_gpa(x, SHARED_MIDDLE, 5.0)
    oracle = brute_force_oracle(x, SHARED_MIDDLE, 5.0, grid_step=1e-3)
    assert_feasible(allocation)
    assert objective(x, SHARED_MIDDLE, 5.0, allocation) >= objective(x, SHARED_MIDDLE, 5.0, oracle) - 1e-6
    assert np.allclose(allocation.nu, oracle.nu, atol=1e-2)


def test_solve_gpa_general_path_matches_closed_form():
    """Test the iterative solver on an orthogonal problem given with a redundant phase."""
    # The third phase duplicates the first, so the matrix is not orthogonal.
    P = [[1, 0], [0, 1], [1, 0]]
    x = [4.0, 6.0]
    allocation = solve_gpa(x, P, 10.0)
    assert allocation.nu[0] + allocation.nu[2] == pytest.approx(0.2, abs=1e-6)
    assert allocation.nu[1] == pytest.approx(0.3, abs=1e-6)
    assert allocation.w == pytest.approx(0.5, abs=1e-6)


def test_solve_gpa_bound_activation():
    """Test that a binding clearance floor is met exactly."""
    x = [2.0, 3.0, 1.0]
    free = solve_gpa(x, SHARED_MIDDLE, 1.0)
    assert free.w < 0.5
    bound = solve_gpa(x, SHARED_MIDDLE, 1.0, w_bar=0.5)
    assert bound.w == 0.5
    assert bound.nu == pytest.approx((1 / 3, 1 / 6), abs=1e-12)
    assert_feasible(bound, 0.5)


def test_solve_orthogonal_floor_is_exact():
    """Test that a binding floor comes back as exactly w_bar."""
    for X in ([5.0, 1.0], [0.3, 7.0, 2.2], [100.0, 0.1]):
        assert solve_orthogonal(X, 0.1, 0.3).w == 0.3
        assert solve_orthogonal(X, 0.1, 0.7).w == 0.7


def test_solve_gpa_shared_lane_exact():
    """Test the shared-lane optimum (4/11, 2/11, 5/11) to rounding level."""
    allocation = solve_gpa([2.0, 3.0, 1.0], SHARED_MIDDLE, 5.0)
    assert allocation.nu == pytest.approx((4 / 11, 2 / 11), abs=1e-12)
    assert allocation.w == pytest.approx(5 / 11, abs=1e-12)


def test_brute_force_oracle_orthogonal():
    """Test the oracle against the closed form."""
    oracle = brute_force_oracle([4, 6], np.eye(2), 10.0, grid_step=1e-3)
    assert oracle.nu == pytest.approx((0.2, 0.3), abs=1e-3)
    assert oracle.w == pytest.approx(0.5, abs=1e-3)


def test_brute_force_oracle_respects_floor():
    """Test that the oracle never goes below the clearance floor."""
    oracle = brute_force_oracle([5, 1], np.eye(2), 0.1, w_bar=0.9, grid_step=1e-3)
    assert oracle.w >= 0.9


def test_brute_force_oracle_large_kappa():
    """Test that a huge clearance weight drives w to one."""
    oracle = brute_force_oracle([1, 1], np.eye(2), 1e6, grid_step=1e-3)
    assert oracle.w == pytest.approx(1.0, abs=1e-2)


def test_brute_force_oracle_grid_too_large():
    """Test the enumeration limit."""
    with pytest.raises(GridTooLargeError):
        brute_force_oracle([1, 1, 1], np.eye(3), 1.0, grid_step=1e-3)


def test_brute_force_oracle_phase_limit():
    """Test that at most four phases are enumerated."""
    with pytest.raises(ConfigurationError):
        brute_force_oracle([1] * 5, np.eye(5), 1.0, grid_step=0.5)


def test_cycle_length():
    """Test the cycle formula for full and shorted cycles."""
    assert cycle_length(Allocation(nu=(0.2, 0.3), w=0.5), 2, 5.0) == pytest.approx(20.0)
    assert cycle_length(solve_orthogonal([1, 0], 0.1), 1, 1.0) == pytest.approx(11.0)
    assert cycle_length(Allocation(nu=(0.0, 0.0), w=1.0), 2, 5.0) == 10.0


def test_cycle_length_infinite():
    """Test that zero clearance is rejected."""
    with pytest.raises(InfiniteCycleError):
        cycle_length(Allocation(nu=(1.0,), w=0.0), 1, 1.0)


def test_divergent_cycle_recursion():
    """Test the closed-form queue peaks and cycle lengths."""
    for n, (peak, length) in enumerate(divergent_cycle_recursion(1.0, 0.1, 0.1, 20)):
        assert peak == pytest.approx(1 + 0.1 * n, abs=1e-9)
        assert length == pytest.approx(11 + n, abs=1e-9)


def test_cycles_diverge():
    """Test the divergence conditions."""
    assert cycles_diverge(1.0, 0.1, 0.1)
    assert not cycles_diverge(1.0, 0.01, 0.1)


queues = st.lists(st.floats(min_value=0.5, max_value=50.0), min_size=3, max_size=3)
kappas = st.floats(min_value=0.1, max_value=50.0)


@hypothesis_settings(max_examples=50, deadline=None)
@given(queues, kappas, st.floats(min_value=0.1, max_value=10.0))
def test_joint_scaling_invariance(x, kappa, alpha):
    """Test that scaling queues and kappa together leaves the allocation unchanged."""
    base = solve_gpa(x, SHARED_MIDDLE, kappa)
    scaled = solve_gpa([alpha * v for v in x], SHARED_MIDDLE, alpha * kappa)
    np.testing.assert_allclose(scaled.nu, base.nu, atol=1e-8)
    assert scaled.w == pytest.approx(base.w, abs=1e-8)


@pytest.mark.parametrize(
    "x, kappa, alpha",
    [
        ([2.57, 86.08, 1.20], 5.495, 8.19),
        ([2.57, 86.08, 1.20], 5.495, 3.0),
        ([40.0, 0.7, 13.0], 0.3, 0.3),
        ([1.0, 99.0, 1.0], 48.0, 1.7),
    ],
)
def test_joint_scaling_non_power_of_two(x, kappa, alpha):
    """Test joint scaling by factors whose iterates are not bit-identical."""
    base = solve_gpa(x, SHARED_MIDDLE, kappa)
    scaled = solve_gpa([alpha * v for v in x], SHARED_MIDDLE, alpha * kappa)
    np.testing.assert_allclose(scaled.nu, base.nu, atol=1e-8)
    assert scaled.w == pytest.approx(base.w, abs=1e-8)


@hypothesis_settings(max_examples=100, deadline=None)
@given(
    st.lists(st.floats(min_value=0.0, max_value=100.0), min_size=1, max_size=6),
    kappas,
    st.floats(min_value=0.01, max_value=1000.0),
)
def test_joint_scaling_orthogonal(X, kappa, alpha):
    """Test joint-scaling invariance of the closed form for any positive factor."""
    base = solve_orthogonal(X, kappa)
    scaled = solve_orthogonal([alpha * v for v in X], alpha * kappa)
    np.testing.assert_allclose(scaled.nu, base.nu, atol=1e-8)


@hypothesis_settings(max_examples=30, deadline=None)
@given(queues, kappas)
def test_permutation_equivariance(x, kappa):
    """Test that permuting phases permutes the allocation."""
    P = np.array(SHARED_MIDDLE)
    base = solve_gpa(x, P, kappa)
    swapped = solve_gpa(x, P[::-1], kappa)
    np.testing.assert_allclose(swapped.nu[::-1], base.nu, atol=1e-5)


@hypothesis_settings(max_examples=100, deadline=None)
@given(
    st.lists(st.floats(min_value=0.1, max_value=100.0), min_size=2, max_size=6),
    kappas,
)
def test_proportionality(X, kappa):
    """Test that phase fractions follow phase queue sums."""
    allocation = solve_orthogonal(X, kappa)
    assert allocation.nu[0] / allocation.nu[1] == pytest.approx(X[0] / X[1], rel=1e-9)


@hypothesis_settings(max_examples=100, deadline=None)
@given(
    st.lists(st.floats(min_value=0.0, max_value=100.0), min_size=1, max_size=6),
    kappas,
    st.sampled_from([0.0, 0.1, 0.2, 0.3, 0.4, 0.5]),
)
def test_feasibility(X, kappa, w_bar):
    """Test that every returned allocation is feasible."""
    assert_feasible(solve_orthogonal(X, kappa, w_bar), w_bar)


@given(kappas, st.floats(min_value=0.0, max_value=100.0), st.floats(min_value=0.1, max_value=10.0))
def test_monotone_cycle(kappa, total, extra):
    """Test that the full cycle grows with the total queue."""
    short = cycle_length(solve_orthogonal([total, 0.0], kappa), 2, 5.0)
    longer = cycle_length(solve_orthogonal([total + extra, 0.0], kappa), 2, 5.0)
    assert longer > short


@hypothesis_settings(max_examples=40, deadline=None)
@given(
    st.lists(st.one_of(st.just(0.0), st.floats(min_value=0.01, max_value=100.0)), min_size=3, max_size=3),
    kappas,
    st.sampled_from([0.0, 0.1, 0.2]),
)
def test_oracle_dominance(x, kappa, w_bar):
    """Test that the solver is never beaten by the grid oracle."""
    allocation = solve_gpa(x, SHARED_MIDDLE, kappa, w_bar)
    assert_feasible(allocation, w_bar)
    oracle = brute_force_oracle(x, SHARED_MIDDLE, kappa, w_bar, grid_step=1e-2)
    assert objective(x, SHARED_MIDDLE, kappa, allocation) >= objective(x, SHARED_MIDDLE, kappa, oracle) - 1e-6
