"""
End-to-end checks of controller behaviour at experiment scale.
"""

import numpy as np
import pytest

from signal_lab.schemas.controller import ControllerConfig
from signal_lab.services.controllers import fixed_time_program
from signal_lab.services.experiments import compare
from signal_lab.services.gpa_solver import brute_force_oracle, objective, solve_gpa, solve_orthogonal
from signal_lab.services.scenarios import build_isolated_junction, build_manhattan
from signal_lab.services.signal_core import program_end
from signal_lab.services.simulation import Simulator, run

pytestmark = pytest.mark.slow

SEEDS = [0, 1, 2, 3, 4]


def mean_ttt(results, controller_params):
    values = [r.ttt_hours for r in results if r.params == controller_params]
    assert values
    return float(np.mean(values))


def random_orthogonal(rng, n_p, n_lanes):
    owner = np.concatenate([np.arange(n_p), rng.integers(0, n_p, n_lanes - n_p)])
    P = np.zeros((n_p, n_lanes))
    P[owner, np.arange(n_lanes)] = 1.0
    return P


def test_iterative_solver_matches_closed_form():
    """Test the iterative path against the closed form on split orthogonal phases."""
    rng = np.random.default_rng(2024)
    for i in range(1000):
        n_p = int(rng.integers(1, 7))
        P = random_orthogonal(rng, n_p, n_p + int(rng.integers(0, 4)))
        x = rng.uniform(0, 100, P.shape[1])
        kappa = float(rng.uniform(0.1, 50))
        w_bar = float(rng.choice([0.0, 0.1, 0.2, 0.3, 0.4, 0.5]))

        expected = solve_orthogonal(P @ x, kappa, w_bar)
        assert solve_gpa(x, P, kappa, w_bar) == expected
        if i >= 300:
            continue

        # Appending a copy of phase 1 forces the iterative solver.
        doubled = np.vstack([P, P[:1]])
        allocation = solve_gpa(x, doubled, kappa, w_bar)
        nu = np.asarray(allocation.nu)
        merged = np.concatenate([[nu[0] + nu[-1]], nu[1:-1]])
        np.testing.assert_allclose(merged, expected.nu, atol=1e-6)
        assert allocation.w == pytest.approx(expected.w, abs=1e-6)


def test_solver_beats_fine_oracle():
    """Test shared-lane instances against the 1e-3 grid oracle."""
    rng = np.random.default_rng(7)
    P = np.array([[1, 1, 0], [0, 1, 1]])
    for _ in range(100):
        x = rng.uniform(0, 100, 3)
        kappa = float(rng.uniform(0.1, 50))
        w_bar = float(rng.choice([0.0, 0.1, 0.2]))
        allocation = solve_gpa(x, P, kappa, w_bar)
        oracle = brute_force_oracle(x, P, kappa, w_bar, grid_step=1e-3)
        assert objective(x, P, kappa, allocation) >= objective(x, P, kappa, oracle) - 1e-3


def test_three_phase_oracle():
    """Test three phases sharing lanes against the 1e-2 grid oracle."""
    rng = np.random.default_rng(11)
    P = np.array([[1, 1, 0, 0], [0, 1, 1, 0], [0, 0, 1, 1]])
    for _ in range(20):
        x = rng.uniform(0, 100, 4)
        kappa = float(rng.uniform(0.1, 50))
        allocation = solve_gpa(x, P, kappa)
        oracle = brute_force_oracle(x, P, kappa, grid_step=1e-2)
        assert objective(x, P, kappa, allocation) >= objective(x, P, kappa, oracle) - 1e-3


def test_divergent_cycles_strictly_increase():
    """Test that every shorted cycle of the divergent junction is longer than the last."""
    result = run(build_isolated_junction(0.1, 0.1, 1.0, 0.0, 1.0))
    lengths = [c.length for c in result.cycles[:21]]
    assert all(b > a for a, b in zip(lengths, lengths[1:]))


def test_clearance_floor_long_run():
    """Test that w_bar = 0.2 bounds cycles and queues over 1e5 seconds."""
    scenario = build_isolated_junction(0.1, 0.1, 1.0, 0.2, 1.0, horizon=100_000.0)
    sim = Simulator(scenario)
    state = sim.initial_state()
    sim.step(state, 100_000.0)
    # A shorted cycle is n'_p * T_w / w with w >= 0.2.
    for record in state.cycles:
        assert record.length <= 2 * 1.0 / 0.2 + 1e-9
    assert max(q for _, q in state.queue_series) <= 50.0


def test_fixed_time_cycle_on_every_junction():
    """Test that fixed-time plans span 110 s on every grid junction."""
    config = ControllerConfig(variant="fixed-time", ft_durations=(30.0, 15.0, 30.0, 15.0))
    scenario = build_manhattan(10, 10, 0.05)
    assert all(program_end(fixed_time_program(0.0, j, config)) == 110.0 for j in scenario.network.junctions)


def test_low_demand_ordering():
    """Test GPA < fixed-time < proportional-fair at delta 0.05."""
    scenario = build_manhattan(4, 4, 0.05, mode="stochastic")
    results = compare(scenario, ["gpa-full:kappa=10", "fixed-time", "prop-fair"], SEEDS)
    assert not any(r.infinite for r in results)
    gpa = mean_ttt(results, "kappa=10;w_bar=0")
    fixed = mean_ttt(results, "durations=30/15/30/15")
    fair = mean_ttt(results, "cycle=110")
    assert gpa < fixed < fair


def test_maxpressure_short_phases_win():
    """Test that MaxPressure with d = 10 beats d = 30 at delta 0.15."""
    scenario = build_manhattan(4, 4, 0.15, mode="stochastic")
    results = compare(scenario, ["max-pressure:d=10", "max-pressure:d=30"], SEEDS)
    assert mean_ttt(results, "d=10") < mean_ttt(results, "d=30")


def test_maxpressure_wrong_turning_ratios():
    """Test that wrong turning ratios cost MaxPressure less than 15%."""
    scenario = build_manhattan(4, 4, 0.05, mode="stochastic")
    results = compare(scenario, ["max-pressure:d=10", "max-pressure:d=10,wrong_tr=1"], SEEDS)
    correct = mean_ttt(results, "d=10")
    wrong = mean_ttt(results, "d=10;wrong_tr=1")
    assert wrong < 1.15 * correct


def test_conservation_in_compared_runs():
    """Test the vehicle balance on finished stochastic runs."""
    scenario = build_manhattan(4, 4, 0.05, mode="stochastic", generation_horizon=900.0)
    for result in compare(scenario, ["gpa-shorted:kappa=10", "max-pressure:d=10"], [0, 1]):
        assert result.generated == result.exited + result.in_network
