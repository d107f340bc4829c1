"""
Pytest configuration and fixtures.
"""

import pytest

from signal_lab.schemas.allocation import GpaParams
from signal_lab.schemas.controller import ControllerConfig, Measurement
from signal_lab.schemas.network import (
    Junction,
    Lane,
    Network,
    PhaseMatrix,
    PhaseRef,
    ProgramEntry,
    RoutingMatrix,
    SignalProgram,
)
from signal_lab.services.scenarios import build_isolated_junction, build_manhattan


def make_program(pairs, t_start=0.0, clearance_time=None):
    """Build a SignalProgram from ``(phase index, clearance, t_end)`` triples."""
    return SignalProgram(
        t_start=t_start,
        entries=tuple(
            ProgramEntry(phase=PhaseRef(index=i, clearance=c), t_end=t) for i, c, t in pairs
        ),
        clearance_time=clearance_time,
    )


@pytest.fixture
def two_phase_junction():
    """Two lanes, one orthogonal phase each, T_w = 5."""
    return Junction(id=0, lanes=(0, 1), phases=PhaseMatrix(entries=((1, 0), (0, 1))), clearance_time=5.0)


@pytest.fixture
def two_phase_network(two_phase_junction):
    """Network around the two-phase junction."""
    return Network(
        lanes=(Lane(id=0, junction=0), Lane(id=1, junction=0)),
        junctions=(two_phase_junction,),
    )


@pytest.fixture
def two_phase_program():
    """Both phases green for 25 s with 5 s clearances: (p1,25) (p1',30) (p2,55) (p2',60)."""
    return make_program([(0, False, 25.0), (0, True, 30.0), (1, False, 55.0), (1, True, 60.0)], clearance_time=5.0)


@pytest.fixture
def gpa_full_config():
    return ControllerConfig(variant="gpa-full", gpa=GpaParams(kappa=10.0))


@pytest.fixture
def gpa_shorted_config():
    return ControllerConfig(variant="gpa-shorted", gpa=GpaParams(kappa=10.0))


@pytest.fixture
def measurement_factory():
    """Build measurements for junction 0."""
    def factory(x_hat, t=0.0, downstream=None):
        return Measurement(junction=0, x_hat=tuple(x_hat), downstream_x_hat=downstream or {}, t=t)

    return factory


@pytest.fixture
def divergent_junction():
    """The isolated junction whose shorted cycles grow without bound."""
    return build_isolated_junction(0.1, 0.1, 1.0, 0.0, 1.0)


@pytest.fixture
def small_grid():
    """3x3 grid, fluid demand 0.05, GPA with full cycles."""
    return build_manhattan(3, 3, 0.05)


@pytest.fixture
def small_stochastic_grid():
    """2x2 grid, Bernoulli demand 0.05, short generation horizon."""
    return build_manhattan(2, 2, 0.05, mode="stochastic", generation_horizon=300.0)


@pytest.fixture
def empty_routing():
    return RoutingMatrix(n_lanes=2)
