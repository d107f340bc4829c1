"""
Junction controllers: GPA with full or shorted cycles, MaxPressure,
fixed-time and proportional-fair baselines.

Every controller is a pure map from a measurement to the next signal
program of its junction. GPA variants see local queues only; MaxPressure
additionally reads the queues one hop downstream.
"""

from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import structlog

from signal_lab.core.config import settings
from signal_lab.core.exceptions import ConfigurationError, DimensionMismatchError, MissingRoutingError
from signal_lab.schemas.controller import ControllerConfig, Measurement
from signal_lab.schemas.network import Junction, PhaseRef, ProgramEntry, RoutingMatrix, SignalProgram
from signal_lab.services.gpa_solver import cycle_length, solve_gpa

logger = structlog.get_logger(__name__)

# Duration of the clearance hold a shorted-cycle controller emits on an empty junction.
EMPTY_HOLD_S = 1.0


def _local_queues(measurement: Measurement, junction: Junction) -> np.ndarray:
    x_hat = np.asarray(measurement.x_hat, dtype=float)
    if x_hat.size != len(junction.lanes):
        raise DimensionMismatchError(
            f"junction {junction.id} has {len(junction.lanes)} lanes, measurement has {x_hat.size}"
        )
    return x_hat


def _apply_min_green(greens: Sequence[float], min_green: float) -> List[float]:
    if min_green <= 0:
        return list(greens)
    return [max(g, min_green) if g > 0 else g for g in greens]


def _layout(
    t: float,
    phases: Iterable[Tuple[int, float]],
    clearance_time: float,
) -> SignalProgram:
    """Lay out ``(phase index, green seconds)`` pairs, each followed by its clearance."""
    entries = []
    clock = t
    for index, green in phases:
        clock += green
        entries.append(ProgramEntry(phase=PhaseRef(index=index), t_end=clock))
        clock += clearance_time
        entries.append(ProgramEntry(phase=PhaseRef(index=index, clearance=True), t_end=clock))
    return SignalProgram(t_start=t, entries=tuple(entries), clearance_time=clearance_time)


def _require(config: ControllerConfig, variant: str) -> None:
    if config.variant != variant:
        raise ConfigurationError(f"expected a {variant} configuration, got {config.variant}")
    missing = config.missing_fields()
    if missing:
        raise ConfigurationError(f"{variant} controller is missing {', '.join(missing)}")


def gpa_full_program(measurement: Measurement, junction: Junction, config: ControllerConfig) -> SignalProgram:
    """GPA with full clearance cycles.

    Every phase is emitted in row order, phase i green for nu_i * T_cyc
    seconds, so the program spans T_cyc = n_p * T_w / w.
    """
    _require(config, "gpa-full")
    x_hat = _local_queues(measurement, junction)
    allocation = solve_gpa(x_hat, junction.phases.array, config.gpa.kappa, config.gpa.w_bar)
    T_cyc = cycle_length(allocation, junction.n_phases, junction.clearance_time)
    greens = _apply_min_green([nu * T_cyc for nu in allocation.nu], config.min_green)
    logger.debug("gpa_full_cycle", junction=junction.id, t=measurement.t, cycle=T_cyc, w=allocation.w)
    return _layout(measurement.t, enumerate(greens), junction.clearance_time)


def gpa_shorted_program(measurement: Measurement, junction: Junction, config: ControllerConfig) -> SignalProgram:
    """GPA with shorted cycles.

    Only phases with nu_i > 0 are emitted and the cycle is n'_p * T_w / w.
    An empty junction holds the first clearance phase for one second.
    """
    _require(config, "gpa-shorted")
    x_hat = _local_queues(measurement, junction)
    allocation = solve_gpa(x_hat, junction.phases.array, config.gpa.kappa, config.gpa.w_bar)
    active = [i for i, nu in enumerate(allocation.nu) if nu > settings.ACTIVE_PHASE_TOL]
    if not active:
        return SignalProgram(
            t_start=measurement.t,
            entries=(ProgramEntry(phase=PhaseRef(index=0, clearance=True), t_end=measurement.t + EMPTY_HOLD_S),),
            clearance_time=junction.clearance_time,
        )

    T_cyc = cycle_length(allocation, len(active), junction.clearance_time)
    greens = _apply_min_green([allocation.nu[i] * T_cyc for i in active], config.min_green)
    logger.debug(
        "gpa_shorted_cycle", junction=junction.id, t=measurement.t, cycle=T_cyc, active=len(active)
    )
    return _layout(measurement.t, zip(active, greens), junction.clearance_time)


def _downstream_term(
    lane: int,
    rows: Mapping[int, Mapping[int, float]],
    x_hat_local: Mapping[int, float],
    downstream_x_hat: Mapping[int, float],
) -> float:
    total = 0.0
    for k, p in sorted(rows.get(lane, {}).items()):
        if k in downstream_x_hat:
            total += p * downstream_x_hat[k]
        elif k in x_hat_local:
            total += p * x_hat_local[k]
        else:
            raise MissingRoutingError(f"no measurement for lane {k} downstream of lane {lane}")
    return total


def pressure(
    phase: Sequence[int],
    x_hat_local: Mapping[int, float],
    downstream_x_hat: Mapping[int, float],
    routing: Optional[RoutingMatrix],
) -> float:
    """Pressure of a phase: sum over its lanes of x_l - sum_k R_lk x_k.

    ``phase`` lists lane ids. A lane without routing entries is a pure
    exit and has no downstream term.
    """
    if routing is None:
        raise MissingRoutingError("pressure needs a routing matrix")
    for lane in phase:
        if not 0 <= lane < routing.n_lanes:
            raise MissingRoutingError(f"routing has no row for lane {lane}")
    return _phase_pressure(phase, routing.rows(), x_hat_local, downstream_x_hat)


def _phase_pressure(
    phase: Sequence[int],
    rows: Mapping[int, Mapping[int, float]],
    x_hat_local: Mapping[int, float],
    downstream_x_hat: Mapping[int, float],
) -> float:
    return sum(
        x_hat_local[lane] - _downstream_term(lane, rows, x_hat_local, downstream_x_hat)
        for lane in phase
    )


def _pressures(
    measurement: Measurement,
    junction: Junction,
    rows: Mapping[int, Mapping[int, float]],
) -> np.ndarray:
    x_hat = _local_queues(measurement, junction)
    local = dict(zip(junction.lanes, x_hat.tolist()))
    return np.array(
        [
            _phase_pressure(
                [junction.lanes[c] for c in junction.phases.phase_members(i)],
                rows,
                local,
                measurement.downstream_x_hat,
            )
            for i in range(junction.n_phases)
        ]
    )


def maxpressure_program(
    measurement: Measurement,
    junction: Junction,
    config: ControllerConfig,
    routing: Optional[RoutingMatrix],
) -> SignalProgram:
    """Activate the phase of largest pressure for ``d`` seconds, then its clearance.

    Ties go to the lowest phase index. The clearance follows every
    activation, including repeated wins of the same phase.
    """
    _require(config, "max-pressure")
    if routing is None:
        raise MissingRoutingError("max-pressure needs controller routing")
    pressures = _pressures(measurement, junction, routing.rows())
    chosen = int(np.argmax(pressures))
    return _layout(measurement.t, [(chosen, config.mp_duration)], junction.clearance_time)


def fixed_time_program(t: float, junction: Junction, config: ControllerConfig) -> SignalProgram:
    """Every phase for its configured duration, each followed by a clearance."""
    _require(config, "fixed-time")
    durations = config.ft_durations
    if len(durations) != junction.n_phases:
        raise ConfigurationError(
            f"junction {junction.id} has {junction.n_phases} phases "
            f"but {len(durations)} fixed-time durations were given"
        )
    return _layout(t, enumerate(durations), junction.clearance_time)


def prop_fair_program(measurement: Measurement, junction: Junction, config: ControllerConfig) -> SignalProgram:
    """Fixed cycle whose green budget is split in proportion to phase queue sums."""
    _require(config, "prop-fair")
    budget = config.pf_cycle - junction.n_phases * junction.clearance_time
    if budget <= 0:
        raise ConfigurationError(
            f"pf_cycle {config.pf_cycle} leaves no green at junction {junction.id} "
            f"({junction.n_phases} clearances of {junction.clearance_time} s)"
        )
    x_hat = _local_queues(measurement, junction)
    loads = junction.phases.array @ x_hat
    total = float(loads.sum())
    if total > 0:
        greens = (budget * loads / total).tolist()
    else:
        greens = [budget / junction.n_phases] * junction.n_phases
    greens = _apply_min_green(greens, config.min_green)
    return _layout(measurement.t, enumerate(greens), junction.clearance_time)


class Controller:
    """Common interface: ``program(measurement, junction) -> SignalProgram``."""

    needs_downstream = False

    def __init__(self, config: ControllerConfig):
        _require(config, config.variant)
        self.config = config

    @property
    def variant(self) -> str:
        return self.config.variant

    def program(self, measurement: Measurement, junction: Junction) -> SignalProgram:
        raise NotImplementedError


class GpaFullController(Controller):
    def program(self, measurement: Measurement, junction: Junction) -> SignalProgram:
        return gpa_full_program(measurement, junction, self.config)


class GpaShortedController(Controller):
    def program(self, measurement: Measurement, junction: Junction) -> SignalProgram:
        return gpa_shorted_program(measurement, junction, self.config)


class MaxPressureController(Controller):
    needs_downstream = True

    def __init__(self, config: ControllerConfig, routing: Optional[RoutingMatrix]):
        super().__init__(config)
        if routing is None:
            raise MissingRoutingError("max-pressure needs controller routing")
        self.routing = routing
        self._rows = routing.rows()

    def downstream_lanes(self, junction: Junction) -> List[int]:
        """Lanes whose measurements the pressure computation reads."""
        local = set(junction.lanes)
        return sorted({k for lane in junction.lanes for k in self._rows.get(lane, {}) if k not in local})

    def program(self, measurement: Measurement, junction: Junction) -> SignalProgram:
        return maxpressure_program(measurement, junction, self.config, self.routing)


class FixedTimeController(Controller):
    def program(self, measurement: Measurement, junction: Junction) -> SignalProgram:
        return fixed_time_program(measurement.t, junction, self.config)


class ProportionalFairController(Controller):
    def program(self, measurement: Measurement, junction: Junction) -> SignalProgram:
        return prop_fair_program(measurement, junction, self.config)


CONTROLLERS: Dict[str, type] = {
    "gpa-full": GpaFullController,
    "gpa-shorted": GpaShortedController,
    "max-pressure": MaxPressureController,
    "fixed-time": FixedTimeController,
    "prop-fair": ProportionalFairController,
}


def build_controller(config: ControllerConfig, routing: Optional[RoutingMatrix] = None) -> Controller:
    """Instantiate the controller for ``config``; MaxPressure also takes the routing it believes."""
    cls = CONTROLLERS[config.variant]
    if cls is MaxPressureController:
        return cls(config, routing)
    return cls(config)
