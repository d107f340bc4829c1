"""
Discrete-time point-queue network simulator.

Each lane holds a queue that discharges at the saturation rate while the
lane is green and feeds downstream lanes according to the routing
matrix. Fluid mode moves real-valued flow deterministically; stochastic
mode moves whole vehicles with Bernoulli demand and sampled routing.
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import structlog

from signal_lab.core.config import settings
from signal_lab.core.exceptions import (
    ConfigurationError,
    ControllerError,
    InvalidProgramError,
    SignalLabError,
)
from signal_lab.schemas.controller import Measurement
from signal_lab.schemas.network import Junction, Network, SignalProgram
from signal_lab.schemas.results import CycleRecord, RunResult
from signal_lab.schemas.scenario import Scenario
from signal_lab.services.controllers import build_controller
from signal_lab.services.scenarios import scenario_digest
from signal_lab.services.signal_core import green_shares, green_time, program_end

logger = structlog.get_logger(__name__)

DEMAND_STREAM = 0
ROUTING_STREAM = 1
FREE_LANE_STREAM = 2


@dataclass
class SimState:
    """Mutable state of one run."""

    t: float
    x: np.ndarray
    programs: List[Optional[SignalProgram]]
    cum_vehicle_seconds: float = 0.0
    generated: float = 0.0
    exited: float = 0.0
    blocked_events: int = 0
    credit: Optional[np.ndarray] = None
    shares: List[Optional[np.ndarray]] = field(default_factory=list)
    queue_series: List[Tuple[float, float]] = field(default_factory=list)
    cycles: List[CycleRecord] = field(default_factory=list)

    @property
    def in_network(self) -> float:
        return float(self.x.sum())


def _caps(values: Sequence[Optional[float]]) -> np.ndarray:
    return np.array([math.inf if v is None else float(v) for v in values], dtype=float)


def saturate(x: np.ndarray, caps: np.ndarray) -> np.ndarray:
    """What a range-limited sensor reports: min(x, cap)."""
    return np.minimum(np.asarray(x, dtype=float), caps)


def measure(
    state: SimState,
    network: Network,
    junction: Junction,
    downstream: Sequence[int] = (),
    t: Optional[float] = None,
) -> Measurement:
    """Sensor-saturated queues of ``junction``, plus the listed downstream lanes.

    ``t`` stamps the measurement; it defaults to ``state.t``.
    """
    lanes = list(junction.lanes)
    caps = _caps([network.lanes[l].sensor_cap for l in lanes])
    x_hat = saturate(state.x[lanes], caps)
    down = {}
    for k in downstream:
        cap = network.lanes[k].sensor_cap
        down[int(k)] = float(min(state.x[k], math.inf if cap is None else cap))
    stamp = state.t if t is None else t
    return Measurement(junction=junction.id, x_hat=tuple(x_hat.tolist()), downstream_x_hat=down, t=stamp)


def total_travel_time(series: Sequence[Tuple[float, float]], dt: float = 1.0) -> float:
    """Vehicle-hours spent in the network: sum of N(t) * dt / 3600."""
    return math.fsum(q for _, q in series) * dt / 3600.0


def aggregate_queue(
    series: Sequence[Tuple[float, float]], window: Optional[float] = None
) -> List[Tuple[float, float]]:
    """Non-overlapping window means, each stamped with its window start."""
    window = settings.QUEUE_WINDOW_S if window is None else window
    if window <= 0:
        raise ConfigurationError(f"aggregation window must be > 0, got {window}")
    if not series:
        return []
    frame = pd.DataFrame(list(series), columns=["t", "queue"])
    start = np.floor(frame["t"] / window) * window
    means = frame.groupby(start)["queue"].mean()
    return [(float(t), float(q)) for t, q in means.items()]


class Simulator:
    """Runs one scenario with one seed.

    Per-lane demand draws and per-junction routing draws come from
    independent streams spawned off the seed, so the run is a pure
    function of (scenario, seed).
    """

    def __init__(self, scenario: Scenario, seed: int = 0):
        self.scenario = scenario
        self.seed = int(seed)
        network = scenario.network
        self.network = network
        self.junctions = network.junctions
        self.n_lanes = network.n_lanes
        self.stochastic = scenario.mode == "stochastic"
        self.averaged = scenario.service.discipline == "averaged"
        self.saturation = scenario.service.saturation_rate

        self.rates = np.array([lane.arrival_rate for lane in network.lanes], dtype=float)
        self.capacities = _caps([lane.capacity for lane in network.lanes])
        self.has_capacity = bool(np.isfinite(self.capacities).any())
        # Lanes outside every junction drain freely.
        self.free_lanes = np.array([lane.junction is None for lane in network.lanes], dtype=bool)

        self.R = scenario.routing.dense()
        self.exit_share = np.clip(1.0 - self.R.sum(axis=1), 0.0, None)
        rows = scenario.routing.rows()
        self.routes = [
            (
                np.array(sorted(rows.get(l, {})), dtype=np.int64),
                np.cumsum([rows[l][k] for k in sorted(rows.get(l, {}))]) if l in rows else np.zeros(0),
            )
            for l in range(self.n_lanes)
        ]

        self.lane_index = [np.asarray(j.lanes, dtype=np.int64) for j in self.junctions]
        self.phase_arrays = [j.phases.array for j in self.junctions]
        self.controllers = [
            build_controller(scenario.controller_for(j.id), scenario.controller_routing)
            for j in self.junctions
        ]
        self.downstream = [
            c.downstream_lanes(j) if c.needs_downstream else []
            for c, j in zip(self.controllers, self.junctions)
        ]

        self.generation_horizon = scenario.demand.generation_horizon
        self.hard_cap = self._hard_cap()

        seq = np.random.SeedSequence
        self.demand_rngs = {
            l: np.random.default_rng(seq(self.seed, spawn_key=(DEMAND_STREAM, l)))
            for l in np.flatnonzero(self.rates > 0).tolist()
        }
        self.routing_rngs = [
            np.random.default_rng(seq(self.seed, spawn_key=(ROUTING_STREAM, j.id))) for j in self.junctions
        ]
        self.free_rngs = {
            l: np.random.default_rng(seq(self.seed, spawn_key=(FREE_LANE_STREAM, l)))
            for l in np.flatnonzero(self.free_lanes).tolist()
        }

    def _hard_cap(self) -> float:
        if self.scenario.horizon is not None:
            return float(self.scenario.horizon)
        if self.generation_horizon is None:
            raise ConfigurationError("unbounded demand needs an explicit horizon")
        return settings.HARD_CAP_FACTOR * self.generation_horizon

    def initial_state(self) -> SimState:
        if self.scenario.initial_queues is not None:
            x0 = np.asarray(self.scenario.initial_queues, dtype=float)
        else:
            x0 = np.zeros(self.n_lanes)
        if self.stochastic:
            x0 = np.rint(x0).astype(np.int64)
        return SimState(
            t=0.0,
            x=x0,
            programs=[None] * len(self.junctions),
            generated=float(x0.sum()),
            credit=np.zeros(self.n_lanes),
            shares=[None] * len(self.junctions),
        )

    # -- sensing and control ------------------------------------------------

    def _renew(self, state: SimState, j: int, snapshot: np.ndarray, tau: float) -> SignalProgram:
        junction = self.junctions[j]
        try:
            measurement = measure(state, self.scenario.network, junction, self.downstream[j], t=tau)
            program = self.controllers[j].program(measurement, junction)
            span = program_end(program) - tau
            if span <= settings.TIME_EPS:
                raise InvalidProgramError(f"program starting at {tau} has no duration")
        except ControllerError:
            raise
        except SignalLabError as exc:
            raise ControllerError(junction.id, tau, exc) from exc

        state.programs[j] = program
        if self.averaged:
            state.shares[j] = green_shares(program, junction)
        lanes = self.lane_index[j]
        state.cycles.append(
            CycleRecord(
                junction=junction.id,
                t_start=tau,
                length=span,
                local_queue_max=float(snapshot[lanes].max()) if lanes.size else 0.0,
            )
        )
        logger.debug("program_renewed", junction=junction.id, t=tau, span=span)
        return program

    def _green(self, state: SimState, t0: float, t1: float) -> np.ndarray:
        """Green seconds per lane in [t0, t1), renewing programs as they expire."""
        eps = settings.TIME_EPS
        green = np.zeros(self.n_lanes)
        green[self.free_lanes] = t1 - t0
        snapshot = state.x.copy()
        for j, junction in enumerate(self.junctions):
            lanes = self.lane_index[j]
            tau = t0
            while tau < t1 - eps:
                program = state.programs[j]
                if program is None or program.entries[-1].t_end <= tau + eps:
                    program = self._renew(state, j, snapshot, tau)
                seg_end = min(program.entries[-1].t_end, t1)
                if self.averaged:
                    green[lanes] += state.shares[j] * (seg_end - tau)
                else:
                    green[lanes] += green_time(program, junction, tau, seg_end, matrix=self.phase_arrays[j])
                tau = seg_end
        return green

    # -- dynamics -----------------------------------------------------------

    def _demand_window(self, t0: float, t1: float) -> float:
        if self.generation_horizon is None:
            return t1 - t0
        return max(0.0, min(t1, self.generation_horizon) - t0)

    def step(self, state: SimState, dt: float = 1.0) -> SimState:
        """Advance by ``dt`` seconds in substeps of at most one second."""
        if dt <= 0:
            raise ConfigurationError(f"time step must be > 0, got {dt}")
        end = state.t + dt
        while state.t < end - settings.TIME_EPS:
            self._substep(state, min(1.0, end - state.t))
        return state

    def _substep(self, state: SimState, dt: float) -> None:
        t0, t1 = state.t, state.t + dt
        green = self._green(state, t0, t1)
        if self.stochastic:
            self._serve_stochastic(state, green, t0, t1)
        else:
            self._serve_fluid(state, green, t0, t1)
        total = float(state.x.sum())
        state.cum_vehicle_seconds += total * dt
        state.queue_series.append((t0, total))
        state.t = t1

    def _serve_fluid(self, state: SimState, green: np.ndarray, t0: float, t1: float) -> None:
        arrivals = self.rates * self._demand_window(t0, t1)
        available = state.x + arrivals
        out = np.minimum(available, self.saturation * green)
        if self.has_capacity:
            out = self._limit_fluid(state, out)
        state.generated += float(arrivals.sum())
        state.exited += float(out @ self.exit_share)
        state.x = available - out + out @ self.R

    def _limit_fluid(self, state: SimState, out: np.ndarray) -> np.ndarray:
        room = np.clip(self.capacities - state.x, 0.0, None)
        out = out.copy()
        for l in np.flatnonzero(out > 0):
            dests, cum = self.routes[l]
            probs = np.diff(cum, prepend=0.0)
            limit = out[l]
            for k, p in zip(dests, probs):
                if p > 0 and np.isfinite(room[k]):
                    limit = min(limit, room[k] / p)
            if limit < out[l] - settings.FEASIBILITY_TOL:
                state.blocked_events += 1
                out[l] = limit
            room[dests] -= out[l] * probs
        return out

    def _serve_stochastic(self, state: SimState, green: np.ndarray, t0: float, t1: float) -> None:
        x = state.x
        credit = state.credit
        credit += self.saturation * green
        credit[green <= 0] = 0.0
        wanted = np.minimum(x, np.floor(credit + settings.TIME_EPS).astype(np.int64))

        departed = np.zeros(self.n_lanes, dtype=np.int64)
        inflow = np.zeros(self.n_lanes, dtype=np.int64)
        for l in np.flatnonzero(wanted > 0).tolist():
            dests, cum = self.routes[l]
            rng = self._routing_rng(l)
            for _ in range(int(wanted[l])):
                idx = int(np.searchsorted(cum, rng.random(), side="right")) if cum.size else 0
                if idx < dests.size:
                    k = int(dests[idx])
                    if x[k] + inflow[k] >= self.capacities[k]:
                        state.blocked_events += 1
                        break
                    inflow[k] += 1
                else:
                    state.exited += 1
                departed[l] += 1

        credit -= departed
        remaining = x - departed
        credit[remaining == 0] = 0.0

        arrivals = np.zeros(self.n_lanes, dtype=np.int64)
        window = self._demand_window(t0, t1)
        if window > 0:
            for l, rng in self.demand_rngs.items():
                if rng.random() < self.rates[l] * window:
                    arrivals[l] = 1
        state.generated += int(arrivals.sum())
        state.x = remaining + inflow + arrivals

    def _routing_rng(self, lane: int) -> np.random.Generator:
        owner = self.network.lanes[lane].junction
        if owner is None:
            return self.free_rngs[lane]
        return self.routing_rngs[owner]

    # -- driver -------------------------------------------------------------

    def _finished(self, state: SimState) -> bool:
        if self.stochastic:
            empty = not state.x.any()
        else:
            empty = float(state.x.sum()) <= settings.FEASIBILITY_TOL
        if not empty:
            return False
        if not (self.rates > 0).any():
            return True
        return self.generation_horizon is not None and state.t >= self.generation_horizon - settings.TIME_EPS

    def run(self) -> RunResult:
        """Step until the network empties after demand stops, or the hard cap."""
        log = logger.bind(scenario=self.scenario.name, seed=self.seed, mode=self.scenario.mode)
        log.info("run_started", hard_cap=self.hard_cap)
        state = self.initial_state()
        while state.t < self.hard_cap - settings.TIME_EPS:
            if self._finished(state):
                break
            self.step(state, min(1.0, self.hard_cap - state.t))

        infinite = not self._finished(state)
        ttt = math.inf if infinite else total_travel_time(state.queue_series)
        if infinite:
            log.warning("run_gridlocked", t=state.t, in_network=state.in_network)
        else:
            log.info("run_finished", t=state.t, ttt_hours=ttt)
        return self._result(state, ttt, infinite)

    def _result(self, state: SimState, ttt: float, infinite: bool) -> RunResult:
        if state.cycles:
            frame = pd.DataFrame([c.model_dump() for c in state.cycles])
            mean_cycle = {int(j): float(v) for j, v in frame.groupby("junction")["length"].mean().items()}
        else:
            mean_cycle = {}
        config = self.scenario.controller
        return RunResult(
            scenario_name=self.scenario.name,
            scenario_hash=scenario_digest(self.scenario),
            seed=self.seed,
            controller=config.variant,
            params=config.describe(),
            queue_series=state.queue_series,
            ttt_hours=ttt,
            infinite=infinite,
            blocked_events=state.blocked_events,
            generated=float(state.generated),
            exited=float(state.exited),
            in_network=state.in_network,
            t_end=state.t,
            mean_cycle_s=mean_cycle,
            cycles=state.cycles,
        )


def run(scenario: Scenario, seed: int = 0) -> RunResult:
    return Simulator(scenario, seed).run()
