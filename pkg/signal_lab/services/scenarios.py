"""
Scenario construction, validation and the versioned scenario file format.
"""

import hashlib
import json
import math
import re
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import structlog
from pydantic import ValidationError

from signal_lab.core.config import settings
from signal_lab.core.exceptions import ConfigurationError, ScenarioParseError, ScenarioValidationError
from signal_lab.schemas.allocation import GpaParams
from signal_lab.schemas.controller import GPA_VARIANTS, ControllerConfig
from signal_lab.schemas.network import Junction, Lane, Network, PhaseMatrix, RoutingMatrix
from signal_lab.schemas.scenario import DEFAULT_TURNS, WRONG_TURNS, DemandModel, Scenario, ServiceModel, TurnSpec
from signal_lab.services.signal_core import validate_network, validate_routing

logger = structlog.get_logger(__name__)

HEADER_PREFIX = "# signal-lab scenario v"

APPROACHES = ("N", "E", "S", "W")
# Travel heading (dr, dc) of vehicles arriving on each approach; rows grow southward.
HEADING = {"N": (1, 0), "S": (-1, 0), "W": (0, 1), "E": (0, -1)}
ARRIVES_ON = {heading: approach for approach, heading in HEADING.items()}

THROUGH_CAPACITY_M = 300.0
FIXED_TIME_DURATIONS = (30.0, 15.0, 30.0, 15.0)
LANE_NAME = re.compile(r"^J(\d+)_(\d+):([NESW]):(L|T|TR)$")


# -- grid geometry ------------------------------------------------------------


def street_lanes(index: int) -> int:
    """Lanes per direction on street ``index``: 1 on even indices, 2 on odd ones."""
    return 1 if index % 2 == 0 else 2


def approach_lanes(approach: str, r: int, c: int) -> int:
    return street_lanes(c) if approach in ("N", "S") else street_lanes(r)


def queue_classes(n_road: int) -> Tuple[str, ...]:
    return ("L", "TR") if n_road == 1 else ("L", "T", "TR")


def _straight_split(turns: TurnSpec) -> Tuple[float, float]:
    # Straight traffic joins the shorter of the exclusive and shared lanes.
    s, r = turns.p_straight, turns.p_right
    s1 = min(s, (s + r) / 2.0)
    return s1, s - s1


def lane_choice(turns: TurnSpec, n_road: int) -> Dict[str, float]:
    """Share of an approach's arrivals joining each of its queues."""
    if n_road == 1:
        return {"L": turns.p_left, "TR": turns.p_straight + turns.p_right}
    s1, s2 = _straight_split(turns)
    return {"L": turns.p_left, "T": s1, "TR": turns.p_right + s2}


def movement_mix(turns: TurnSpec, queue: str, n_road: int) -> Dict[str, float]:
    """Turning movements of the vehicles in one queue."""
    if queue == "L":
        return {"left": 1.0}
    if queue == "T":
        return {"straight": 1.0}
    if n_road == 1:
        straight, right = turns.p_straight, turns.p_right
    else:
        straight, right = _straight_split(turns)[1], turns.p_right
    total = straight + right
    if total <= 0:
        return {"straight": 1.0}
    return {"straight": straight / total, "right": right / total}


def turn(heading: Tuple[int, int], movement: str) -> Tuple[int, int]:
    dr, dc = heading
    if movement == "left":
        return (-dc, dr)
    if movement == "right":
        return (dc, -dr)
    return heading


def lane_name(r: int, c: int, approach: str, queue: str) -> str:
    return f"J{r}_{c}:{approach}:{queue}"


# -- generators ---------------------------------------------------------------


def queue_cap(length_m: float, vehicle_length: float) -> float:
    """Whole vehicles that fit in ``length_m`` meters of lane."""
    return float(math.floor(length_m / vehicle_length))


def _grid_network(
    rows: int, cols: int, delta: float, turns: TurnSpec, clearance_time: float, capacity: bool, vehicle_length: float
) -> Network:
    sensor_cap = queue_cap(settings.SENSOR_RANGE_M, vehicle_length)
    through_cap = queue_cap(THROUGH_CAPACITY_M, vehicle_length)
    lanes: List[Lane] = []
    junctions: List[Junction] = []
    for r in range(rows):
        for c in range(cols):
            j = r * cols + c
            members: Dict[Tuple[str, str], int] = {}
            for approach in APPROACHES:
                n_road = approach_lanes(approach, r, c)
                shares = lane_choice(turns, n_road)
                dr, dc = HEADING[approach]
                boundary = not (0 <= r - dr < rows and 0 <= c - dc < cols)
                for queue in queue_classes(n_road):
                    lane_id = len(lanes)
                    members[(approach, queue)] = lane_id
                    lanes.append(
                        Lane(
                            id=lane_id,
                            junction=j,
                            sensor_cap=sensor_cap,
                            capacity=(sensor_cap if queue == "L" else through_cap) if capacity else None,
                            arrival_rate=n_road * delta * shares[queue] if boundary else 0.0,
                            name=lane_name(r, c, approach, queue),
                        )
                    )

            order = sorted(members.values())
            groups = (
                (("N", "S"), ("T", "TR")),
                (("N", "S"), ("L",)),
                (("E", "W"), ("T", "TR")),
                (("E", "W"), ("L",)),
            )
            entries = []
            for approaches, queues in groups:
                served = {members[key] for key in members if key[0] in approaches and key[1] in queues}
                entries.append(tuple(1 if lane_id in served else 0 for lane_id in order))
            junctions.append(
                Junction(
                    id=j,
                    lanes=tuple(order),
                    phases=PhaseMatrix(entries=tuple(entries)),
                    clearance_time=clearance_time,
                    name=f"J{r}_{c}",
                )
            )
    return Network(lanes=tuple(lanes), junctions=tuple(junctions))


def derive_routing(network: Network, turns: TurnSpec) -> RoutingMatrix:
    """Compile turning probabilities and lane choice into a routing matrix.

    Lanes must carry grid names ``J{r}_{c}:{approach}:{queue}``. Flow
    leaving the grid is the row deficit.
    """
    index: Dict[Tuple[int, int, str, str], int] = {}
    for lane in network.lanes:
        match = LANE_NAME.match(lane.name)
        if match is None:
            raise ConfigurationError(f"lane {lane.id} ({lane.name!r}) is not a grid lane")
        r, c, approach, queue = match.groups()
        index[(int(r), int(c), approach, queue)] = lane.id
    junctions = {(r, c) for r, c, _, _ in index}

    rows: Dict[int, Dict[int, float]] = {}
    for (r, c, approach, queue), lane_id in sorted(index.items(), key=lambda item: item[1]):
        n_road = 2 if (r, c, approach, "T") in index else 1
        row: Dict[int, float] = {}
        for movement, fraction in movement_mix(turns, queue, n_road).items():
            if fraction <= 0:
                continue
            heading = turn(HEADING[approach], movement)
            target = (r + heading[0], c + heading[1])
            if target not in junctions:
                continue
            arrive = ARRIVES_ON[heading]
            target_road = 2 if (*target, arrive, "T") in index else 1
            for dest_queue, share in lane_choice(turns, target_road).items():
                key = (*target, arrive, dest_queue)
                if key not in index:
                    raise ConfigurationError(
                        f"lane {lane_id}: movement {movement} has no lane {dest_queue} at J{target[0]}_{target[1]}"
                    )
                if share > 0:
                    row[index[key]] = row.get(index[key], 0.0) + fraction * share
        if row:
            rows[lane_id] = row
    return RoutingMatrix.from_rows(network.n_lanes, rows)


def build_manhattan(
    rows: int,
    cols: int,
    delta: float,
    turn_spec: TurnSpec = DEFAULT_TURNS,
    *,
    controller: Optional[ControllerConfig] = None,
    controller_turn_spec: Optional[TurnSpec] = None,
    mode: str = "fluid",
    generation_horizon: Optional[float] = 3600.0,
    horizon: Optional[float] = None,
    clearance_time: float = 5.0,
    capacity: bool = False,
    service: Optional[ServiceModel] = None,
    name: Optional[str] = None,
) -> Scenario:
    """Grid of signalized junctions with alternating one- and two-lane streets.

    Every approach has a left-turn pocket and one (one-lane street) or two
    (two-lane street) through queues; boundary approaches receive demand
    ``delta`` per road lane and second. Sensor caps and lane capacities
    are counted in vehicles of ``service.vehicle_length_equiv`` meters.
    """
    if rows < 2 or cols < 2:
        raise ConfigurationError(f"grid needs at least 2x2 junctions, got {rows}x{cols}")
    if not 0 <= delta <= 1:
        raise ConfigurationError(f"delta must lie in [0, 1], got {delta}")
    if controller is None:
        controller = ControllerConfig(variant="gpa-full", gpa=GpaParams(kappa=10.0))
    believed = controller_turn_spec or turn_spec
    if service is None:
        service = ServiceModel(discipline="phased")

    network = _grid_network(rows, cols, delta, turn_spec, clearance_time, capacity, service.vehicle_length_equiv)
    routing = derive_routing(network, turn_spec)
    controller_routing = routing if believed == turn_spec else derive_routing(network, believed)
    scenario = Scenario(
        name=name or f"manhattan-{rows}x{cols}-d{delta:g}",
        mode=mode,
        network=network,
        routing=routing,
        controller_routing=controller_routing,
        demand=DemandModel(
            mode="bernoulli" if mode == "stochastic" else "fluid",
            generation_horizon=generation_horizon,
            delta=delta,
        ),
        service=service,
        controller=controller,
        horizon=horizon,
        metadata={
            "generator": "manhattan",
            "rows": rows,
            "cols": cols,
            "delta": delta,
            "turns": [turn_spec.p_left, turn_spec.p_straight, turn_spec.p_right],
            "controller_turns": [believed.p_left, believed.p_straight, believed.p_right],
            "capacity": capacity,
        },
    )
    logger.debug("manhattan_built", rows=rows, cols=cols, lanes=network.n_lanes)
    return scenario


def build_isolated_junction(
    lam: float,
    kappa: float,
    T_w: float = 1.0,
    w_bar: float = 0.0,
    A: float = 1.0,
    *,
    horizon: float = 1000.0,
    name: Optional[str] = None,
) -> Scenario:
    """Two unit-capacity lanes, one phase each, fluid arrivals ``lam`` on both.

    Starts from x = (A, 0) under GPA with shorted cycles and averaged
    service. Demand never stops, so ``horizon`` bounds the run.
    """
    network = Network(
        lanes=(
            Lane(id=0, junction=0, arrival_rate=lam, name="J0:1"),
            Lane(id=1, junction=0, arrival_rate=lam, name="J0:2"),
        ),
        junctions=(
            Junction(id=0, lanes=(0, 1), phases=PhaseMatrix(entries=((1, 0), (0, 1))), clearance_time=T_w, name="J0"),
        ),
    )
    routing = RoutingMatrix(n_lanes=2)
    return Scenario(
        name=name or f"isolated-l{lam:g}-k{kappa:g}-w{w_bar:g}",
        mode="fluid",
        network=network,
        routing=routing,
        controller_routing=routing,
        demand=DemandModel(mode="fluid", generation_horizon=None),
        service=ServiceModel(saturation_rate=1.0, discipline="averaged"),
        controller=ControllerConfig(variant="gpa-shorted", gpa=GpaParams(kappa=kappa, w_bar=w_bar)),
        horizon=horizon,
        initial_queues=(A, 0.0),
        metadata={"generator": "isolated", "lambda": lam, "kappa": kappa, "T_w": T_w, "w_bar": w_bar, "A": A},
    )


# -- validation ---------------------------------------------------------------


def _controller_report(label: str, junction: Junction, config: ControllerConfig) -> List[str]:
    report = [f"junction {label}: {config.variant} controller is missing {name}" for name in config.missing_fields()]
    if report:
        return report
    if config.variant == "fixed-time" and len(config.ft_durations) != junction.n_phases:
        report.append(
            f"junction {label}: {len(config.ft_durations)} fixed-time durations for {junction.n_phases} phases"
        )
    if config.variant == "prop-fair" and config.pf_cycle <= junction.n_phases * junction.clearance_time:
        report.append(f"junction {label}: pf_cycle {config.pf_cycle:g} must exceed n_p * T_w")
    return report


def validate_scenario(scenario: Scenario) -> List[str]:
    """Semantic checks beyond the field-level schema; empty means valid."""
    network = scenario.network
    report = validate_network(network, scenario.routing)
    report.extend(f"controller routing: {msg}" for msg in validate_routing(scenario.controller_routing, network.n_lanes))

    ids = {j.id for j in network.junctions}
    for j in sorted(scenario.controller_overrides):
        if j not in ids:
            report.append(f"controller override for unknown junction {j}")
    for junction in network.junctions:
        report.extend(_controller_report(junction.name or str(junction.id), junction, scenario.controller_for(junction.id)))

    expected_demand = "bernoulli" if scenario.mode == "stochastic" else "fluid"
    if scenario.demand.mode != expected_demand:
        report.append(f"{scenario.mode} runs need {expected_demand} demand, got {scenario.demand.mode}")
    if scenario.mode == "stochastic":
        for lane in network.lanes:
            if lane.arrival_rate > 1:
                report.append(f"lane {lane.id}: Bernoulli arrival rate {lane.arrival_rate:g} exceeds 1")
    if scenario.demand.generation_horizon is None and scenario.horizon is None:
        report.append("unbounded demand needs an explicit horizon")

    if scenario.initial_queues is not None:
        if len(scenario.initial_queues) != network.n_lanes:
            report.append(
                f"initial_queues has {len(scenario.initial_queues)} entries for {network.n_lanes} lanes"
            )
        if any(q < 0 for q in scenario.initial_queues):
            report.append("initial queues must be >= 0")
        if scenario.mode == "stochastic" and any(q != int(q) for q in scenario.initial_queues):
            report.append("stochastic initial queues must be whole vehicles")
    return report


def check_scenario(scenario: Scenario) -> Scenario:
    report = validate_scenario(scenario)
    if report:
        raise ScenarioValidationError(report)
    return scenario


# -- file format --------------------------------------------------------------


def header() -> str:
    return f"{HEADER_PREFIX}{settings.SCENARIO_FORMAT_VERSION}"


def serialize_scenario(scenario: Scenario) -> str:
    """Canonical text form: header line, then indented JSON with sorted keys."""
    body = json.dumps(scenario.model_dump(mode="json"), indent=2, sort_keys=True, allow_nan=False)
    return f"{header()}\n{body}\n"


def scenario_digest(scenario: Scenario) -> str:
    return hashlib.sha256(serialize_scenario(scenario).encode("utf-8")).hexdigest()


def _format_loc(loc: Tuple[Any, ...]) -> str:
    return ".".join(str(part) for part in loc) or "<root>"


def parse_scenario(text: str) -> Scenario:
    """Parse and fully validate scenario text; unknown keys are errors."""
    first, _, body = text.partition("\n")
    first = first.rstrip("\r")
    if not first.startswith(HEADER_PREFIX):
        raise ScenarioParseError(f"missing scenario header {header()!r}", line=1, column=1)
    version = first[len(HEADER_PREFIX):]
    if version != str(settings.SCENARIO_FORMAT_VERSION):
        raise ScenarioParseError(f"unsupported scenario format version {version!r}", line=1, column=len(HEADER_PREFIX) + 1)

    try:
        data = json.loads(body)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(exc.msg, line=exc.lineno + 1, column=exc.colno) from exc
    if not isinstance(data, dict):
        raise ScenarioParseError("scenario body must be a JSON object", line=2, column=1)

    try:
        scenario = Scenario.model_validate(data)
    except ValidationError as exc:
        raise ScenarioValidationError(
            [f"{_format_loc(err['loc'])}: {err['msg']}" for err in exc.errors()]
        ) from exc
    return check_scenario(scenario)


def load_scenario(path: Union[str, Path]) -> Scenario:
    scenario = parse_scenario(Path(path).read_text(encoding="utf-8"))
    logger.debug("scenario_loaded", path=str(path), name=scenario.name)
    return scenario


def save_scenario(scenario: Scenario, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(serialize_scenario(scenario), encoding="utf-8")
    return path


# -- sweep parameters ---------------------------------------------------------

SWEEP_PARAMS = ("kappa", "w_bar", "d", "pf_cycle", "min_green", "delta", "horizon", "wrong_tr")


def _update_controllers(scenario: Scenario, name: str, update) -> Scenario:
    configs = [scenario.controller, *scenario.controller_overrides.values()]
    if not any(update(config) is not config for config in configs):
        raise ConfigurationError(f"parameter {name} does not apply to controller {scenario.controller.variant}")
    return scenario.model_copy(
        update={
            "controller": update(scenario.controller),
            "controller_overrides": {j: update(c) for j, c in scenario.controller_overrides.items()},
        }
    )


def _gpa_update(name: str, value: float):
    def update(config: ControllerConfig) -> ControllerConfig:
        if config.variant not in GPA_VARIANTS:
            return config
        gpa = config.gpa.model_dump() if config.gpa else {"kappa": 10.0}
        gpa[name] = value
        return config.model_copy(update={"gpa": GpaParams(**gpa)})

    return update


def _field_update(variant: Optional[str], field: str, value: float):
    def update(config: ControllerConfig) -> ControllerConfig:
        if variant is not None and config.variant != variant:
            return config
        return ControllerConfig(**{**config.model_dump(), field: value})

    return update


def apply_param(scenario: Scenario, name: str, value: float) -> Scenario:
    """Return a copy of ``scenario`` with one sweep parameter set."""
    if name in ("kappa", "w_bar"):
        return _update_controllers(scenario, name, _gpa_update(name, float(value)))
    if name == "d":
        return _update_controllers(scenario, name, _field_update("max-pressure", "mp_duration", float(value)))
    if name == "pf_cycle":
        return _update_controllers(scenario, name, _field_update("prop-fair", "pf_cycle", float(value)))
    if name == "min_green":
        return _update_controllers(scenario, name, _field_update(None, "min_green", float(value)))
    if name == "horizon":
        return scenario.model_copy(update={"horizon": float(value)})
    if name == "delta":
        return _rescale_demand(scenario, float(value))
    if name == "wrong_tr":
        if value:
            believed = derive_routing(scenario.network, WRONG_TURNS)
        else:
            believed = scenario.routing
        return scenario.model_copy(update={"controller_routing": believed})
    raise ConfigurationError(f"unknown parameter {name!r}; expected one of {', '.join(SWEEP_PARAMS)}")


def _rescale_demand(scenario: Scenario, delta: float) -> Scenario:
    current = scenario.demand.delta
    if current is None or current <= 0:
        raise ConfigurationError("delta sweeps need a scenario generated with a positive delta")
    if delta < 0:
        raise ConfigurationError(f"delta must be >= 0, got {delta}")
    factor = delta / current
    lanes = tuple(lane.model_copy(update={"arrival_rate": lane.arrival_rate * factor}) for lane in scenario.network.lanes)
    network = scenario.network.model_copy(update={"lanes": lanes})
    demand = scenario.demand.model_copy(update={"delta": delta})
    metadata = {**scenario.metadata, "delta": delta}
    return scenario.model_copy(update={"network": network, "demand": demand, "metadata": metadata})
