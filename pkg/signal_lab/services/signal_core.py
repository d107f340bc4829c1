"""
Network validation and signal-program queries shared by the controllers
and the simulator.
"""

import bisect
from typing import List, Optional

import numpy as np

from signal_lab.core.exceptions import EmptyProgramError, ProgramExpiredError
from signal_lab.schemas.network import Junction, Network, PhaseRef, RoutingMatrix, SignalProgram

ROW_SUM_TOL = 1e-9


def validate_network(network: Network, routing: Optional[RoutingMatrix] = None) -> List[str]:
    """Return every invariant violation found; an empty list means well-formed."""
    report: List[str] = []
    n_lanes = network.n_lanes

    ids = [lane.id for lane in network.lanes]
    if ids != list(range(n_lanes)):
        report.append("lane ids must be dense 0..n-1 in order")
    junction_ids = [j.id for j in network.junctions]
    if junction_ids != list(range(len(network.junctions))):
        report.append("junction ids must be dense 0..m-1 in order")

    for lane in network.lanes:
        if (
            lane.sensor_cap is not None
            and lane.capacity is not None
            and lane.sensor_cap > lane.capacity
        ):
            report.append(f"lane {lane.id}: sensor_cap {lane.sensor_cap} exceeds capacity {lane.capacity}")

    owner = {}
    for junction in network.junctions:
        label = junction.name or str(junction.id)
        if junction.clearance_time <= 0:
            report.append(f"junction {label}: clearance time must be > 0")
        for lane_id in junction.lanes:
            if not 0 <= lane_id < n_lanes:
                report.append(f"junction {label}: unknown lane {lane_id}")
                continue
            if lane_id in owner:
                report.append(f"lane {lane_id} belongs to junctions {owner[lane_id]} and {junction.id}")
            owner[lane_id] = junction.id
            if network.lanes[lane_id].junction != junction.id:
                report.append(f"lane {lane_id} does not name junction {label} as its owner")

        phases = junction.phases
        if phases.n_phases == 0:
            report.append(f"junction {label}: no phases")
            continue
        if any(len(row) != len(junction.lanes) for row in phases.entries):
            report.append(
                f"junction {label}: phase matrix has the wrong column count "
                f"(expected {len(junction.lanes)})"
            )
            continue
        matrix = phases.array
        if not np.isin(matrix, (0.0, 1.0)).all():
            report.append(f"junction {label}: phase matrix entries must be 0 or 1")
        for col, lane_id in enumerate(junction.lanes):
            if matrix[:, col].sum() == 0:
                report.append(f"junction {label}: lane {lane_id} in no phase")
        for row in range(phases.n_phases):
            if matrix[row].sum() == 0:
                report.append(f"junction {label}: phase {row + 1} has no lanes")

    for lane in network.lanes:
        if lane.junction is not None and owner.get(lane.id) != lane.junction:
            report.append(f"lane {lane.id} names junction {lane.junction} which does not list it")

    if routing is not None:
        report.extend(validate_routing(routing, n_lanes))
    return report


def validate_routing(routing: RoutingMatrix, n_lanes: int) -> List[str]:
    report: List[str] = []
    if routing.n_lanes != n_lanes:
        report.append(f"routing covers {routing.n_lanes} lanes, network has {n_lanes}")
    sums = {}
    for l, k, p in routing.entries:
        if not (0 <= l < routing.n_lanes and 0 <= k < routing.n_lanes):
            report.append(f"routing entry ({l}, {k}) outside the lane range")
        if not 0.0 <= p <= 1.0:
            report.append(f"routing entry ({l}, {k}) = {p} outside [0, 1]")
        sums[l] = sums.get(l, 0.0) + p
    for l, total in sorted(sums.items()):
        if total > 1.0 + ROW_SUM_TOL:
            report.append(f"routing row {l}: row sum > 1 ({total:.6g})")
    return report


def program_end(program: SignalProgram) -> float:
    """End time T of the program (its largest t_end)."""
    if not program.entries:
        raise EmptyProgramError("signal program has no entries")
    return max(program.t_ends)


def active_phase(program: SignalProgram, t: float) -> PhaseRef:
    """Phase whose end-time is the smallest one strictly greater than ``t``."""
    end = program_end(program)
    if t >= end:
        raise ProgramExpiredError(t, end)
    return program.entries[bisect.bisect_right(program.t_ends, t)].phase


def green_time(
    program: SignalProgram,
    junction: Junction,
    t0: float,
    t1: float,
    matrix: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Seconds of green each junction lane receives inside ``[t0, t1)``."""
    green = np.zeros(len(junction.lanes))
    if matrix is None:
        matrix = junction.phases.array
    start = program.t_start
    for entry in program.entries:
        lo, hi = max(start, t0), min(entry.t_end, t1)
        if hi > lo and not entry.phase.clearance:
            green += (hi - lo) * matrix[entry.phase.index]
        start = entry.t_end
        if start >= t1:
            break
    return green


def green_shares(program: SignalProgram, junction: Junction) -> np.ndarray:
    """Fraction of the program span during which each lane is green."""
    span = program.span
    if span <= 0:
        return np.zeros(len(junction.lanes))
    return green_time(program, junction, program.t_start, program.t_start + span) / span
