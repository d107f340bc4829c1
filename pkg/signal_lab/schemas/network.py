"""
Pydantic schemas for the static plant: lanes, phases, junctions, routing,
and the signal programs controllers emit.
"""

from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from signal_lab.core.exceptions import InvalidProgramError


class Lane(BaseModel):
    """An incoming lane on which vehicles queue up."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    id: int = Field(ge=0)
    junction: Optional[int] = None
    sensor_cap: Optional[float] = Field(default=None, ge=0)
    capacity: Optional[float] = Field(default=None, ge=0)
    arrival_rate: float = Field(default=0.0, ge=0)
    name: str = ""


class PhaseMatrix(BaseModel):
    """Binary phase matrix: rows are phases, columns the junction's lanes."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    entries: Tuple[Tuple[int, ...], ...]

    @property
    def n_phases(self) -> int:
        return len(self.entries)

    @property
    def n_lanes(self) -> int:
        return len(self.entries[0]) if self.entries else 0

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.entries, dtype=float).reshape(self.n_phases, self.n_lanes)

    @property
    def is_orthogonal(self) -> bool:
        if not self.entries:
            return False
        return bool(np.all(self.array.sum(axis=0) == 1))

    def phase_members(self, i: int) -> List[int]:
        """Column positions of the lanes belonging to phase ``i``."""
        return [k for k, v in enumerate(self.entries[i]) if v]


class Junction(BaseModel):
    """A signalized junction with its ordered incoming lanes and phases."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    id: int = Field(ge=0)
    lanes: Tuple[int, ...]
    phases: PhaseMatrix
    clearance_time: float
    name: str = ""

    @property
    def n_phases(self) -> int:
        return self.phases.n_phases


class RoutingMatrix(BaseModel):
    """Sparse turning-ratio matrix over all lanes.

    ``entries`` holds ``(from_lane, to_lane, fraction)`` triples; the row
    deficit of a lane is the fraction of its outflow leaving the network.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    n_lanes: int = Field(ge=0)
    entries: Tuple[Tuple[int, int, float], ...] = ()

    @classmethod
    def from_rows(cls, n_lanes: int, rows: Dict[int, Dict[int, float]]) -> "RoutingMatrix":
        entries = tuple(
            (l, k, float(p))
            for l in sorted(rows)
            for k, p in sorted(rows[l].items())
            if p > 0
        )
        return cls(n_lanes=n_lanes, entries=entries)

    def dense(self) -> np.ndarray:
        matrix = np.zeros((self.n_lanes, self.n_lanes))
        for l, k, p in self.entries:
            matrix[l, k] += p
        return matrix

    def rows(self) -> Dict[int, Dict[int, float]]:
        out: Dict[int, Dict[int, float]] = {}
        for l, k, p in self.entries:
            row = out.setdefault(l, {})
            row[k] = row.get(k, 0.0) + p
        return out

    def row(self, lane: int) -> Dict[int, float]:
        return {k: p for l, k, p in self.entries if l == lane}


class Network(BaseModel):
    """The static plant: every lane and every signalized junction."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    lanes: Tuple[Lane, ...]
    junctions: Tuple[Junction, ...]

    @property
    def n_lanes(self) -> int:
        return len(self.lanes)

    def lane_names(self) -> Dict[str, int]:
        return {lane.name: lane.id for lane in self.lanes if lane.name}


class PhaseRef(BaseModel):
    """Either phase ``index`` or its paired clearance phase."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    index: int = Field(ge=0)
    clearance: bool = False

    def __str__(self) -> str:
        suffix = "'" if self.clearance else ""
        return f"p{self.index + 1}{suffix}"


class ProgramEntry(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    phase: PhaseRef
    t_end: float


class SignalProgram(BaseModel):
    """Ordered ``(phase, t_end)`` schedule for one junction.

    Construction rejects decreasing end-times, phase entries that are not
    immediately followed by their own clearance entry, and paired
    clearance entries whose duration differs from ``clearance_time``.
    A clearance entry without its phase is only allowed as the sole entry.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    t_start: float = 0.0
    entries: Tuple[ProgramEntry, ...] = ()
    clearance_time: Optional[float] = None

    @model_validator(mode="after")
    def check_entries(self) -> "SignalProgram":
        prev_end = self.t_start
        n = len(self.entries)
        for k, entry in enumerate(self.entries):
            tol = 1e-9 * max(1.0, abs(entry.t_end))
            if entry.t_end < prev_end - tol:
                raise InvalidProgramError(
                    f"entry {k} ends at {entry.t_end} before its predecessor ({prev_end})"
                )
            if entry.phase.clearance:
                paired = k > 0 and self.entries[k - 1].phase == PhaseRef(index=entry.phase.index)
                if paired:
                    if self.clearance_time is not None and abs(
                        (entry.t_end - prev_end) - self.clearance_time
                    ) > tol:
                        raise InvalidProgramError(
                            f"clearance entry {k} lasts {entry.t_end - prev_end}, "
                            f"expected {self.clearance_time}"
                        )
                elif n != 1:
                    raise InvalidProgramError(f"clearance entry {k} does not follow its phase")
                if entry.t_end <= prev_end:
                    raise InvalidProgramError(f"clearance entry {k} has zero duration")
            else:
                following = self.entries[k + 1] if k + 1 < n else None
                if following is None or following.phase != PhaseRef(
                    index=entry.phase.index, clearance=True
                ):
                    raise InvalidProgramError(
                        f"phase entry {k} ({entry.phase}) is not followed by its clearance"
                    )
            prev_end = entry.t_end
        return self

    @property
    def t_ends(self) -> List[float]:
        return [entry.t_end for entry in self.entries]

    @property
    def span(self) -> float:
        return (self.entries[-1].t_end - self.t_start) if self.entries else 0.0
