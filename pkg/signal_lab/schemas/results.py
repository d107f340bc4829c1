"""
Pydantic schemas for run results and summary rows.
"""

from typing import Dict, List, Tuple

from pydantic import BaseModel, ConfigDict


class CycleRecord(BaseModel):
    """One controller invocation: when its program started and how long it spans."""
    model_config = ConfigDict(frozen=True)

    junction: int
    t_start: float
    length: float
    local_queue_max: float


class RunResult(BaseModel):
    """Time series and summary of one simulated run."""
    model_config = ConfigDict(frozen=True)

    scenario_name: str
    scenario_hash: str
    seed: int
    controller: str
    params: str
    queue_series: List[Tuple[float, float]]
    ttt_hours: float
    infinite: bool
    blocked_events: int
    generated: float
    exited: float
    in_network: float
    t_end: float
    mean_cycle_s: Dict[int, float]
    cycles: List[CycleRecord]

    @property
    def overall_mean_cycle(self) -> float:
        lengths = [c.length for c in self.cycles]
        return sum(lengths) / len(lengths) if lengths else 0.0


class SummaryRow(BaseModel):
    """One line of summary.csv."""
    model_config = ConfigDict(frozen=True)

    controller: str
    params: str
    seed: int
    ttt_hours: float
    infinite: bool
    blocked_events: int
    mean_cycle_s: float

    @classmethod
    def from_result(cls, result: RunResult) -> "SummaryRow":
        return cls(
            controller=result.controller,
            params=result.params,
            seed=result.seed,
            ttt_hours=result.ttt_hours,
            infinite=result.infinite,
            blocked_events=result.blocked_events,
            mean_cycle_s=result.overall_mean_cycle,
        )
