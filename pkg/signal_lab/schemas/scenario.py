"""
Pydantic schemas for reproducible experiments.
"""

import math
from typing import Any, Dict, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from signal_lab.schemas.controller import ControllerConfig
from signal_lab.schemas.network import Network, RoutingMatrix


class TurnSpec(BaseModel):
    """Turning probabilities applied at every junction."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    p_left: float = Field(default=0.2, ge=0)
    p_straight: float = Field(default=0.6, ge=0)
    p_right: float = Field(default=0.2, ge=0)

    @model_validator(mode="after")
    def check_total(self) -> "TurnSpec":
        total = self.p_left + self.p_straight + self.p_right
        if not math.isclose(total, 1.0, abs_tol=1e-9):
            raise ValueError(f"turning probabilities sum to {total}, expected 1")
        return self


DEFAULT_TURNS = TurnSpec()
WRONG_TURNS = TurnSpec(p_left=0.1, p_straight=0.3, p_right=0.6)


class DemandModel(BaseModel):
    """Exogenous demand: Bernoulli departures or deterministic fluid inflow.

    Per-lane rates live on ``Lane.arrival_rate``; ``delta`` records the
    nominal boundary departure probability they were generated from.
    A ``generation_horizon`` of None means demand never stops.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    mode: Literal["bernoulli", "fluid"] = "fluid"
    generation_horizon: Optional[float] = Field(default=3600.0, ge=0)
    delta: Optional[float] = Field(default=None, ge=0)


class ServiceModel(BaseModel):
    """Lane discharge model."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    saturation_rate: float = Field(default=1.0, gt=0)
    vehicle_length_equiv: float = Field(default=7.5, gt=0)
    discipline: Literal["phased", "averaged"] = "phased"


class Scenario(BaseModel):
    """Network, demand, controllers and run parameters of one experiment."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str = "scenario"
    mode: Literal["fluid", "stochastic"] = "fluid"
    network: Network
    routing: RoutingMatrix
    controller_routing: RoutingMatrix
    demand: DemandModel = DemandModel()
    service: ServiceModel = ServiceModel()
    controller: ControllerConfig
    controller_overrides: Dict[int, ControllerConfig] = Field(default_factory=dict)
    horizon: Optional[float] = Field(default=None, gt=0)
    initial_queues: Optional[Tuple[float, ...]] = None
    metadata: Dict[str, Any] = Field(default_factory=dict)

    def controller_for(self, junction_id: int) -> ControllerConfig:
        return self.controller_overrides.get(junction_id, self.controller)
