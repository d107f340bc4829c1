"""
Pydantic schemas for controller configuration and measurements.
"""

from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator

from signal_lab.schemas.allocation import GpaParams

ControllerVariant = Literal["gpa-full", "gpa-shorted", "max-pressure", "fixed-time", "prop-fair"]

GPA_VARIANTS = ("gpa-full", "gpa-shorted")


class ControllerConfig(BaseModel):
    """Which controller runs a junction, and its tuning parameters.

    Only the fields of the chosen variant are used; ``required_fields``
    lists the ones that must be present.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    variant: ControllerVariant
    gpa: Optional[GpaParams] = None
    mp_duration: Optional[float] = Field(default=None, gt=0)
    ft_durations: Optional[Tuple[float, ...]] = None
    pf_cycle: Optional[float] = Field(default=None, gt=0)
    min_green: float = Field(default=0.0, ge=0)

    @field_validator("ft_durations")
    @classmethod
    def nonnegative_durations(cls, v: Optional[Tuple[float, ...]]) -> Optional[Tuple[float, ...]]:
        if v is not None and any(d < 0 for d in v):
            raise ValueError("fixed-time durations must be >= 0")
        return v

    def required_fields(self) -> List[str]:
        return {
            "gpa-full": ["gpa"],
            "gpa-shorted": ["gpa"],
            "max-pressure": ["mp_duration"],
            "fixed-time": ["ft_durations"],
            "prop-fair": ["pf_cycle"],
        }[self.variant]

    def missing_fields(self) -> List[str]:
        return [name for name in self.required_fields() if getattr(self, name) is None]

    def describe(self) -> str:
        """Compact ``key=value`` rendering of the variant's parameters."""
        if self.variant in GPA_VARIANTS and self.gpa is not None:
            parts = [f"kappa={self.gpa.kappa:g}", f"w_bar={self.gpa.w_bar:g}"]
        elif self.variant == "max-pressure" and self.mp_duration is not None:
            parts = [f"d={self.mp_duration:g}"]
        elif self.variant == "fixed-time" and self.ft_durations is not None:
            parts = ["durations=" + "/".join(f"{d:g}" for d in self.ft_durations)]
        elif self.variant == "prop-fair" and self.pf_cycle is not None:
            parts = [f"cycle={self.pf_cycle:g}"]
        else:
            parts = []
        if self.min_green > 0:
            parts.append(f"min_green={self.min_green:g}")
        return ";".join(parts)


class Measurement(BaseModel):
    """Sensor-saturated queues a controller sees at time ``t``.

    ``x_hat`` follows the junction's lane order; ``downstream_x_hat`` maps
    lane ids one hop downstream to their measured queue (MaxPressure only).
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    junction: int
    x_hat: Tuple[float, ...]
    downstream_x_hat: Dict[int, float] = Field(default_factory=dict)
    t: float

    @field_validator("x_hat")
    @classmethod
    def nonnegative_queues(cls, v: Tuple[float, ...]) -> Tuple[float, ...]:
        if any(q < 0 for q in v):
            raise ValueError("measured queues must be >= 0")
        return v
