"""
Pydantic schemas for the GPA allocation problem.
"""

import math
from typing import Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator


class GpaParams(BaseModel):
    """Tuning parameters: clearance weight ``kappa`` and clearance floor ``w_bar``."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    kappa: float = Field(gt=0)
    w_bar: float = Field(default=0.0, ge=0, lt=1)


class Allocation(BaseModel):
    """Phase fractions ``nu`` and clearance fraction ``w`` of one cycle."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    nu: Tuple[float, ...]
    w: float = Field(ge=0)

    @model_validator(mode="after")
    def check_simplex(self) -> "Allocation":
        if any(v < 0 for v in self.nu):
            raise ValueError(f"negative phase fraction in {self.nu}")
        total = math.fsum(self.nu) + self.w
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"fractions sum to {total}, expected 1")
        return self
