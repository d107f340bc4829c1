"""
Error hierarchy for Signal Lab.
"""

from typing import Any, List, Optional


class SignalLabError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(SignalLabError):
    """Invalid controller, demand or run configuration."""


class ScenarioParseError(SignalLabError):
    """Scenario text could not be parsed."""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{where}")


class ScenarioValidationError(SignalLabError):
    """Scenario parsed but violates semantic invariants."""

    def __init__(self, report: List[str]):
        self.report = list(report)
        super().__init__("; ".join(self.report))


class DimensionMismatchError(SignalLabError):
    """Vector and matrix shapes disagree."""


class EmptyProgramError(SignalLabError):
    """Operation needs a signal program with at least one entry."""


class ProgramExpiredError(SignalLabError):
    """Queried time lies at or beyond the end of the signal program."""

    def __init__(self, t: float, end: float):
        self.t = t
        self.end = end
        super().__init__(f"program expired: t={t} >= end={end}")


class InvalidProgramError(SignalLabError):
    """Signal program entries violate ordering or clearance pairing."""


class SolverConvergenceError(SignalLabError):
    """Iterative allocation solver hit its iteration limit."""

    def __init__(self, message: str, best: Any = None, gap: float = float("inf")):
        self.best = best
        self.gap = gap
        super().__init__(f"{message} (gap estimate {gap:.3e})")


class GridTooLargeError(SignalLabError):
    """Brute-force grid would exceed the enumeration budget."""


class InfiniteCycleError(SignalLabError):
    """Clearance fraction w is zero, so the cycle would be unbounded."""


class MissingRoutingError(SignalLabError):
    """Routing data needed for a pressure computation is absent."""


class ControllerError(SignalLabError):
    """A junction controller failed during simulation."""

    def __init__(self, junction: int, t: float, cause: Exception):
        self.junction = junction
        self.t = t
        self.cause = cause
        super().__init__(f"controller for junction {junction} failed at t={t}: {cause}")


class UsageError(SignalLabError):
    """Command-line arguments are inconsistent."""
