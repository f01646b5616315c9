"""Domain exceptions shared across the planning stack."""


class StepnavError(Exception):
    """Base class for all planning-stack errors."""


class NegativeRadicand(StepnavError):
    """An orbit query asked for a state the trajectory never reaches."""


class DegenerateStep(StepnavError):
    """Current and next foot placements coincide; no switching state exists."""


class InfeasiblePlan(StepnavError):
    """Forward/backward phase-space orbits do not intersect between the apexes."""


class NoConvergence(StepnavError):
    """Iterative search exhausted its iteration budget."""


class EmptyInterval(StepnavError):
    """A velocity-bound interval came out inverted (upper < lower)."""


class EmptyLibrary(StepnavError):
    """No turning sequence could be certified for the given scenario parameters."""


class EmptyRegion(StepnavError):
    """Backward synthesis grew nothing beyond an isolated target."""


class GridMismatch(StepnavError):
    """Two region maps do not share a grid specification."""


class InfeasibleRecovery(StepnavError):
    """Disturbed switch velocity too low to decelerate to the requested apex."""


class InconsistentObservation(StepnavError):
    """An obstacle was observed where the tracked belief says it cannot be."""


class OffStrategy(StepnavError):
    """Environment observation outside the moves modeled in the game."""


class ParseError(StepnavError):
    """Scenario file is not valid JSON or misses required structure."""


class ValidationError(StepnavError):
    """Scenario parsed but failed cross-field validation."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class EpisodeAborted(StepnavError):
    """Episode halted before its step budget; carries the reason."""

    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(reason)
