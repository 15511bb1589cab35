"""Exception types shared across the package."""


class QArrivalError(Exception):
    """Base class for all package errors."""


class InvalidSpec(QArrivalError):
    """A parameter object violates its sign or range constraints."""


class GridMismatch(QArrivalError):
    """Two states do not live on the same grid, representation, or timestamp."""


class SpillError(QArrivalError):
    """Amplitude at a grid edge exceeded the spill threshold (spectral wraparound risk)."""


class StepError(QArrivalError):
    """Requested evolution span is not an integer number of time steps."""


class PositiveMomentumError(QArrivalError):
    """State carries non-negligible positive-momentum content."""


class ZeroTime(QArrivalError):
    """Propagator evaluated at non-positive elapsed time."""


class ZeroMomentum(QArrivalError):
    """Scattering amplitude evaluated at p = 0."""


class RegimeError(QArrivalError):
    """Inputs are outside the asymptotic regime the formula is valid in."""


class ConsistencyError(QArrivalError):
    """Two independent computations of the same quantity disagree beyond tolerance."""


class ParseError(QArrivalError):
    """Scenario configuration text could not be parsed."""


class ValidationError(QArrivalError):
    """Scenario configuration violates one or more invariants.

    Carries the full list of violations so a bad config is reported in one shot.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid configuration: " + "; ".join(self.violations))
