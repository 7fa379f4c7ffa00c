"""Exception types shared across the package."""


class NutaxisError(Exception):
    pass


class NonFiniteField(NutaxisError, ValueError):
    pass


class NegativeField(NutaxisError, ValueError):
    pass


class NonpositiveField(NutaxisError, ValueError):
    """A field that enters a singular weight (1/v^b) has a nonpositive cell."""


class PositivityViolation(NutaxisError):
    """u < 0 or v <= 0 somewhere; carries the offending cell."""

    def __init__(self, message, field=None, index=None, value=None):
        super().__init__(message)
        self.field = field
        self.index = index
        self.value = value


class NonFinite(NutaxisError):
    pass


class StepCollapse(NutaxisError):
    """The stability budget fell below dt_min."""

    def __init__(self, message, dt=None):
        super().__init__(message)
        self.dt = dt


class RangeError(NutaxisError, ValueError):
    """A time series does not cover the requested interval."""


class DegenerateSample(NutaxisError, ValueError):
    pass


class BadScenario(NutaxisError, ValueError):
    pass
