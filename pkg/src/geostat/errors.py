"""Exception hierarchy shared by every geostat module."""


class GeostatError(Exception):
    """Base class for all errors raised by geostat."""


class SingularMetric(GeostatError, ValueError):
    pass


class BoundaryProximity(GeostatError, ValueError):
    pass


class DimensionMismatch(GeostatError, ValueError):
    pass


class OutOfDomain(GeostatError, ValueError):
    pass


class NotApplicable(GeostatError, ValueError):
    pass


class InadmissibleConstants(GeostatError, ValueError):
    pass


class QuadratureMismatch(GeostatError, ValueError):
    pass


class NonFiniteValue(GeostatError, ArithmeticError):
    pass


class GradientUnavailable(GeostatError):
    pass


class InvalidInitialState(GeostatError, ValueError):
    pass


class DriftExceeded(GeostatError, RuntimeError):
    """Conserved quantities wandered beyond the configured tolerance.

    The offending trajectory is kept on ``self.trajectory`` so callers can
    inspect where the drift happened.
    """

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class Unclassifiable(GeostatError):
    pass


class ConfigError(GeostatError, ValueError):
    pass
