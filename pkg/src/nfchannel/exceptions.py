"""Exception types raised by nfchannel."""


class InvalidArgumentError(ValueError):
    """An argument violates a documented precondition."""


class DegenerateGeometryError(ValueError):
    """A receive point coincides with a scatterer centre (A(r) <= 0)."""


class NotPSDError(ValueError):
    """A correlation matrix is indefinite beyond the regularization floor."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance.

    The achieved error estimate is kept on ``achieved``.
    """

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class ConfigError(ValueError):
    """A scene or run configuration is invalid."""
