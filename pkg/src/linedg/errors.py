"""Exception types shared across the package."""


class CapabilityError(ValueError):
    """Requested feature (degree, quadrature order, ...) is not provided."""


class GeometryError(ValueError):
    """Degenerate or inconsistent geometric input."""


class AssemblyError(RuntimeError):
    """Assembly produced an unusable local or global system."""


class ConfigError(ValueError):
    """Invalid or malformed run configuration."""


class NonconvergenceError(RuntimeError):
    """Iterative solver failed to reach the requested tolerance.

    Carries the best iterate so callers can inspect or reuse it.
    """

    def __init__(self, message, best_x=None, residual=None, iterations=None):
        super().__init__(message)
        self.best_x = best_x
        self.residual = residual
        self.iterations = iterations
