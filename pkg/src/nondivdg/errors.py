"""Exception types raised by the solver pipeline."""


class ConfigurationError(ValueError):
    """Invalid user-supplied configuration (degree, quadrature order, missing data)."""


class InvalidCoefficientError(ValueError):
    """Coefficient matrix with nonpositive trace or lost ellipticity."""


class CordesError(ValueError):
    """The coefficient field violates the Cordes condition at some sample point.

    The offending :class:`~nondivdg.coefficients.CordesReport` is attached as
    ``report``.
    """

    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


class GeometryError(ValueError):
    """Degenerate geometry: singular Jacobian, vanishing level-set gradient,
    nonpositive curvature on a curved portion."""


class ResolutionError(ValueError):
    """Mesh size too coarse to resolve a boundary portion."""


class SnapError(GeometryError):
    """Boundary snapping produced an element map with C_K >= 1."""

    def __init__(self, message, element):
        super().__init__(message)
        self.element = element


class SolverError(RuntimeError):
    """Sparse factorisation failed or the residual check did not pass."""
