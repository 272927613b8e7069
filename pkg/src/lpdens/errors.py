"""Exception types raised by the estimation pipeline."""


class LPDensError(Exception):
    """Base class for library errors."""


class QuadratureFailure(LPDensError):
    """Adaptive quadrature could not reach the requested tolerance."""


class SingularGram(LPDensError):
    """Gram matrix is numerically singular for the requested parameter."""


class NonConvergence(LPDensError):
    """Iterative eigenvalue solver did not converge."""


class EmptyGrid(LPDensError):
    """No bandwidth level qualifies for the selection grid."""


class EnvelopeFailure(LPDensError):
    """Rejection sampler acceptance rate is too low to be usable."""


class DegenerateHull(LPDensError):
    """Points are collinear, so their convex hull has empty interior."""
