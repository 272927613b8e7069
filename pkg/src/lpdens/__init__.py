"""Adaptive local polynomial density estimation on known domains."""

__version__ = "0.1.0"

from lpdens.domain import (AxisBox, ConvexPolygon2D, EstimationContext, Implicit, PolySector,  # noqa: E402
                           RasterDomain)
from lpdens.errors import (DegenerateHull, EmptyGrid, EnvelopeFailure, LPDensError, NonConvergence,  # noqa: E402
                           QuadratureFailure, SingularGram)
from lpdens.gram import Gamma, build_gram  # noqa: E402
from lpdens.estimator import estimate_at  # noqa: E402
from lpdens.selection import SelectionConfig, select  # noqa: E402

__all__ = [
    "AxisBox", "ConvexPolygon2D", "DegenerateHull", "EmptyGrid", "EnvelopeFailure", "EstimationContext", "Gamma",
    "Implicit", "LPDensError", "NonConvergence", "PolySector", "QuadratureFailure", "RasterDomain",
    "SelectionConfig", "SingularGram", "build_gram", "estimate_at", "select",
]
