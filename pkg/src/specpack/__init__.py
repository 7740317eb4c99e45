"""Ball packings, plateau test functions and explicit upper bounds for
Neumann eigenvalues on finite metric measure spaces."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConstructionError,
    ConvergenceError,
    DomainError,
    HypothesisError,
    InvariantError,
    ParseError,
    PreconditionError,
    SpecpackError,
    ValidationError,
)
from .mmspace import MetricMeasureSpace, PointSet, scale_space  # noqa: E402
from .geometry import GeometryConstants, theorem2_constants  # noqa: E402
from .packing import CoverageMaximizer, PackingFamily, corollary1_family, lemma1_construct, xi  # noqa: E402
from .rayleigh import PlateauFunction, plateau, theorem2_pipeline  # noqa: E402
from .spectrum import SpectrumResult, space_spectrum  # noqa: E402

__all__ = [
    "__version__",
    "ConstructionError", "ConvergenceError", "DomainError", "HypothesisError", "InvariantError",
    "ParseError", "PreconditionError", "SpecpackError", "ValidationError",
    "MetricMeasureSpace", "PointSet", "scale_space",
    "GeometryConstants", "theorem2_constants",
    "CoverageMaximizer", "PackingFamily", "corollary1_family", "lemma1_construct", "xi",
    "PlateauFunction", "plateau", "theorem2_pipeline",
    "SpectrumResult", "space_spectrum",
]
