"""Second-order variational analysis of compositions g(Phi(x)) with polyhedral g."""

__version__ = "0.1.0"

from .config import (  # noqa: E402
    DEFAULT_TOL,
    ConsistencyError,
    DDBoundError,
    DimensionError,
    LPError,
    PreconditionError,
    SolveError,
    Tolerances,
    VarpolyError,
)
from .polyhedral import ConeRep, LinSubspace, PolyhedralFunction, PolytopeRep  # noqa: E402
from .smooth import CompositeProblem, PolyMap  # noqa: E402

__all__ = [
    "DEFAULT_TOL",
    "CompositeProblem",
    "ConeRep",
    "ConsistencyError",
    "DDBoundError",
    "DimensionError",
    "LPError",
    "LinSubspace",
    "PolyMap",
    "PolyhedralFunction",
    "PolytopeRep",
    "PreconditionError",
    "SolveError",
    "Tolerances",
    "VarpolyError",
]
