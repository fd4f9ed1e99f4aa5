"""Tolerances and exception types shared across the package."""

from __future__ import annotations

from dataclasses import dataclass, fields, replace


@dataclass(frozen=True)
class Tolerances:
    act: float = 1e-9      # active-set equality
    ri: float = 1e-9       # epsilon-LP threshold for relative interior
    eig: float = 1e-9      # eigenvalue threshold for growth / tilt stability
    res: float = 1e-10     # residual of generalized-equation solves
    jump: float = 1e-3     # Jacobian discontinuity threshold in the prox probe
    epi: float = 1e-2      # epigraph-distance threshold
    zero: float = 1e-10    # generic zero test for normalized vectors
    rank: float = 1e-10    # relative singular-value cutoff
    dd_bound: int = 10     # largest ambient dimension accepted by double description

    def with_overrides(self, **kw) -> "Tolerances":
        names = {f.name for f in fields(self)}
        bad = set(kw) - names
        if bad:
            raise KeyError(f"unknown tolerance key(s): {sorted(bad)}")
        cast = {k: (int(v) if k == "dd_bound" else float(v)) for k, v in kw.items()}
        return replace(self, **cast)


DEFAULT_TOL = Tolerances()


class VarpolyError(Exception):
    """Base class for package errors."""


class PreconditionError(VarpolyError):
    """An operation refused because a named precondition does not hold."""

    def __init__(self, precondition: str, detail: str = ""):
        self.precondition = precondition
        msg = precondition if not detail else f"{precondition}: {detail}"
        super().__init__(msg)


class ConsistencyError(VarpolyError):
    """Two routes that must agree produced different answers."""


class DimensionError(VarpolyError, ValueError):
    pass


class DDBoundError(PreconditionError):
    def __init__(self, dim: int, bound: int):
        super().__init__("dd_dimension_bound", f"ambient dimension {dim} exceeds bound {bound}")


class LPError(VarpolyError):
    """The LP kernel failed to reach a verdict (not the same as infeasibility)."""


class SolveError(VarpolyError):
    """No active pattern of the generalized equation converged."""

    def __init__(self, msg: str, diagnostics=None):
        super().__init__(msg)
        self.diagnostics = diagnostics or []
