# ABOUTME: Exception hierarchy for graph validation, spectral expansion and root solving
# ABOUTME: Every error carries the name of the precondition or invariant it violates

from typing import List, Optional


class SpectraError(Exception):
    """Base class for all library errors"""

    def __init__(self, message: str, invariant: Optional[str] = None):
        self.invariant = invariant or message
        super().__init__(message)


class InputError(SpectraError):
    """Malformed or out-of-domain argument"""


class GraphValidationError(SpectraError):
    """Graph spec failed validation; holds every collected message"""

    def __init__(self, errors: List[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors), invariant=self.errors[0] if self.errors else None)


class ExpansionCapError(SpectraError):
    """Determinant expansion refused: too many directed bonds"""


class ReducibilityError(SpectraError):
    """Spectral determinant does not reduce to the real cosine form"""


class IrregularPolyError(SpectraError):
    """Operation requires a regular polynomial (characteristic sum below one)"""


class NoFiniteDegreeError(SpectraError):
    """Irregularity degree is unbounded (a frequency equals the leading one)"""


class CellContractError(SpectraError):
    """A root cell has no sign change and no degenerate endpoint"""

    def __init__(self, level: int, cell: int, lo: float, hi: float, f_lo: float, f_hi: float):
        self.level = level
        self.cell = cell
        self.lo = lo
        self.hi = hi
        self.f_lo = f_lo
        self.f_hi = f_hi
        super().__init__(
            f"cell contract violation at level {level}, cell {cell}: "
            f"p({lo:.15g}) = {f_lo:.3e}, p({hi:.15g}) = {f_hi:.3e}",
            invariant="each cell contains exactly one root",
        )


class ConvergenceError(SpectraError):
    """Iteration or quadrature did not converge"""


class OrbitCapError(SpectraError):
    """Orbit enumeration would exceed the configured cap"""

    def __init__(self, estimate: int, cap: int):
        self.estimate = estimate
        self.cap = cap
        super().__init__(
            f"cap exceeded: estimated {estimate} closed walks, cap is {cap}",
            invariant="estimated orbit count below configurable cap",
        )


class ConsistencyError(SpectraError):
    """Two independent computations of the same quantity disagree"""


class AssumptionError(SpectraError):
    """A formula's stated assumptions do not hold for this graph"""


class LagrangeValidityError(SpectraError):
    """Lagrange inversion validity condition fails at a sample point"""
