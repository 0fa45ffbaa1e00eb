# cmlimits/models.py
from __future__ import annotations

from enum import Enum
from fractions import Fraction
from typing import Union

Real = Union[float, Fraction]


class Variant(Enum):
    """Which limit law a fragment probability refers to."""

    MULTIGRAPH = "multigraph"  # p*(H), the configuration model itself
    SIMPLE = "simple"  # p(G), conditioned on simplicity

    @property
    def min_cycle(self) -> int:
        return 1 if self is Variant.MULTIGRAPH else 3


class ComponentClass(Enum):
    TREE = "tree"
    UNICYCLIC = "unicyclic"
    COMPLEX = "complex"

    @classmethod
    def from_excess(cls, excess: int) -> "ComponentClass":
        if excess < 0:
            return cls.TREE
        if excess == 0:
            return cls.UNICYCLIC
        return cls.COMPLEX


class Law(Enum):
    """Offspring laws of the branching representation."""

    ROOT = "D"  # λ_k itself
    SIZE_BIASED = "Dhat"  # P(D̂ = i-1) = i λ_i / ρ₁
    CYCLE_ROOT = "Dtilde"  # P(D̃ = i-2) = i(i-1) λ_i / ρ₂


class Verdict(Enum):
    FULL = "full"
    GAP = "gap"


class RoundingPolicy(Enum):
    NEAREST = "nearest"  # floor(n λ_k + 1/2), then largest-remainder correction
    FLOOR = "floor"  # floor(n λ_k), remainder handed out by largest fractional part


class CmLimitsError(Exception):
    """Base class for every error raised by the package."""


class ValidationError(CmLimitsError, ValueError):
    """Input rejected before any work was done."""


class DegreeSequenceError(ValidationError):
    pass


class MatchingError(ValidationError):
    pass


class ModelError(ValidationError):
    pass


class SupercriticalError(ValidationError):
    """Raised where a formula needs ν < 1."""

    def __init__(self, nu: float, what: str) -> None:
        super().__init__(f"{what} requires nu < 1 (got nu={nu:.12g})")
        self.nu = nu


class BudgetExceeded(CmLimitsError, RuntimeError):
    """A configured work cap was hit."""


class CycleBudgetExceeded(BudgetExceeded):
    pass


class OracleBoundExceeded(BudgetExceeded):
    pass


class CatalogueBudgetExceeded(BudgetExceeded):
    pass


class IntervalBudgetExceeded(BudgetExceeded):
    pass


class BranchingOverflow(BudgetExceeded):
    def __init__(self, cap: int) -> None:
        super().__init__(f"branching process exceeded {cap} vertices")
        self.cap = cap
