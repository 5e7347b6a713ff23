"""Exception types shared across the toolkit."""


class MpqpError(Exception):
    """Base class for all toolkit errors."""


class NotPositiveDefinite(MpqpError):
    """Cholesky factorization failed; carries the failing pivot index."""

    def __init__(self, pivot_index, message=None):
        self.pivot_index = pivot_index
        super().__init__(message or f"matrix not positive definite (pivot {pivot_index})")


class DimensionMismatch(MpqpError):
    pass


class SchurNotPositive(MpqpError):
    """Bordered SPD update has a non-positive Schur complement (LICQ loss)."""


class LicqViolation(MpqpError):
    """Active-constraint rows are linearly dependent."""


class EmptyPolyhedron(MpqpError):
    pass


class NoConvergence(MpqpError):
    pass


class IterationCap(MpqpError):
    pass


class InfeasibleParameter(MpqpError):
    pass


class UnknownNode(MpqpError):
    pass


class UnknownRegion(MpqpError):
    pass


class HyperplaneNotStored(MpqpError):
    pass


class HashMismatch(MpqpError):
    pass


class BudgetExceeded(MpqpError):
    """Candidate budget of the active-set enumeration was exhausted."""
