"""Exception hierarchy shared by every stage of the pipeline."""


class SbcnError(Exception):
    """Base class for all errors raised by sbcnkit."""


class SchemaError(SbcnError):
    """Schema file is malformed or does not match the data header."""


class IngestionError(SbcnError):
    """A data cell could not be parsed."""

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class UndefinedProbabilityError(SbcnError):
    """A conditional probability has an empty conditioning event."""


class DegenerateTableError(SbcnError):
    """Contingency table with an empty group or empty complement."""


class StructureError(SbcnError):
    """Graph structure violates an invariant (e.g. contains a cycle)."""


class UnreachableDecisionError(SbcnError):
    """No random walk from a node terminated at a decision node."""


class ConvergenceError(SbcnError):
    """Iterative solver did not reach its tolerance."""

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


class UndefinedScoreError(SbcnError):
    """A ratio score has a zero denominator."""


class ValidationError(SbcnError):
    """Arguments are inconsistent with each other."""


class GenerationError(SbcnError):
    """Synthetic generator received infeasible parameters."""
