"""Exception hierarchy.

Errors fall in two families that the CLI maps onto exit codes: ``DataError``
(bad inputs, missing columns, too few rows) and ``NumericalError`` (the
numbers themselves are unusable).
"""

from __future__ import annotations


class DagSobolError(Exception):
    """Base class for all package errors."""


class DataError(DagSobolError):
    pass


class NumericalError(DagSobolError):
    pass


# graph structure


class DuplicateNode(DataError):
    pass


class UnknownEndpoint(DataError):
    pass


class UnknownNode(DataError):
    pass


class CycleDetected(DataError):
    def __init__(self, node: str):
        super().__init__(f"cycle detected through node {node!r}")
        self.node = node


class OutputIsSource(DataError):
    pass


# data


class MissingColumn(DataError):
    def __init__(self, column: str, context: str = ""):
        msg = f"missing column {column!r}"
        if context:
            msg += f" ({context})"
        super().__init__(msg)
        self.column = column


class InsufficientData(DataError):
    pass


class Underdetermined(DataError):
    """Fewer observations than basis functions in a dense fit."""

    def __init__(self, required: int, available: int, subproblem: str = ""):
        where = f" for {subproblem}" if subproblem else ""
        super().__init__(
            f"underdetermined fit{where}: need at least {required} observations, got {available}"
        )
        self.required = required
        self.available = available
        self.subproblem = subproblem


class SpecError(DataError):
    pass


class EvaluationFailure(NumericalError):
    def __init__(self, node: str, row: int, detail: str = "non-finite value"):
        super().__init__(f"{detail} while evaluating node {node!r} at row {row}")
        self.node = node
        self.row = row


# numerics


class DegenerateDistribution(NumericalError):
    pass


class MomentOverflow(NumericalError):
    pass


class AllMonomialsDegenerate(NumericalError):
    pass


class NonFiniteInput(NumericalError):
    pass


class ZeroVariance(NumericalError):
    pass


class ModelEvaluationFailure(NumericalError):
    pass


class ConstraintUnmet(UserWarning):
    """Soft flag: the sparse fit could not reach the requested goodness of fit."""
