"""
Error Types
===========
Every failure raised by the engine derives from PHKGError, which is a
ValueError so callers that only care about "bad input" can catch that.
"""

from typing import Iterable, Optional


class PHKGError(ValueError):
    """Base class for all engine errors."""


# -------------------------
# RDF layer
# -------------------------

class StructuralError(PHKGError):
    """A triple violates the RDF term-position rules."""


class TurtleSyntaxError(PHKGError):
    """A Turtle document could not be parsed."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class PrefixResolutionError(PHKGError):
    """A prefixed name uses a prefix that was never declared."""


# -------------------------
# Food logs and summarization
# -------------------------

class LogParseError(PHKGError):
    """A food-log record is malformed."""

    def __init__(self, index: int, field: str, message: str):
        super().__init__(f"record {index}: field '{field}': {message}")
        self.index = index
        self.field = field


class GenerationError(PHKGError):
    """A synthetic-log specification cannot be satisfied."""


class InsufficientDataError(PHKGError):
    """Not enough data points to compute a statistic or pattern."""


class UndefinedCVError(PHKGError):
    """The coefficient of variation is undefined for a zero-mean series."""


class DataInconsistencyError(PHKGError):
    """Logged values contradict each other."""


# -------------------------
# Guidelines and reasoning
# -------------------------

class GuidelineSyntaxError(PHKGError):
    """A guideline document could not be parsed."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        location = f" (line {line}, column {column})" if line else ""
        super().__init__(f"{message}{location}")
        self.line = line
        self.column = column


class UnknownTermError(PHKGError):
    """A rule or document refers to a term outside the vocabulary."""


class ConstraintValidationError(PHKGError):
    """A recommendation constraint payload is invalid."""


class CompileError(PHKGError):
    """A class expression uses a construct the compiler does not support."""


class PreconditionError(PHKGError):
    """An operation was invoked on input that does not meet its precondition."""


class ConstraintConflictError(PHKGError):
    """Two asserted constraints cannot be satisfied together."""

    def __init__(self, message: str, rule_ids: Iterable[str]):
        self.rule_ids = tuple(rule_ids)
        super().__init__(f"{message} (rules: {', '.join(self.rule_ids)})")


# -------------------------
# Queries and recommendations
# -------------------------

class QuerySyntaxError(PHKGError):
    """A query is not valid in the supported SPARQL subset."""

    def __init__(self, message: str, position: Optional[int] = None):
        location = f" at position {position}" if position is not None else ""
        super().__init__(f"{message}{location}")
        self.position = position


class UnsupportedFeatureError(PHKGError):
    """A query uses a SPARQL feature outside the supported subset."""

    def __init__(self, feature: str):
        super().__init__(f"unsupported SPARQL feature: {feature}")
        self.feature = feature


class UnknownQuestionError(PHKGError):
    """No competency question is registered under the given id."""


class CatalogError(PHKGError):
    """A recipe catalog document is invalid."""
