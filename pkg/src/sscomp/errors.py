"""Exception hierarchy shared by every stage of the compiler and driver."""

from __future__ import annotations


class SscompError(Exception):
    """Base class for user-facing errors (CLI exit code 1)."""


class ParseError(SscompError):
    def __init__(self, position, message: str):
        self.position = position
        self.message = message
        super().__init__(f"at {position}: {message}")


class UnsupportedFeature(ParseError):
    """A schema construct outside the supported subset."""


class ExplosionError(SscompError):
    """A product or enumeration grew past its configured cap."""


class CompileError(SscompError):
    pass


class NotNormalizable(CompileError):
    def __init__(self, residual: str):
        self.residual = residual
        super().__init__(f"schema did not reach normal form: {residual}")


class EmptySpace(CompileError):
    """The space denotes no points at all."""


class NameCollision(CompileError):
    pass


class UnboundedDimension(CompileError):
    """A continuous dimension without finite bounds cannot be sampled."""


class DuplicateOperator(SscompError):
    pass


class UnknownOperator(SscompError):
    pass


class InvalidDefaults(SscompError):
    pass


class ArityError(SscompError):
    pass


class LifecycleError(SscompError):
    pass


class SchemaViolation(SscompError):
    def __init__(self, message: str, path=()):
        self.path = tuple(path)
        super().__init__(message)


class ConsistencyError(SchemaViolation):
    """A compiled space produced a point its source schema rejects.

    This indicates a compiler bug (or a hand-edited space), so the CLI
    reports it with exit code 2.
    """


class TrainingError(SscompError):
    pass


class ConfigError(SscompError):
    pass


class DecodeError(SscompError):
    pass


class UnknownDiscriminant(DecodeError):
    pass


class MissingHyperparameter(DecodeError):
    pass


class NotInSpace(DecodeError):
    pass


class DegenerateRange(UserWarning):
    """An integer range has fewer distinct values than requested cuts."""
