"""Exception hierarchy shared by every module."""

from __future__ import annotations


class ReflectMemError(Exception):
    """Base class for all package errors."""


class EmptyText(ReflectMemError, ValueError):
    pass


class ProviderFailure(ReflectMemError):
    """A provider call failed. ``retriable`` tells callers whether a retry may help."""

    def __init__(self, message: str, *, retriable: bool = False):
        super().__init__(message)
        self.retriable = retriable


class EmptyCompletion(ReflectMemError):
    pass


class DimensionMismatch(ReflectMemError, ValueError):
    pass


class ZeroVector(ReflectMemError, ValueError):
    pass


class EmptyTrajectory(ReflectMemError, ValueError):
    pass


class UnparseableReflection(ReflectMemError, ValueError):
    pass


class ProviderMismatch(ReflectMemError):
    pass


class IoFailure(ReflectMemError, OSError):
    pass


class SchemaVersionMismatch(ReflectMemError):
    pass


class CorruptRecord(ReflectMemError):
    def __init__(self, message: str, *, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class DegenerateSplit(ReflectMemError, ValueError):
    pass


class MixedKnowledgeTypes(ReflectMemError, ValueError):
    pass


class NonPositiveBaseline(ReflectMemError, ValueError):
    pass


class UnknownTask(ReflectMemError, KeyError):
    def __str__(self) -> str:
        return Exception.__str__(self)


class EmptyGroup(ReflectMemError, ValueError):
    pass


class SingleCategory(ReflectMemError, ValueError):
    pass


class ConfigError(ReflectMemError, ValueError):
    pass
