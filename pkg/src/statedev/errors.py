"""Shared exception hierarchy.

Every library error derives from StatedevError so the CLI can map any
model or data failure to exit code 1 without enumerating modules.
"""

from __future__ import annotations


class StatedevError(Exception):
    """Base class for all library errors."""


class ExpressionError(StatedevError):
    """Predicate expression could not be parsed."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at offset {position})")
        self.position = position


class MissingParameterError(StatedevError):
    """Evaluation hit a name with no value in the assignment."""

    def __init__(self, names):
        names = tuple(sorted(names))
        super().__init__("missing parameter(s): " + ", ".join(names))
        self.names = names


class IncomparableValuesError(StatedevError):
    """Two operands cannot be ordered against each other."""
