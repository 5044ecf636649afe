"""Shared exception types.

Every error raised on purpose by this package derives from TreedimError, so
callers can catch one type at the boundary.  Constructors attach the offending
values as attributes where a witness is useful in tests and CLI output.
"""

from __future__ import annotations


class TreedimError(Exception):
    """Base class for all errors raised by treedim."""


class DegreeMismatch(TreedimError):
    """Permutations or groups over different point sets were combined."""

    def __init__(self, expected: int, got: int, what: str = "permutation"):
        self.expected = expected
        self.got = got
        super().__init__(f"{what} has degree {got}, expected {expected}")


class LevelMismatch(TreedimError):
    """A vertex was used at a tree depth it does not have."""


class ResourceLimit(TreedimError):
    """A configured budget (points, nodes, states) was exceeded."""

    def __init__(self, message: str, budget: int | None = None):
        self.budget = budget
        super().__init__(message)


class NotSubgroup(TreedimError):
    """A claimed subgroup contains an element outside the ambient group."""


class NotTransitive(TreedimError):
    """A construction requires a transitive action and the input is not."""


class StateExplosion(ResourceLimit):
    """Automaton normalization exceeded its state budget."""


class ParseError(TreedimError):
    """A spec file or notation string could not be parsed."""


class ValidationError(TreedimError):
    """A parsed spec is structurally valid but semantically inconsistent."""
