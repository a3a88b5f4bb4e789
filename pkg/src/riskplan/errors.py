"""Exception types shared across the toolkit."""

from __future__ import annotations


class RiskplanError(Exception):
    """Base class for all toolkit errors."""


class FormulaSyntaxError(RiskplanError):
    """Raised when a formula string does not parse.

    Carries the character position of the offending token and the set of
    token kinds that would have been accepted there.
    """

    def __init__(self, message: str, position: int, expected: tuple[str, ...] = ()):
        detail = f"{message} at position {position}"
        if expected:
            detail += f" (expected {', '.join(expected)})"
        super().__init__(detail)
        self.position = position
        self.expected = expected


class UnknownAtomError(RiskplanError):
    """An atomic proposition is not part of the declared AP list."""


class FragmentError(RiskplanError):
    """A formula lies outside the fragment required by an operation."""


class StateBlowupError(RiskplanError):
    """Automaton construction exceeded the state cap."""


class InvalidModelError(RiskplanError):
    """A transition system failed validation."""


class AlphabetMismatchError(RiskplanError):
    """Two components disagree on the atomic-proposition alphabet."""


class MissingLabelError(RiskplanError):
    """A state has no label assigned."""


class CostMissingError(RiskplanError):
    """A reachable violation state has no cost entry."""


class NumericalFailureError(RiskplanError):
    """The solver could not certify a solution within tolerances."""


class BadDistributionError(RiskplanError):
    """A probability row is malformed (negative mass or wrong total)."""


class InputOutOfRangeError(RiskplanError):
    """A control input lies outside the admissible box."""


class AbstractionMismatchError(RiskplanError):
    """A continuous state left the region covered by the grid abstraction."""


class SchemaError(RiskplanError):
    """A configuration file violates the expected schema.

    `path` is the dotted field path of the offending entry.
    """

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class HashMismatchError(RiskplanError):
    """A policy file does not match the scenario it is applied to."""
