"""Exception types raised across framekit."""


class FramekitError(Exception):
    """Base class for all framekit errors."""


class DomainError(FramekitError, ValueError):
    """An argument lies outside the domain of an operation."""


class CollarError(FramekitError):
    """Not enough of the index set is materialized to decide a boundary question."""


class EmptySpanError(FramekitError):
    """A family of vectors has no nonzero element (or lost its span)."""


class NotInXRError(FramekitError):
    """A real sequence admits no growth certificate."""


class IncompatibleError(FramekitError, ValueError):
    """Two objects built on different index decompositions were combined."""


class InputError(FramekitError):
    """A file or configuration could not be parsed or failed validation.

    Attributes:
        problems: every failure found, each a human-readable string.
    """

    def __init__(self, message: str, problems: list[str] | None = None):
        super().__init__(message)
        self.problems = list(problems or [message])
