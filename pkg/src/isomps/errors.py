"""Exception hierarchy shared by every module."""


class MPSError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(MPSError):
    def __init__(self, message: str, line: int, column: int, expected: frozenset[str] = frozenset()):
        self.message = message
        self.line = line
        self.column = column
        self.expected = frozenset(expected)
        detail = f"{line}:{column}: {message}"
        if self.expected:
            detail += " (expected one of: " + ", ".join(sorted(self.expected)) + ")"
        super().__init__(detail)


class WellFormednessError(MPSError):
    """A declared type is not contractive, closed and well-behaved."""


class NotRecursive(MPSError):
    """unfold was applied to a type that is not a recursive binder."""


class EvalError(MPSError):
    pass


class SortError(MPSError):
    pass


class EmptyEnvironment(MPSError):
    pass


class ParticipantMismatch(MPSError):
    pass


class OracleNotFair(MPSError):
    pass


class MismatchDetected(MPSError):
    """Raised by the deterministic step when the chosen pair cannot synchronise."""

    def __init__(self, pair: tuple[str, str], reason: str):
        self.pair = pair
        self.reason = reason
        super().__init__(f"{pair[0]} and {pair[1]}: {reason}")


class CapExceeded(MPSError):
    pass


class UniverseCapExceeded(CapExceeded):
    pass
