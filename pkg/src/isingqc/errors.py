"""Exception types shared by all engines."""


class IsingQCError(Exception):
    """Base class for errors raised by this package."""


class InvalidInputError(IsingQCError, ValueError):
    """An argument violates an operation's preconditions."""


class CapacityError(IsingQCError):
    """The requested problem exceeds an engine's configured size limit."""


class DegeneracyError(IsingQCError, ArithmeticError):
    """A perturbative energy denominator fell below the degeneracy floor."""

    def __init__(self, message, denominator=None):
        super().__init__(message)
        self.denominator = denominator
