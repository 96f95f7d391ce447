"""Exception hierarchy shared by every module."""


class VarBFError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(VarBFError, ValueError):
    """An argument lies outside the domain where a quantity is defined."""


class ValidationError(VarBFError, ValueError):
    """User input is malformed or inconsistent."""


class ParseError(ValidationError):
    """A hypothesis string could not be tokenized or parsed."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class NumericError(VarBFError, ArithmeticError):
    """A numerical routine failed to converge or lost all precision."""

    def __init__(self, message: str, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics
