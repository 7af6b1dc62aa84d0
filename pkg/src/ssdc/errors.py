"""Exception hierarchy shared by every module."""


class SsdcError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(SsdcError, ValueError):
    """A numeric argument is outside its admissible range."""


class ConfigurationError(SsdcError, ValueError):
    """A solver, schedule or experiment is misconfigured or lacks a constant."""


class DomainError(SsdcError, ArithmeticError):
    """An objective term evaluated to a non-finite value."""


class DivergenceError(SsdcError, ArithmeticError):
    """An iterate became non-finite or left the divergence guard ball."""

    def __init__(self, message, stage=None, iteration=None):
        self.stage = stage
        self.iteration = iteration
        where = []
        if stage is not None:
            where.append(f"stage {stage}")
        if iteration is not None:
            where.append(f"iteration {iteration}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class ParseError(SsdcError, ValueError):
    """Malformed input file."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
