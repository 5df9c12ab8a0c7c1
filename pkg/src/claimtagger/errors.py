"""Exception types shared across the toolkit."""


class ClaimTaggerError(Exception):
    """Base class for all errors raised by this package."""


class ContractError(ClaimTaggerError, ValueError):
    """An operation was called with arguments that violate its contract."""


class NumericError(ClaimTaggerError, ArithmeticError):
    """A computation produced non-finite values."""


class FormatError(ClaimTaggerError, ValueError):
    """An input file does not match its documented format."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class IntegrityError(ClaimTaggerError, ValueError):
    """Parsed data violates a corpus invariant (lengths, duplicate ids)."""


class CheckpointError(ClaimTaggerError, RuntimeError):
    """A checkpoint could not be written or read back."""
