"""
Exception hierarchy shared by every layer.
Library code raises these; the command registry and the HTTP router
translate them into result dictionaries and status codes.
"""

from typing import Optional


class WikgError(Exception):
    """Base class for all library errors"""


class DimensionError(WikgError, ValueError):
    """Operand shapes do not agree"""


class ParameterError(WikgError, ValueError):
    """A parameter is outside its valid range (k, label, fold count...)"""


class InputError(WikgError, ValueError):
    """Input data violates a precondition (zero-norm rows, empty bags...)"""


class NonFiniteError(WikgError, FloatingPointError):
    """NaN or Inf produced by an operation or found in a gradient"""


class UsageError(WikgError):
    """A function or command was called the wrong way"""


class FormatError(WikgError):
    """A bag file, checkpoint or manifest is malformed"""

    def __init__(self, message: str, offset: Optional[int] = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
