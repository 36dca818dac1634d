"""Exception hierarchy shared by every fplab module."""


class FplabError(Exception):
    """Base class for all errors raised by fplab."""


class InvalidParameter(FplabError, ValueError):
    pass


class PreconditionViolated(FplabError, ValueError):
    pass


class FpOverflow(FplabError, ArithmeticError):
    """|x| exceeds the largest element of a bounded format."""


class FpUnderflow(FplabError, ArithmeticError):
    """0 < |x| is below the smallest nonzero element of a bounded format."""


class DomainError(FplabError, ArithmeticError):
    """Division by an exact zero.

    ``node`` is the id of the offending circuit node when known.
    """

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class CircuitSyntaxError(FplabError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ForwardReference(CircuitSyntaxError):
    pass


class ArityMismatch(CircuitSyntaxError):
    pass


class MissingOutput(CircuitSyntaxError):
    pass


class CapExceeded(FplabError, RuntimeError):
    pass
