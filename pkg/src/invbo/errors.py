"""Exception types shared across the package."""


class InvalidArgumentError(ValueError):
    """Bad shapes, non-finite values or otherwise malformed arguments."""


class NumericalError(ArithmeticError):
    """A factorization, inversion or quadrature failed to reach its tolerance.

    ``bound`` carries the best achieved error bound or, for factorizations,
    the smallest eigenvalue seen, when one is available.
    """

    def __init__(self, message, bound=None):
        super().__init__(message)
        self.bound = bound


class DataError(ValueError):
    """Unparseable or inconsistent input files and session state."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
