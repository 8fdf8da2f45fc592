"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Raised when inputs violate a documented contract.

    Covers malformed files, out-of-range parameters, and data that fails a
    type invariant. The CLI maps this to exit code 2; everything else is an
    internal error (exit code 1).
    """
