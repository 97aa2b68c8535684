"""Exception types shared across the package."""


class ZeroUpdateError(RuntimeError):
    """A tensor power update produced the zero vector (degenerate start)."""


class DecompositionError(RuntimeError):
    """Tensor decomposition failed; carries the extraction round that failed."""

    def __init__(self, round_index: int, message: str):
        super().__init__(message)
        self.round_index = round_index


class DegenerateMixtureError(RuntimeError):
    """The second-moment matrix is numerically rank deficient for the requested K."""

    def __init__(self, message: str, sigma=None):
        super().__init__(message)
        self.sigma = sigma


class InsufficientLengthError(ValueError):
    """A trajectory or horizon is too short for the requested operation."""
