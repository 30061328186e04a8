"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Tensor-factor dimensions do not match the matrix or vector."""


class NotHermitianError(ValueError):
    """Matrix is not Hermitian within tolerance."""


class InvalidStateError(ValueError):
    """Input is not a valid density matrix, pure state, or probability vector."""


class NotCPTPError(ValueError):
    """Channel record is not completely positive and trace preserving."""


class ConvergenceError(RuntimeError):
    """An iterative solver hit its iteration cap.

    ``best`` carries the best-so-far result when one exists.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best
