"""Exception types shared across the library."""


class TubervolError(Exception):
    """Base class for all library errors."""


class MeshNotClosedError(TubervolError):
    """A watertight mesh was required but the input is not closed."""


class DegenerateInputError(TubervolError):
    """Input has too few points, no rank, or an empty/undersized mask."""


class RepairFailedError(TubervolError):
    """Watertight repair did not converge within the round budget."""


class EmptyIsosurfaceError(TubervolError):
    """The sampled field has no sign change, so no surface exists."""


class EmptyReconstructionError(TubervolError):
    """No grid point was classified as inside or on the surface."""


class ShapeMismatchError(TubervolError):
    """Tensor shapes are incompatible for the requested operation."""


class NonFiniteError(TubervolError):
    """A NaN or Inf appeared in a computation that must stay finite."""


class DivergenceError(TubervolError):
    """Training produced a non-finite loss."""

    def __init__(self, message: str, epoch: int | None = None):
        super().__init__(message)
        self.epoch = epoch
