"""Exception types raised by the solver."""


class FpmHeatError(Exception):
    """Base class for all solver errors."""


class DegenerateInput(FpmHeatError):
    """Two generating points (nearly) coincide."""


class EmptyCell(FpmHeatError):
    """A point's cell clipped to zero volume; the point is likely outside the domain."""


class SingularSupport(FpmHeatError):
    """The least-squares normal matrix of a support is (near) singular."""


class InsufficientSupport(FpmHeatError):
    """A cell has fewer neighbors than the spatial dimension."""


class InvalidPenalty(FpmHeatError):
    """A penalty parameter violates its positivity requirement."""


class InvalidBoundarySpec(FpmHeatError):
    """Boundary faces are not covered by exactly one boundary region."""


class IllConditionedBasis(FpmHeatError):
    """The collocation basis solve lost too many digits."""


class NotConverged(FpmHeatError):
    """The correctional iteration hit its cap before meeting the tolerance."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class SingularIteration(FpmHeatError):
    """The iteration's linear solve failed."""


class Diverged(FpmHeatError):
    """A marching state norm blew past the divergence guard."""


class RootNotConverged(FpmHeatError):
    """Bisection for a transcendental root failed; the bracket is wrong."""


class ZeroNormReference(FpmHeatError):
    """The reference field norm is zero, so a relative error is undefined."""


class SchemaError(FpmHeatError):
    """A run configuration violates the documented schema."""


class IoError(FpmHeatError):
    """A configuration or data file could not be read."""
