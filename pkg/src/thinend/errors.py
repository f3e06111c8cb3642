"""Exception hierarchy shared by all thinend modules."""


class ThinEndError(Exception):
    """Base class for every error raised by the package."""


class DomainError(ThinEndError, ValueError):
    """An argument lies outside the domain of the operation."""


class GeometryError(ThinEndError, ValueError):
    """A curve or end violates a geometric invariant."""


class ConstraintError(ThinEndError, ValueError):
    """Exponent feasibility constraints are violated."""


class MeshError(ThinEndError, ValueError):
    """Requested mesh cannot satisfy the mesh invariants."""


class SectorError(ThinEndError, ValueError):
    """No admissible decay direction exists for the domain."""


class TagError(ThinEndError, KeyError):
    """Unknown boundary segment tag."""


class SingularMediumError(ThinEndError, ValueError):
    """q - 1 vanishes somewhere on the domain."""


class BoundaryDataError(ThinEndError, ValueError):
    """Transmission boundary conditions are not satisfied."""


class RegimeError(ThinEndError, ValueError):
    """Parameters lie outside the asymptotic regime of a bound."""


class SweepError(ThinEndError, ValueError):
    """A parameter sweep is too short or degenerate."""


class SolverError(ThinEndError, RuntimeError):
    """An iterative solver failed to converge."""


class MediumError(ThinEndError, ValueError):
    """Medium coefficients violate the solvability conditions."""


class ConventionError(ThinEndError, ValueError):
    """Objects built under different normalization conventions."""


class FitError(ThinEndError, ValueError):
    """Data cannot be fitted on a log-log scale."""
