"""Exception hierarchy shared by all modules."""


class SpectoneError(Exception):
    """Base class for every error raised by the package."""


class ChartDomainError(SpectoneError, ValueError):
    """A point lies outside the chart domain of an ambient space."""


class UnsupportedError(SpectoneError, NotImplementedError):
    """The requested operation has no implementation for this object."""


class AdmissibilityError(SpectoneError, ValueError):
    """A radius violates the curvature admissibility condition."""


class NumericError(SpectoneError, ArithmeticError):
    """A numerical quantity degenerated (singular metric, NaN, ...)."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class DegenerateFootError(NumericError):
    """The point lies on the totally convex set, so the foot geodesic is undefined."""


class ImmersionDegeneracyError(NumericError):
    """The differential of an immersion lost rank."""


class BoundaryStencilError(NumericError):
    """A finite-difference stencil left the domain where the map is defined."""


class EmptyScanError(SpectoneError, ValueError):
    """Every sampled point was excluded from a scan."""


class ParameterError(SpectoneError, ValueError):
    """Invalid parameters for a construction."""


class DomainViolationError(SpectoneError, ValueError):
    """A candidate field is undefined at a quadrature point."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class SweepError(SpectoneError, ValueError):
    """No threshold of a Cheeger sweep produced a nonempty domain."""


class MeshError(SpectoneError, ValueError):
    """Malformed or inverted mesh."""


class BandResolutionError(MeshError):
    """A band domain could not be resolved by the structured mesher."""


class EmptyInteriorError(SpectoneError, ValueError):
    """A Dirichlet problem has no interior degrees of freedom."""


class SolverError(SpectoneError, RuntimeError):
    """The eigensolver failed to converge."""


class ProbeDegeneracyError(SpectoneError, ValueError):
    """The eigenfunction vanishes where the Barta probe needs it positive."""


class ZeroFunctionError(SpectoneError, ValueError):
    """A Rayleigh quotient was requested for the zero function."""


class ConfigError(SpectoneError, ValueError):
    """A scenario configuration failed to parse or validate.

    ``field`` is the dotted key path and ``line`` the 1-based line, when known.
    """

    def __init__(self, message, field=None, line=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.field = field
        self.line = line


class StageError(SpectoneError, RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage, cause):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause
