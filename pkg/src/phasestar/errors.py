"""Exception hierarchy shared across the package."""


class PhaseStarError(Exception):
    """Base class for all package-specific errors."""


class SpaceMismatchError(PhaseStarError):
    """Operands live on different phase spaces."""


class UnknownCoordinateError(PhaseStarError):
    """A coordinate name is not part of the phase space."""


class SubstitutionError(PhaseStarError):
    """A coordinate substitution is incomplete or inconsistent."""


class ParseError(PhaseStarError):
    """The expression text does not conform to the symbol grammar."""


class FlowDivergenceError(PhaseStarError):
    """A history series did not terminate within the allowed order."""


class ClassicalityError(PhaseStarError):
    """A star exponential does not collapse to an ordinary exponential."""


class ConjugacyError(PhaseStarError):
    """Exponential-shift star product applied to unsuitable forms."""


class CanonicalizationError(PhaseStarError):
    """Distributional rewrite rules did not reach a fixed point."""


class NonSeparableError(PhaseStarError):
    """A distributional observable cannot be reduced to grid slices."""


class GridError(PhaseStarError):
    """Grid specification or grid data is invalid."""


class NumericalAbortError(PhaseStarError):
    """Propagation produced non-finite data."""
