"""Exception types shared across the package."""


class GeometryError(ValueError):
    """Base class for all domain/geometry failures."""


class DomainError(GeometryError):
    """Parameter or spectral value outside the admissible range."""


class KindError(GeometryError):
    """Operation not defined for this quadric kind."""


class DegenerateFrameError(GeometryError):
    """Frame vectors numerically dependent; no unique rigid motion."""


class NoSolutionError(GeometryError):
    """Tangency equation degenerates to a nonzero constant."""


class NotIsometricError(GeometryError):
    """First fundamental forms of the two patches disagree."""


class ImmersionError(GeometryError):
    """Degenerate jet: |x_u x x_v| below the immersion floor."""


class GridTooCoarseError(GeometryError):
    """Finite-difference reconstruction error above tolerance."""


class ValidityError(GeometryError):
    """Bending data leaves the real branch."""


class QuadratureError(GeometryError):
    """Non-finite values produced during frame integration."""


class SpectralZeroError(GeometryError):
    """z = 0 requested where the transport equation degenerates."""


class BlowupError(GeometryError):
    """Transported state escaped the admissible chart."""


class DegenerateError(GeometryError):
    """Degenerate tangency configuration at a transport node."""
