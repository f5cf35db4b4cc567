"""Exception types shared across the package."""


class CuspidalError(Exception):
    """Base class for analysis errors."""


class NonOrthogonalGeometry(CuspidalError):
    """Raised when an orthogonal-only routine is called on a general robot."""


class DegenerateElimination(CuspidalError):
    """The half-angle elimination is invalid for this geometry.

    Happens when the first two joint axes are parallel (sin(alpha2) = 0) or
    intersect (d2 = 0); inverse kinematics must then be solved by other means.
    """


class RobotFileError(CuspidalError):
    """A robot definition file is missing, malformed or inconsistent."""


class AnalysisAnomaly(CuspidalError):
    """A cross-validation check failed (e.g. a cusp candidate without a
    confirming triple root)."""


class PostureChangeImpossible(CuspidalError):
    """No non-singular joint path can connect the requested configurations."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason
