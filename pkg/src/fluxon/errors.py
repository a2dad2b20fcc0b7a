"""Exception types raised by the fluxon package."""


class FluxonError(ValueError):
    """Base class for all domain errors."""


class DegeneratePatch(FluxonError):
    pass


class NonFiniteDerivative(FluxonError):
    pass


class OutsidePatch(FluxonError):
    pass


class OrientationError(FluxonError):
    """The bulk side of the surface could not be identified."""


class OriginUndefinedAngle(FluxonError):
    """Spherical angles requested at r = 0."""


class AtCharge(FluxonError):
    pass


class OnSingularAxis(FluxonError):
    """Point lies on (or numerically at) the ray x = y = 0, z >= 0."""


class NearSingularAxis(FluxonError):
    pass


class QuadratureNonConvergence(FluxonError):
    pass


class GridContainsOrigin(FluxonError):
    pass


class IllConditionedFit(FluxonError):
    pass


class StencilLeavesDomain(FluxonError):
    pass


class NonNormalizedDensity(FluxonError):
    pass
