"""Exception hierarchy shared by all lenscat modules."""


class LenscatError(Exception):
    """Base class for every error raised by lenscat."""


class NonPositiveDefinite(LenscatError):
    """A metric evaluated to a matrix with a non-positive eigenvalue."""


class SupportViolation(LenscatError):
    """A field is not the identity (flat) outside its declared support."""


class DegeneratePlane(LenscatError):
    """Two vectors do not span a 2-plane."""


class ZeroMomentum(LenscatError):
    """A covector is too small to define a direction of travel."""


class TrappedRay(LenscatError):
    """A ray exceeded its arc-length budget without reaching its stop surface.

    The offending start data are kept on the exception so sweeps can
    report them.
    """

    def __init__(self, message, t=None, z=None, zeta=None, length=None):
        super().__init__(message)
        self.t = t
        self.z = z
        self.zeta = zeta
        self.length = length


class StepFailure(LenscatError):
    """The adaptive step-size controller underflowed."""


class MissesBall(LenscatError):
    """A free line does not meet the interaction ball."""


class SpecError(LenscatError):
    """A metric, diffeomorphism or function description could not be parsed."""
