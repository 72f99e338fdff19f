"""Exception hierarchy shared across the package."""


class QuasisymError(Exception):
    """Base class for every error raised by this package."""


class FocalSegment(QuasisymError, ValueError):
    """Point lies on (or numerically at) the elliptic focal segment."""


class MissingDerivativeRule(QuasisymError):
    """Exact derivatives were requested from a field that has no rule for them."""


class ZeroField(QuasisymError, ValueError):
    """The field direction b = B/|B| is needed where |B| vanishes."""


class NegativeE(QuasisymError, ValueError):
    """The surface energy profile E(Psi) is negative at a sampled point."""


class NegativeRadicand(QuasisymError, ValueError):
    """No real displacement slope exists: eta/|grad mu|^2 < 1."""

    def __init__(self, message: str, nu=None):
        super().__init__(message)
        self.nu = nu


class DegenerateDelta(QuasisymError, ValueError):
    """delta = sin^2(nu) + sinh^2(mu) vanished on a characteristic."""


class DegenerateStrip(QuasisymError, ValueError):
    """Initial strip violates transversality (q0 = 0)."""


class StepFailure(QuasisymError, RuntimeError):
    """Adaptive step controller underflowed."""


class PatchFold(QuasisymError, RuntimeError):
    """Neighbouring characteristics crossed; the (xi, tau) map lost rank."""

    def __init__(self, message: str, location=None):
        super().__init__(message)
        self.location = location


class CutSurface(QuasisymError, ValueError):
    """A finite-difference stencil straddles a branch cut of a multivalued potential."""


class TangentialDegeneracy(QuasisymError, ValueError):
    """grad(zeta) x grad(B) vanishes at a sample, the second-order form does not apply."""


class RankDeficientSamples(QuasisymError, ValueError):
    """The sample set cannot distinguish Euclidean generators."""


class ConfigError(QuasisymError, ValueError):
    """Invalid run configuration."""
