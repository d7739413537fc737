"""Exception hierarchy shared by every module of the package."""


class SigmaGeomError(Exception):
    """Base class for all errors raised by sigmageom."""


class ContractViolation(SigmaGeomError, ValueError):
    """An argument violates an operation's precondition."""


class SingularSkeleton(SigmaGeomError):
    """The metric tensor of a skeleton is not invertible."""


class SpacelikeVector(SigmaGeomError):
    """A vector required to be timelike has nonpositive squared length."""


class EliminationFailure(SigmaGeomError):
    """All covariant components of the reference vector vanish."""


class SolverFailure(SigmaGeomError):
    """A numerical root search could not bracket or converge."""


class NotMetricCandidate(SigmaGeomError):
    """The world function takes negative values on the sample."""


class ImaginaryLength(SigmaGeomError):
    """A length sqrt(2 sigma) was requested for a negative sigma."""


class EmptyEnvelope(SigmaGeomError):
    """Sampling found no point of the envelope zero set inside the box."""


class InsufficientSamples(SigmaGeomError):
    """Too few sample points for the requested check."""


class BelowThreshold(SigmaGeomError):
    """Link length does not exceed the distortion threshold sqrt(2 sigma0)."""


class BranchDomainError(SigmaGeomError):
    """Segment mass too small for the three-branch radius profile."""
