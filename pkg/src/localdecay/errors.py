"""Exception hierarchy.

Every error raised deliberately by the package derives from
:class:`LocalDecayError` so callers (the campaign driver in particular) can
catch them in one place and attach the stage name.
"""

from __future__ import annotations


class LocalDecayError(Exception):
    """Base class for package errors."""


class ConfigError(LocalDecayError):
    """Configuration failed schema validation."""

    def __init__(self, field: str, reason: str):
        self.field = field
        self.reason = reason
        super().__init__(f"{field}: {reason}")


class StageError(LocalDecayError):
    """A campaign stage failed; wraps the underlying module error."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {type(cause).__name__}: {cause}")


# geometry
class InvalidBackground(LocalDecayError):
    """Background violates a structural requirement (signature, domain)."""


class NonMonotoneTortoise(LocalDecayError):
    """dr*/dr is not positive somewhere on the exterior."""


class DecayViolation(LocalDecayError):
    """A coefficient fails its declared symbol-class decay on the sample grid."""


# norms
class EmptyShell(UserWarning):
    """A dyadic shell inside the grid range holds no grid points."""


class UnderResolved(LocalDecayError):
    """Grid spacing too coarse for the requested frequency."""


# evolve
class CFLViolation(LocalDecayError):
    """Time step exceeds the stability limit of the scheme."""


class NaNDetected(LocalDecayError):
    """Evolution produced a non-finite value."""

    def __init__(self, step: int):
        self.step = step
        super().__init__(f"non-finite value first seen at step {step}")


class CausalityViolation(LocalDecayError):
    """Observer placement lets the outer boundary contaminate observations."""


class SignChange(LocalDecayError):
    """Series changes sign inside the fit window."""


class InsufficientDecade(LocalDecayError):
    """Fit window spans less than one decade in t."""


class RayOutsideGrid(LocalDecayError):
    """Requested ray t - r* = c never lies inside the snapshot grid."""


class SnapshotFormatError(LocalDecayError):
    """Binary snapshot file is malformed."""


# resolvent
class ResonanceSuspected(LocalDecayError):
    """Wronskian is numerically zero."""


class MatchRadiusTooSmall(LocalDecayError):
    """Asymptotic seed cannot reach tolerance below the maximal matching radius."""


class IngoingContamination(LocalDecayError):
    """Radiation residuals plateau instead of decaying."""


class ZeroResonance(LocalDecayError):
    """No bounded zero-frequency branch exists."""


class SlopeTooShallow(LocalDecayError):
    """Low-frequency remainder decays slower than required."""


# synthesis
class NodeFailure(LocalDecayError):
    """A resolvent solve at a quadrature node failed."""

    def __init__(self, tau: complex, cause: BaseException):
        self.tau = tau
        self.cause = cause
        super().__init__(f"resolvent solve failed at tau={tau}: {cause}")


class AliasError(LocalDecayError):
    """Time window exceeds what the frequency node spacing resolves."""
