"""Error hierarchy of pycmc.

Input problems derive from ``ValueError``; numerical failures derive from
``RuntimeError``. Every error also derives from ``PycmcError`` so callers
(the CLI in particular) can catch the whole family at once.
"""

from typing import Any, Optional


class PycmcError(Exception):
    """Base class of all pycmc errors."""


# input side


class PoleError(PycmcError, ValueError):
    """Evaluation requested at a pole (e.g. λ = 0 with negative coefficients)."""


class DomainError(PycmcError, ValueError):
    """Evaluation point outside the annulus of validity of a loop."""


class HolomorphyError(DomainError):
    """κA − B keeps a λ⁻¹ term, so 𝓛ₙ⁻¹ of it is not λ-holomorphic."""

    def __init__(self, message: str, n: Optional[int] = None, residual: Optional[float] = None):
        super().__init__(message)
        self.n = n
        self.residual = residual


class InvalidResidueError(PycmcError, ValueError):
    """Residue data that does not describe a Delaunay residue."""


class NearSingularError(PycmcError, ValueError):
    """λ too close to the singular segment of the third kind integral."""

    def __init__(self, message: str, lam: Optional[complex] = None):
        super().__init__(message)
        self.lam = lam


class ResonanceError(PycmcError, ValueError):
    """The 𝓛ₙ operator is not invertible at some λ (resonance point)."""

    def __init__(self, message: str, lam: Optional[complex] = None):
        super().__init__(message)
        self.lam = lam


class DegenerateError(PycmcError, ValueError):
    """Degenerate input for a dressing construction."""


class ConfigError(PycmcError, ValueError):
    """Invalid experiment configuration."""


# numerical side


class SingularLoopError(PycmcError, RuntimeError):
    """Determinant of a loop below the singularity tolerance."""


class BandwidthError(PycmcError, RuntimeError):
    """Truncation residual stays above tolerance at the maximal bandwidth."""


class FactorizationError(PycmcError, RuntimeError):
    """Iwasawa or spectral factorization failed."""


class IntegrationError(PycmcError, RuntimeError):
    """ODE integration failed; ``partial`` holds the last accepted state."""

    def __init__(self, message: str, partial: Any = None, z: Optional[complex] = None):
        super().__init__(message)
        self.partial = partial
        self.z = z


class InconsistencyError(PycmcError, RuntimeError):
    """Two routes that must agree did not (probes, shift recomputation)."""


class ShrinkDomainError(PycmcError, RuntimeError):
    """The requested z-domain is too large for the construction."""


class ExtractionError(PycmcError, RuntimeError):
    """Simple factor extraction left a pole after the allowed iterations."""


class AlignmentError(PycmcError, RuntimeError):
    """Rigid alignment is degenerate (rank-deficient cross-covariance)."""
