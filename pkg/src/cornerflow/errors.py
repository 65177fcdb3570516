"""Exception hierarchy shared across the solver modules."""


class CornerFlowError(Exception):
    """Base class for all package errors."""


class InvalidGeometryError(CornerFlowError, ValueError):
    """Body geometry is degenerate, self-intersecting or mis-oriented."""


class GeometryClipError(CornerFlowError, ValueError):
    """Probe points would leave the local fluid wedge of a corner."""


class GasDomainError(CornerFlowError, ValueError):
    """Thermodynamic input outside its physical domain (e.g. rho < 0)."""


class LimitSpeedError(CornerFlowError, ValueError):
    """Requested speed at or above the cavitation limit sqrt(2B)."""


class SonicFluxError(CornerFlowError, ValueError):
    """Half-squared mass flux at or beyond the sonic maximum of the
    Bernoulli relation; the subsonic inversion is undefined there."""


class FluidDomainError(CornerFlowError, ValueError):
    """Evaluation point inside the body or on the boundary slit."""


class SolverError(CornerFlowError, RuntimeError):
    """Linear system could not be solved reliably."""

    def __init__(self, message, condition_number=None):
        super().__init__(message)
        self.condition_number = condition_number


class DegenerateKuttaError(CornerFlowError, RuntimeError):
    """Singular coefficient at the designated corner does not respond to
    circulation; no Kutta root can be determined."""


class FitQualityError(CornerFlowError, RuntimeError):
    """Least-squares corner/far-field fit is ill-conditioned or its
    residual exceeds tolerance."""


class SonicExcursionError(CornerFlowError, RuntimeError):
    """A grid location reached the sonic flux bound during a compressible
    solve.  Carries the offending location."""

    def __init__(self, message, location=None, m_value=None, m_max=None):
        super().__init__(message)
        self.location = location
        self.m_value = m_value
        self.m_max = m_max


class IterationLimitError(CornerFlowError, RuntimeError):
    """Picard iteration failed to reach tolerance; carries the residual
    history for diagnosis."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = list(residuals or [])


class UnsupportedBodyError(CornerFlowError, ValueError):
    """Operation does not support this body kind (documented limitation)."""


class ConfigError(CornerFlowError, ValueError):
    """Scenario configuration violates the schema."""

    def __init__(self, message, path="$"):
        super().__init__(f"{path}: {message}")
        self.path = path
