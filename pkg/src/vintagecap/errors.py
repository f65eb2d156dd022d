"""Exception types shared across the package."""


class VintagecapError(Exception):
    """Base class for all package-specific errors."""


class RegimeViolation(VintagecapError):
    """Model parameters satisfy neither admissible parameter regime."""


class GridError(VintagecapError):
    """Age grid or time step cannot be constructed consistently."""


class AlphaBoundary(VintagecapError):
    """Output coefficient does not vanish at the maximal age."""


class ConfigError(VintagecapError):
    """Malformed or unknown fields in a model configuration document."""


class MisalignedTau(VintagecapError):
    """Requested duration is not an integer multiple of the cell width."""


class GridMismatch(VintagecapError):
    """Operands live on different age grids."""


class NonFiniteState(VintagecapError):
    """A propagation step produced a non-finite state value."""


class NonFiniteObjective(VintagecapError):
    """Objective evaluation returned a non-finite number."""


class MissingTrace(VintagecapError):
    """A dual element lacks its boundary (age-zero) trace."""


class InfeasibleControl(VintagecapError):
    """A control with infinite cost was passed where a finite one is required."""


class NoConvergence(VintagecapError):
    """Horizon escalation hit its cap before successive values settled."""


class NotLQ(VintagecapError):
    """The quadratic value-function oracle applies only to LQ instances."""


class NewtonDivergence(VintagecapError):
    """Newton-Kleinman iteration failed to contract."""


class NotInDomain(VintagecapError):
    """Test state does not extrapolate to zero at age zero."""
