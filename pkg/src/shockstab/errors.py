"""Exception hierarchy shared by all shockstab modules."""


class ShockStabError(Exception):
    """Base class for all toolkit errors."""


class InvalidModel(ShockStabError):
    """System callbacks are inconsistent (dimensions, Jacobians, ...)."""


class DegenerateJump(ShockStabError):
    """The perturbed jump [U]_0 is (numerically) zero; the shock is erased."""


class NotStrictlyHyperbolic(ShockStabError):
    """Convection matrix has repeated or non-real eigenvalues."""


class Characteristic(ShockStabError):
    """A characteristic speed vanishes in the co-moving frame."""


class NoDichotomy(ShockStabError):
    """The spatial symbol has an eigenvalue too close to the imaginary axis."""


class DimensionMismatch(ShockStabError):
    """Column/row counts of a restricted boundary map do not balance."""


class InvalidBoundaryMap(ShockStabError):
    """Boundary map is not onto (rank-deficient)."""


class ZeroOnContour(ShockStabError):
    """A root-counting contour passes through (or too near) a zero."""


class RefinementBudgetExceeded(ShockStabError):
    """Adaptive contour refinement did not reach the phase criterion."""


class EssentialSpectrumIntrusion(ShockStabError):
    """Fourier-symbol spectrum reaches into the requested decay strip."""


class SingularBoundaryMatrix(ShockStabError):
    """Restricted boundary map too ill-conditioned to invert."""


class QuadratureFailure(ShockStabError):
    """Inverse-Laplace quadrature did not converge under node doubling."""


class ExpansionFailure(ShockStabError):
    """Richardson extrapolation of high-frequency correctors did not settle."""


class OutOfChart(ShockStabError):
    """State left the validity ball of the nonlinear diagonalizer field."""


class InsufficientSampling(ShockStabError):
    """Trajectory too coarse for time-difference diagnostics."""


class StepRejected(ShockStabError):
    """Runtime CFL violation; carries the suggested halved step."""

    def __init__(self, message, dt_new=None):
        super().__init__(message)
        self.dt_new = dt_new


class AmplitudeEscape(ShockStabError):
    """Solution left the configured smallness ball (blow-up guard)."""


class BoundaryTraceFailure(ShockStabError):
    """Newton iteration for the boundary trace system stalled."""


class IllPosedBoundary(ShockStabError):
    """Boundary map rank does not match the incoming characteristic count."""


class ShockTraceFailure(ShockStabError):
    """Newton iteration for the Rankine-Hugoniot trace system stalled."""


class ShockDisintegration(ShockStabError):
    """Perturbed traces lost the Lax structure during a run."""


class FitUnreliable(ShockStabError):
    """Decay-rate fit window too short or data at numerical floor."""


class Degenerate(ShockStabError):
    """Polynomial elimination degenerated (identically zero resultant)."""


class Precondition(ShockStabError):
    """Operation called outside its documented precondition."""
