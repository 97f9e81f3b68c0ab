"""Exception types raised by the toolkit."""


class ResotunnelError(Exception):
    """Base class for all toolkit errors."""


class UnsupportedOrder(ResotunnelError):
    """Operation needs the quartic (ell = 4) resonance but got another order."""


class DegenerateModel(ResotunnelError):
    """Model parameters do not produce the volcano landscape (a2 >= 0 etc.)."""


class NoReturn(ResotunnelError):
    """Orbit did not come back to its launch ray within the time cap."""


class NoTorus(ResotunnelError):
    """No torus of the requested branch exists at this energy."""


class SeparatrixProximity(ResotunnelError):
    """Orbit period exceeded the cap; energy is too close to a separatrix."""


class OpenContour(ResotunnelError):
    """Sampled orbit does not close on itself to the required tolerance."""


class OutOfRange(ResotunnelError):
    """Requested quantized action lies outside the attainable action range."""


class EscapeDetected(ResotunnelError):
    """Complexified trajectory left the trust region around the real plane."""


class StepFailure(ResotunnelError):
    """Adaptive integrator underflowed its step size."""


class NoConvergence(ResotunnelError):
    """Shooting iteration did not reach the landing tolerance."""

    def __init__(self, message, best_residual=None):
        super().__init__(message)
        self.best_residual = best_residual


class WrongBranch(ResotunnelError):
    """Shooting landed on a torus of the wrong branch."""


class BranchCollision(ResotunnelError):
    """The two real pendulum branches merge at this energy (chain band)."""


class SolverFailure(ResotunnelError):
    """Dense eigensolver failed."""


class PoorLocalization(ResotunnelError):
    """Local oscillator state does not fit inside a quarter cell."""


class AmbiguousAssignment(ResotunnelError):
    """Two eigenstates tie in quartet overlap within tolerance."""


class PeakSingularity(ResotunnelError):
    """The sine denominator of the coupling amplitude vanishes (peak)."""


class ResonantDenominator(ResotunnelError):
    """Two unperturbed levels are exactly degenerate in the perturbative sum."""


class NoRoot(ResotunnelError):
    """Root bracketing for the crossover criterion failed."""


class ConfigError(ResotunnelError):
    """Malformed scan specification or config file."""
