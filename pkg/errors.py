"""
Exception hierarchy shared by the walk, imaging and reconstruction modules
"""


class SimulationError(ValueError):
    """Base class for every error raised by the simulator"""


class InvalidArrayError(SimulationError):
    """Waveguide array parameters outside their valid range"""


class ContractViolationError(SimulationError):
    """An input broke a documented precondition (non-symmetric H, unnormalized image, ...)"""


class UnsupportedInputError(SimulationError):
    """Input combination the model does not cover (e.g. both photons in one guide)"""


class GeometryError(SimulationError):
    """Optical geometry places a mode outside the grid or superpixels cannot be separated"""


class IncompleteSamplingError(SimulationError):
    """Direct inversion requested without the full mask set"""


class ConfigError(SimulationError):
    """Experiment config is unparseable, incomplete or carries unknown keys"""


class OrderingMissingError(SimulationError):
    """A comparison needs an ordering the sweep did not run"""


class FitConvergenceError(SimulationError):
    """Gaussian-sum fit did not converge; the best-effort fit is attached"""

    def __init__(self, message, fit=None):
        super().__init__(message)
        self.fit = fit


class DegenerateFitWarning(UserWarning):
    """More modes requested than distinguishable peaks in the profile"""
