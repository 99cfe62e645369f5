"""Exception types shared across the package."""


class MsflowError(Exception):
    """Base class for all package-specific errors."""


class BadSpec(MsflowError):
    """A shape/angle/forcing specification is malformed or out of range."""


class ConvexityViolation(MsflowError):
    """The support function fails strict convexity (h + h'' <= 0 somewhere)."""


class MeshFailure(MsflowError):
    """Mesh generation could not meet its quality post-conditions."""


class LinearSolveFailure(MsflowError):
    """A linear solve did not converge within its iteration cap."""


class NonFiniteField(MsflowError):
    """A field acquired non-finite entries."""


class GradientDependentForcing(MsflowError):
    """Operation requires forcing of the form H(x) but got H(x, p)."""


class NoConvergence(MsflowError):
    """Nonlinear iteration stalled; carries the last iterate for inspection."""

    def __init__(self, message, last_values=None, last_speed=None, residual=None):
        super().__init__(message)
        self.last_values = last_values
        self.last_speed = last_speed
        self.residual = residual


class SingularSystem(MsflowError):
    """The assembled linear system is singular."""


class NonGraphical(MsflowError):
    """The requested spherical cap is not the graph of a function."""


class ConfigMismatch(MsflowError):
    """Two trajectories were produced under incompatible configurations."""


class MeshMismatch(MsflowError):
    """Field and reference solution live on different meshes."""


class ModelMismatch(MsflowError):
    """Audit requires a different forcing structure than supplied."""


class ConfigError(MsflowError):
    """Experiment configuration file is missing, unreadable, or invalid."""
